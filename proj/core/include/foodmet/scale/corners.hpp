#pragma once

#include <vector>

#include "foodmet/core/image.hpp"
#include "foodmet/sfmio/bundle.hpp"

namespace foodmet::scale {

struct CornerOptions {
  /// Pixels with intensity >= threshold are white.
  int intensity_threshold = 240;
  /// Quads whose longest side exceeds the shortest by more than this
  /// fraction of the longest are rejected.
  double side_tolerance = 0.25;
  /// Corners closer than this (pixels) are merged to their centroid.
  double merge_radius = 3.0;
  /// Regions smaller than this many pixels are ignored as noise.
  int min_region_pixels = 16;
  /// Polygon simplification tolerance as a fraction of the perimeter.
  double simplify_fraction = 0.03;
};

/// Corners of the white checkerboard squares in `image`, in the same pixel
/// convention as projection (pixel (x, y) covers [x, x+1) x [y, y+1)).
/// White regions are taken with 4-connectivity so diagonally touching
/// squares stay separate; each region's outer crack boundary is simplified
/// to a polygon, and near-square quadrilaterals contribute their vertices.
/// Output is sorted by (v, u).
std::vector<sfmio::Pixel> detect_corners(const GrayImage& image,
                                         const CornerOptions& options = {});

}  // namespace foodmet::scale
