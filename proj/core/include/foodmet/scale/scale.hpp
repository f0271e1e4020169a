#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "foodmet/core/error.hpp"
#include "foodmet/core/geometry.hpp"
#include "foodmet/core/image.hpp"
#include "foodmet/scale/corners.hpp"
#include "foodmet/sfmio/bundle.hpp"

namespace foodmet::scale {

struct CheckerboardSpec {
  /// Physical side of one square in meters.
  double square_length = 0.012;
};

enum class ScaleMethod { kBlock, kCornerProjection, kDepthBbox };

std::string to_string(ScaleMethod m);
std::optional<ScaleMethod> scale_method_from_string(const std::string& s);

struct ScaleEstimate {
  /// Meters per model unit.
  double scale = 1.0;
  ScaleMethod method = ScaleMethod::kBlock;
  /// Per-image med(d^k) in model units; set only for corner projection.
  std::optional<std::vector<double>> per_image_medians;
};

class EstimationFailedError : public Error {
 public:
  using Error::Error;
};

/// Median over points of the distance to their nearest other point
/// (mean of the two central values for an even count).
double pairwise_min_median(std::span<const Vec3> points);

struct NamedImage {
  std::string name;
  GrayImage image;
};

struct CornerProjectionReport {
  ScaleEstimate estimate;
  /// Detected corners per input image, in input order.
  std::vector<std::pair<std::string, int>> corner_counts;
};

/// For each image: detect checkerboard corners, snap each to the cloud point
/// projecting nearest to it, and take pairwise_min_median of the distinct
/// snapped points. scale = square_length / mean of the per-image medians.
/// Images yielding fewer than two distinct points are skipped; if none
/// remain an EstimationFailedError lists the per-image corner counts.
CornerProjectionReport estimate_scale_corner_projection(
    const sfmio::SfmBundle& bundle, std::span<const NamedImage> images,
    const CheckerboardSpec& board = {}, const CornerOptions& corners = {});

/// scale = square_length / mean(block_lengths).
ScaleEstimate estimate_scale_block_lengths(std::span<const double> block_lengths,
                                           const CheckerboardSpec& board = {});

/// Physical length per pixel (cm/px) from the reference mask's bounding-box
/// width along x.
double ppu_from_reference(const BinaryMask& reference_mask, double physical_width_cm);

struct MaskExtent {
  int width_px;   // shorter bounding-box side
  int length_px;  // longer bounding-box side
};
MaskExtent mask_extent(const BinaryMask& mask);

/// |mean depth under the reference mask - mean depth under the food mask|,
/// ignoring zero readings. Meters.
double food_height(const DepthMap& depth, const BinaryMask& reference_mask,
                   const BinaryMask& food_mask);

/// (f_w * ppu) * (f_l * ppu) * f_h, in cm^3 for f_h in cm and ppu in cm/px.
double bbox_volume(double f_w_px, double f_l_px, double f_h_cm, double ppu_cm_per_px);

struct DepthScaleCheck {
  double ppu = 0.0;         // cm/px
  double f_w = 0.0;         // px
  double f_l = 0.0;         // px
  double f_h = 0.0;         // cm
  double d_r = 0.0;         // m
  double d_f = 0.0;         // m
  double potential_volume = 0.0;  // cm^3
};

/// Assembles the bounding-box volume check from one overhead RGBD frame.
DepthScaleCheck depth_scale_check(const DepthMap& depth, const BinaryMask& reference_mask,
                                  const BinaryMask& food_mask, double reference_width_cm);

/// Picks the candidate whose scaled mesh volume is closest to
/// `target_volume_cm3` (volume grows as scale^3); ties go to the lower scale.
/// The mesh is in model units and should be closed.
ScaleEstimate refine_scale(std::span<const ScaleEstimate> candidates,
                           const TriangleMesh& mesh, double target_volume_cm3);

}  // namespace foodmet::scale
