#pragma once

#include <cstdint>
#include <span>

#include "foodmet/core/error.hpp"
#include "foodmet/core/geometry.hpp"
#include "foodmet/core/kdtree.hpp"

namespace foodmet::metrics {

inline constexpr double kCubicMetersToCm3 = 1e6;

struct VolumeResult {
  double volume_cm3 = 0.0;
  bool watertight = false;
  std::size_t boundary_edge_count = 0;
};

class OrientationError : public Error {
 public:
  using Error::Error;
};

/// Enclosed volume by summing signed tetrahedra against the bounding-box
/// center, reported in cm^3 assuming vertex coordinates in meters. Open
/// meshes still get the absolute signed sum, flagged watertight = false.
/// Throws OrientationError when a closed mesh has a directed edge shared by
/// two faces (inconsistent winding).
VolumeResult mesh_volume(const TriangleMesh& mesh);

/// Signed volume in cubic model units (no unit conversion, no abs).
double signed_volume(const TriangleMesh& mesh);

/// Mean absolute percentage error, in percent.
double mape(std::span<const double> predicted, std::span<const double> groundtruth);

/// |A - F| / A * 100 for one item.
double absolute_percentage_error(double predicted, double groundtruth);

struct ChamferResult {
  double value = 0.0;          // forward_mean + backward_mean, m^2
  double forward_mean = 0.0;   // mean over x of min_y |x - y|^2
  double backward_mean = 0.0;  // mean over y of min_x |x - y|^2
  std::size_t n_x = 0;
  std::size_t n_y = 0;
};

/// Bidirectional mean squared nearest-neighbor distance. Uses k-d trees but
/// accumulates the same per-point terms in the same order as the brute
/// force, so the value is identical to it.
ChamferResult chamfer(const PointCloud& x, const PointCloud& y);

/// chamfer with prebuilt trees (tree_x over x, tree_y over y).
ChamferResult chamfer(const PointCloud& x, const KdTree& tree_x, const PointCloud& y,
                      const KdTree& tree_y);

/// chamfer(sample_surface(a, n, seed), sample_surface(b, n, seed + 1)).
ChamferResult chamfer_meshes(const TriangleMesh& a, const TriangleMesh& b,
                             std::size_t n_samples, std::uint64_t seed);

}  // namespace foodmet::metrics
