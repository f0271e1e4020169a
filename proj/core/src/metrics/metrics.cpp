#include "foodmet/metrics/metrics.hpp"

#include <cmath>
#include <future>
#include <map>
#include <string>
#include <vector>

#include "foodmet/core/parallel.hpp"
#include "foodmet/refine/topology.hpp"

namespace foodmet::metrics {

double signed_volume(const TriangleMesh& mesh) {
  if (mesh.vertices.empty()) return 0.0;
  // Tetrahedra against the box center keep the terms small, which makes the
  // sum insensitive to where the mesh sits in space.
  const Vec3 origin = bounding_box(mesh).center();
  double six_v = 0.0;
  for (const Face& f : mesh.faces) {
    const Vec3 a = mesh.vertices[f[0]] - origin;
    const Vec3 b = mesh.vertices[f[1]] - origin;
    const Vec3 c = mesh.vertices[f[2]] - origin;
    six_v += a.dot(b.cross(c));
  }
  return six_v / 6.0;
}

VolumeResult mesh_volume(const TriangleMesh& mesh) {
  mesh.validate();
  const refine::EdgeTopology topo(mesh);
  VolumeResult result;
  result.boundary_edge_count = topo.boundary_edge_count();
  result.watertight = result.boundary_edge_count == 0;
  if (result.watertight && !topo.consistently_oriented()) {
    throw OrientationError("closed mesh has inconsistently oriented faces");
  }
  result.volume_cm3 = std::abs(signed_volume(mesh)) * kCubicMetersToCm3;
  return result;
}

double absolute_percentage_error(double predicted, double groundtruth) {
  if (!(groundtruth > 0.0)) {
    throw ParameterError("ground-truth volume must be positive, got " +
                         std::to_string(groundtruth));
  }
  return std::abs(groundtruth - predicted) / groundtruth * 100.0;
}

double mape(std::span<const double> predicted, std::span<const double> groundtruth) {
  if (predicted.empty() || predicted.size() != groundtruth.size()) {
    throw ParameterError("mape: inputs must be non-empty and of equal length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    sum += absolute_percentage_error(predicted[i], groundtruth[i]);
  }
  return sum / static_cast<double>(predicted.size());
}

namespace {

double directed_mean(const PointCloud& from, const KdTree& to) {
  std::vector<double> nearest(from.size());
  parallel_for(from.size(), [&](std::size_t i) {
    nearest[i] = to.nearest(from.points[i]).squared_distance;
  });
  double sum = 0.0;
  for (double d : nearest) sum += d;
  return sum / static_cast<double>(from.size());
}

}  // namespace

ChamferResult chamfer(const PointCloud& x, const KdTree& tree_x, const PointCloud& y,
                      const KdTree& tree_y) {
  if (x.empty() || y.empty()) throw ParameterError("chamfer: empty operand");
  ChamferResult r;
  r.n_x = x.size();
  r.n_y = y.size();
  r.forward_mean = directed_mean(x, tree_y);
  r.backward_mean = directed_mean(y, tree_x);
  r.value = r.forward_mean + r.backward_mean;
  return r;
}

ChamferResult chamfer(const PointCloud& x, const PointCloud& y) {
  if (x.empty() || y.empty()) throw ParameterError("chamfer: empty operand");
  auto tree_y = std::async(std::launch::async, [&] { return KdTree(y.points); });
  const KdTree tree_x(x.points);
  return chamfer(x, tree_x, y, tree_y.get());
}

ChamferResult chamfer_meshes(const TriangleMesh& a, const TriangleMesh& b,
                             std::size_t n_samples, std::uint64_t seed) {
  return chamfer(sample_surface(a, n_samples, seed), sample_surface(b, n_samples, seed + 1));
}

}  // namespace foodmet::metrics
