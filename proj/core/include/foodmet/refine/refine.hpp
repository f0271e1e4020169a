#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "foodmet/core/error.hpp"
#include "foodmet/core/geometry.hpp"

namespace foodmet::refine {

/// Drops connected components whose bounding-box diagonal is at most
/// `fraction` times the whole mesh's diagonal. The component with the
/// largest diagonal always survives (first one on ties). Unreferenced
/// vertices are dropped; survivors keep their relative order.
TriangleMesh remove_isolated_pieces(const TriangleMesh& mesh, double fraction = 0.05);

struct SmoothingParams {
  double lambda = 0.2;
  int iterations = 10;
};

/// Uniform-weight Laplacian smoothing with a simultaneous (Jacobi) update:
/// v <- v + lambda * (mean of edge neighbors - v). Vertices without
/// neighbors stay put.
TriangleMesh laplacian_smooth(const TriangleMesh& mesh, const SmoothingParams& params = {});

class NonOrientableError : public Error {
 public:
  using Error::Error;
};

struct HoleFillResult {
  TriangleMesh mesh;
  std::size_t filled_loops = 0;
  /// Edge counts of loops left open because they exceed the limit.
  std::vector<std::size_t> open_loop_sizes;
};

/// Closes every boundary loop with at most `max_boundary_edges` edges by ear
/// clipping in the loop's best-fit plane. New faces are wound to match their
/// neighbors. Throws NonOrientableError when a directed edge is shared by
/// two faces.
HoleFillResult fill_holes(const TriangleMesh& mesh, std::size_t max_boundary_edges);

/// Plane {p : normal . p = offset} with a unit normal.
struct SupportPlane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  double signed_distance(const Vec3& p) const { return normal.dot(p) - offset; }
  Vec3 project(const Vec3& p) const { return p - signed_distance(p) * normal; }
};

class DegenerateSupportError : public Error {
 public:
  using Error::Error;
};

/// Least-squares plane through the lowest 5% (at least three) of the points
/// along +z, normal oriented toward +z.
SupportPlane estimate_support_plane(std::span<const Vec3> points);
SupportPlane estimate_support_plane(const TriangleMesh& mesh);

class CappingFailedError : public Error {
 public:
  CappingFailedError(const std::string& what, std::size_t loop_id)
      : Error(what), loop_id_(loop_id) {}
  std::size_t loop_id() const noexcept { return loop_id_; }

 private:
  std::size_t loop_id_;
};

/// Moves every boundary-loop vertex onto `plane` and closes each loop with a
/// fan around its projected centroid. Throws CappingFailedError when a
/// projected loop self-intersects. Closed meshes are returned unchanged.
TriangleMesh cap_base(const TriangleMesh& mesh, const SupportPlane& plane);

}  // namespace foodmet::refine
