#include "foodmet/refine/refine.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "foodmet/core/parallel.hpp"
#include "foodmet/refine/topology.hpp"

namespace foodmet::refine {

TriangleMesh remove_isolated_pieces(const TriangleMesh& mesh, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ParameterError("remove_isolated_pieces: fraction must be in (0, 1)");
  }
  if (mesh.faces.empty()) throw ParameterError("remove_isolated_pieces: empty mesh");
  const FaceLabels labels = face_component_labels(mesh);

  std::vector<AxisAlignedBox> boxes(labels.count);
  std::vector<bool> seen(labels.count, false);
  for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto c = labels.labels[fi];
    for (auto v : mesh.faces[fi]) {
      const Vec3& p = mesh.vertices[v];
      if (!seen[c]) {
        boxes[c] = {p, p};
        seen[c] = true;
      } else {
        boxes[c].min = boxes[c].min.cwiseMin(p);
        boxes[c].max = boxes[c].max.cwiseMax(p);
      }
    }
  }
  AxisAlignedBox whole = boxes.front();
  std::vector<double> diam(labels.count);
  std::size_t largest = 0;
  for (std::size_t c = 0; c < labels.count; ++c) {
    whole.min = whole.min.cwiseMin(boxes[c].min);
    whole.max = whole.max.cwiseMax(boxes[c].max);
    diam[c] = diameter(boxes[c]);
    if (diam[c] > diam[largest]) largest = c;
  }
  const double cutoff = fraction * diameter(whole);

  std::vector<std::uint32_t> kept_faces;
  kept_faces.reserve(mesh.faces.size());
  for (std::uint32_t fi = 0; fi < mesh.faces.size(); ++fi) {
    const auto c = labels.labels[fi];
    if (c == largest || diam[c] > cutoff) kept_faces.push_back(fi);
  }
  return submesh(mesh, kept_faces);
}

TriangleMesh laplacian_smooth(const TriangleMesh& mesh, const SmoothingParams& params) {
  if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) {
    throw ParameterError("laplacian_smooth: lambda must be in [0, 1]");
  }
  if (params.iterations < 0) {
    throw ParameterError("laplacian_smooth: iterations must be >= 0");
  }
  mesh.validate();

  std::vector<std::vector<std::uint32_t>> neighbors(mesh.vertices.size());
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const auto a = f[static_cast<std::size_t>(k)];
      const auto b = f[static_cast<std::size_t>((k + 1) % 3)];
      if (a == b) continue;
      neighbors[a].push_back(b);
      neighbors[b].push_back(a);
    }
  }
  for (auto& n : neighbors) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }

  TriangleMesh out = mesh;
  std::vector<Vec3> next(out.vertices.size());
  for (int it = 0; it < params.iterations; ++it) {
    const auto& cur = out.vertices;
    parallel_for(cur.size(), [&](std::size_t i) {
      const auto& nb = neighbors[i];
      if (nb.empty()) {
        next[i] = cur[i];
        return;
      }
      Vec3 mean = Vec3::Zero();
      for (auto j : nb) mean += cur[j];
      mean /= static_cast<double>(nb.size());
      next[i] = cur[i] + params.lambda * (mean - cur[i]);
    });
    out.vertices.swap(next);
  }
  return out;
}

namespace {

using Vec2 = Eigen::Vector2d;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Orthonormal (u, w) with u x w = n.
std::pair<Vec3, Vec3> plane_basis(const Vec3& n) {
  const Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 u = n.cross(helper).normalized();
  return {u, n.cross(u)};
}

Vec3 newell_normal(const std::vector<Vec3>& poly) {
  Vec3 n = Vec3::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec3& a = poly[i];
    const Vec3& b = poly[(i + 1) % poly.size()];
    n.x() += (a.y() - b.y()) * (a.z() + b.z());
    n.y() += (a.z() - b.z()) * (a.x() + b.x());
    n.z() += (a.x() - b.x()) * (a.y() + b.y());
  }
  return n;
}

bool inside_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  return cross2(b - a, p - a) >= 0.0 && cross2(c - b, p - b) >= 0.0 &&
         cross2(a - c, p - c) >= 0.0;
}

// Triangulates the polygon `ids` (vertex ids in winding order) and appends
// faces that keep that winding.
void ear_clip(const std::vector<Vec3>& vertices, std::vector<std::uint32_t> ids,
              std::vector<Face>& faces) {
  std::vector<Vec3> poly;
  poly.reserve(ids.size());
  for (auto id : ids) poly.push_back(vertices[id]);
  Vec3 n = newell_normal(poly);
  if (n.norm() == 0.0) n = Vec3::UnitZ();
  n.normalize();
  const auto [u, w] = plane_basis(n);
  std::vector<Vec2> pts;
  pts.reserve(poly.size());
  for (const Vec3& p : poly) pts.emplace_back(p.dot(u), p.dot(w));

  std::vector<std::size_t> idx(ids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  while (idx.size() > 3) {
    const std::size_t m = idx.size();
    std::size_t ear = m;
    std::size_t convex = m;
    for (std::size_t i = 0; i < m && ear == m; ++i) {
      const Vec2& a = pts[idx[(i + m - 1) % m]];
      const Vec2& b = pts[idx[i]];
      const Vec2& c = pts[idx[(i + 1) % m]];
      if (cross2(b - a, c - b) <= 0.0) continue;
      if (convex == m) convex = i;
      bool blocked = false;
      for (std::size_t j = 0; j < m && !blocked; ++j) {
        if (j == i || j == (i + 1) % m || j == (i + m - 1) % m) continue;
        const Vec2& p = pts[idx[j]];
        if (p == a || p == b || p == c) continue;
        blocked = inside_triangle(p, a, b, c);
      }
      if (!blocked) ear = i;
    }
    // Degenerate input: clip something anyway so the loop terminates.
    if (ear == m) ear = convex == m ? 0 : convex;
    faces.push_back({ids[idx[(ear + m - 1) % m]], ids[idx[ear]], ids[idx[(ear + 1) % m]]});
    idx.erase(idx.begin() + static_cast<std::ptrdiff_t>(ear));
  }
  faces.push_back({ids[idx[0]], ids[idx[1]], ids[idx[2]]});
}

}  // namespace

HoleFillResult fill_holes(const TriangleMesh& mesh, std::size_t max_boundary_edges) {
  mesh.validate();
  const EdgeTopology topo(mesh);
  if (!topo.consistently_oriented()) {
    throw NonOrientableError("fill_holes: a directed edge is shared by two faces");
  }
  HoleFillResult result{mesh, 0, {}};
  for (auto& loop : topo.boundary_loops()) {
    if (loop.size() < 3) continue;
    if (loop.size() > max_boundary_edges) {
      result.open_loop_sizes.push_back(loop.size());
      continue;
    }
    // The fill must traverse the loop opposite to the faces that own it.
    std::reverse(loop.begin(), loop.end());
    ear_clip(result.mesh.vertices, std::move(loop), result.mesh.faces);
    ++result.filled_loops;
  }
  return result;
}

SupportPlane estimate_support_plane(std::span<const Vec3> points) {
  if (points.size() < 3) throw ParameterError("estimate_support_plane: need at least 3 points");
  const std::size_t k = std::max<std::size_t>(
      3, static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(points.size()))));
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (points[a].z() != points[b].z()) return points[a].z() < points[b].z();
                      return a < b;
                    });
  Vec3 mean = Vec3::Zero();
  for (std::size_t i = 0; i < k; ++i) mean += points[order[i]];
  mean /= static_cast<double>(k);
  Mat3 cov = Mat3::Zero();
  for (std::size_t i = 0; i < k; ++i) {
    const Vec3 d = points[order[i]] - mean;
    cov += d * d.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
    throw DegenerateSupportError("estimate_support_plane: support points are collinear");
  }
  Vec3 normal = eig.eigenvectors().col(0).normalized();
  if (normal.z() < 0.0) normal = -normal;
  return {normal, normal.dot(mean)};
}

SupportPlane estimate_support_plane(const TriangleMesh& mesh) {
  return estimate_support_plane(std::span<const Vec3>(mesh.vertices));
}

namespace {

bool segments_cross(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross2(q2 - q1, p1 - q1);
  const double d2 = cross2(q2 - q1, p2 - q1);
  const double d3 = cross2(p2 - p1, q1 - p1);
  const double d4 = cross2(p2 - p1, q2 - p1);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  auto on_segment = [](const Vec2& a, const Vec2& b, const Vec2& p) {
    return p.x() >= std::min(a.x(), b.x()) && p.x() <= std::max(a.x(), b.x()) &&
           p.y() >= std::min(a.y(), b.y()) && p.y() <= std::max(a.y(), b.y());
  };
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

bool self_intersects(const std::vector<Vec2>& poly) {
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (j == i + 1 || (i == 0 && j == m - 1)) continue;  // adjacent edges
      if (segments_cross(poly[i], poly[(i + 1) % m], poly[j], poly[(j + 1) % m])) return true;
    }
  }
  return false;
}

}  // namespace

TriangleMesh cap_base(const TriangleMesh& mesh, const SupportPlane& plane) {
  mesh.validate();
  if (std::abs(plane.normal.norm() - 1.0) > 1e-9) {
    throw ParameterError("cap_base: plane normal must be unit length");
  }
  const auto loops = EdgeTopology(mesh).boundary_loops();
  if (loops.empty()) return mesh;

  TriangleMesh out = mesh;
  const auto [u, w] = plane_basis(plane.normal);
  for (std::size_t id = 0; id < loops.size(); ++id) {
    const auto& loop = loops[id];
    if (loop.size() < 3) {
      throw CappingFailedError("cap_base: boundary loop " + std::to_string(id) +
                                   " has fewer than 3 edges",
                               id);
    }
    std::vector<Vec2> flat;
    flat.reserve(loop.size());
    Vec3 center = Vec3::Zero();
    for (auto v : loop) {
      const Vec3 p = plane.project(out.vertices[v]);
      out.vertices[v] = p;
      flat.emplace_back(p.dot(u), p.dot(w));
      center += p;
    }
    if (self_intersects(flat)) {
      throw CappingFailedError(
          "cap_base: boundary loop " + std::to_string(id) + " self-intersects on the plane", id);
    }
    center /= static_cast<double>(loop.size());
    const auto c = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.push_back(center);
    if (out.has_colors()) out.colors.push_back(out.colors[loop.front()]);
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const auto a = loop[i];
      const auto b = loop[(i + 1) % loop.size()];
      out.faces.push_back({b, a, c});
    }
  }
  return out;
}

}  // namespace foodmet::refine
