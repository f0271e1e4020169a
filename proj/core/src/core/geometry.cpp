#include "foodmet/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "foodmet/core/error.hpp"

namespace foodmet {

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {}

RigidTransform RigidTransform::from_axis_angle(const Vec3& angle_axis,
                                               const Vec3& translation) {
  const double angle = angle_axis.norm();
  if (angle == 0.0) return {Mat3::Identity(), translation};
  return {Eigen::AngleAxisd(angle, angle_axis / angle).toRotationMatrix(),
          translation};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return {rotation_ * other.rotation_,
          rotation_ * other.translation_ + translation_};
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation_.allFinite() || !translation_.allFinite()) return false;
  const double ortho = (rotation_ * rotation_.transpose() - Mat3::Identity())
                           .cwiseAbs()
                           .maxCoeff();
  return ortho <= tol && std::abs(rotation_.determinant() - 1.0) <= tol;
}

Mat4 SimilarityTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = scale * rigid.rotation();
  m.topRightCorner<3, 1>() = rigid.translation();
  return m;
}

bool AxisAlignedBox::contains(const Vec3& p, double tol) const {
  return (p.array() >= min.array() - tol).all() &&
         (p.array() <= max.array() + tol).all();
}

double diameter(const AxisAlignedBox& box) { return box.extent().norm(); }

AxisAlignedBox bounding_box(std::span<const Vec3> points) {
  if (points.empty()) throw ParameterError("bounding_box: empty point set");
  AxisAlignedBox box{points.front(), points.front()};
  for (const Vec3& p : points.subspan(1)) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

AxisAlignedBox bounding_box(const TriangleMesh& mesh) {
  return bounding_box(std::span<const Vec3>(mesh.vertices));
}

AxisAlignedBox bounding_box(const PointCloud& cloud) {
  return bounding_box(std::span<const Vec3>(cloud.points));
}

Vec3 centroid(std::span<const Vec3> points) {
  if (points.empty()) throw ParameterError("centroid: empty point set");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

void TriangleMesh::validate() const {
  const auto n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!vertices[i].allFinite()) {
      throw StructuralError("vertex " + std::to_string(i) +
                            " has a non-finite coordinate");
    }
  }
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (auto idx : face) {
      if (idx >= n) {
        throw StructuralError("face " + std::to_string(f) + " references vertex " +
                              std::to_string(idx) + " but the mesh has " +
                              std::to_string(n) + " vertices");
      }
    }
    if (face[0] == face[1] && face[1] == face[2]) {
      throw StructuralError("face " + std::to_string(f) + " is degenerate");
    }
  }
  if (!colors.empty() && colors.size() != n) {
    throw StructuralError("color count does not match vertex count");
  }
}

PointCloud apply_transform(const PointCloud& cloud,
                           const SimilarityTransform& t) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(t.apply(p));
  return out;
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(t.apply(p));
  return out;
}

TriangleMesh apply_transform(const TriangleMesh& mesh,
                             const SimilarityTransform& t) {
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v = t.apply(v);
  return out;
}

TriangleMesh apply_transform(const TriangleMesh& mesh,
                             const RigidTransform& t) {
  TriangleMesh out = mesh;
  for (Vec3& v : out.vertices) v = t.apply(v);
  return out;
}

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

FaceLabels face_component_labels(const TriangleMesh& mesh) {
  mesh.validate();
  DisjointSets sets(mesh.vertices.size());
  for (const Face& f : mesh.faces) {
    sets.unite(f[0], f[1]);
    sets.unite(f[1], f[2]);
  }
  constexpr auto kNone = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> root_to_component(mesh.vertices.size(), kNone);
  FaceLabels out;
  out.labels.reserve(mesh.faces.size());
  for (const Face& f : mesh.faces) {
    const auto root = sets.find(f[0]);
    if (root_to_component[root] == kNone) {
      root_to_component[root] = static_cast<std::uint32_t>(out.count++);
    }
    out.labels.push_back(root_to_component[root]);
  }
  return out;
}

TriangleMesh submesh(const TriangleMesh& mesh, std::span<const std::uint32_t> face_indices) {
  constexpr auto kNone = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> remap(mesh.vertices.size(), kNone);
  for (auto fi : face_indices) {
    for (auto v : mesh.faces[fi]) remap[v] = 0;
  }
  TriangleMesh part;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (remap[v] == kNone) continue;
    remap[v] = static_cast<std::uint32_t>(part.vertices.size());
    part.vertices.push_back(mesh.vertices[v]);
    if (mesh.has_colors()) part.colors.push_back(mesh.colors[v]);
  }
  part.faces.reserve(face_indices.size());
  for (auto fi : face_indices) {
    const Face& f = mesh.faces[fi];
    part.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
  }
  return part;
}

std::vector<TriangleMesh> connected_components(const TriangleMesh& mesh) {
  const FaceLabels labels = face_component_labels(mesh);
  std::vector<std::vector<std::uint32_t>> groups(labels.count);
  for (std::uint32_t fi = 0; fi < labels.labels.size(); ++fi) {
    groups[labels.labels[fi]].push_back(fi);
  }
  std::vector<TriangleMesh> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(submesh(mesh, g));
  return out;
}

TriangleMesh merge(std::span<const TriangleMesh> parts) {
  TriangleMesh out;
  const bool colored =
      !parts.empty() && std::all_of(parts.begin(), parts.end(),
                                    [](const auto& m) { return m.has_colors(); });
  for (const TriangleMesh& part : parts) {
    const auto offset = static_cast<std::uint32_t>(out.vertices.size());
    out.vertices.insert(out.vertices.end(), part.vertices.begin(),
                        part.vertices.end());
    if (colored) {
      out.colors.insert(out.colors.end(), part.colors.begin(), part.colors.end());
    }
    for (const Face& f : part.faces) {
      out.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
    }
  }
  return out;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

namespace {

// Uniform in [0, 1) from the top 53 bits.
double unit_interval(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n,
                          std::uint64_t seed) {
  if (n == 0) throw ParameterError("sample_surface: n must be >= 1");
  mesh.validate();

  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const Face& f = mesh.faces[i];
    total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]],
                           mesh.vertices[f[2]]);
    cumulative[i] = total;
  }
  if (!(total > 0.0)) {
    throw ParameterError("sample_surface: mesh has no non-degenerate face");
  }

  std::mt19937_64 rng(seed);
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pick = unit_interval(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const Face& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];

    const double r1 = std::sqrt(unit_interval(rng));
    const double r2 = unit_interval(rng);
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    cloud.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
  }
  return cloud;
}

}  // namespace foodmet
