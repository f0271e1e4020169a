#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace foodmet {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Proper rigid motion p -> R p + t. Rotation is kept orthonormal with
/// det(R) = +1; `is_valid` checks this to 1e-9.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) {
    return {Mat3::Identity(), t};
  }
  /// Rotation by `angle_axis.norm()` radians about `angle_axis`.
  static RigidTransform from_axis_angle(const Vec3& angle_axis,
                                        const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  RigidTransform inverse() const;
  /// (*this * other)(p) == this->apply(other.apply(p)).
  RigidTransform operator*(const RigidTransform& other) const;

  Mat4 matrix() const;
  bool is_valid(double tol = 1e-9) const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// p -> scale * (R p) + t.
struct SimilarityTransform {
  double scale = 1.0;
  RigidTransform rigid;

  static SimilarityTransform from_rigid(const RigidTransform& r) {
    return {1.0, r};
  }
  static SimilarityTransform uniform_scale(double s) {
    return {s, RigidTransform::identity()};
  }

  Vec3 apply(const Vec3& p) const {
    return scale * (rigid.rotation() * p) + rigid.translation();
  }
  Mat4 matrix() const;
};

struct AxisAlignedBox {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  bool contains(const Vec3& p, double tol = 0.0) const;
};

/// Length of the box diagonal.
double diameter(const AxisAlignedBox& box);

/// Tight bounds of a point set. Throws ParameterError on empty input.
AxisAlignedBox bounding_box(std::span<const Vec3> points);

using Face = std::array<std::uint32_t, 3>;
using Rgb8 = std::array<std::uint8_t, 3>;

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Indexed triangle surface. Coordinates are meters once a mesh has been
/// scaled; reconstructions straight out of SfM are in model units.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  /// Either empty or one color per vertex.
  std::vector<Rgb8> colors;

  bool has_colors() const { return !colors.empty(); }

  /// Throws StructuralError if a face index is out of range, a face repeats
  /// one index three times, a coordinate is not finite, or the color array
  /// has the wrong length.
  void validate() const;
};

AxisAlignedBox bounding_box(const TriangleMesh& mesh);
AxisAlignedBox bounding_box(const PointCloud& cloud);

Vec3 centroid(std::span<const Vec3> points);

PointCloud apply_transform(const PointCloud& cloud,
                           const SimilarityTransform& t);
PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);
TriangleMesh apply_transform(const TriangleMesh& mesh,
                             const SimilarityTransform& t);
TriangleMesh apply_transform(const TriangleMesh& mesh,
                             const RigidTransform& t);

/// Splits faces into vertex-connected groups. Each component is re-indexed
/// compactly, keeping the original relative order of vertices and faces.
/// Components are ordered by their smallest original face index.
std::vector<TriangleMesh> connected_components(const TriangleMesh& mesh);

struct FaceLabels {
  /// Component id per face; ids are numbered by first appearance.
  std::vector<std::uint32_t> labels;
  std::size_t count = 0;
};
FaceLabels face_component_labels(const TriangleMesh& mesh);

/// Mesh made of the listed faces, with unreferenced vertices removed and the
/// survivors kept in their original relative order.
TriangleMesh submesh(const TriangleMesh& mesh, std::span<const std::uint32_t> face_indices);

/// Concatenates meshes into one, offsetting face indices.
TriangleMesh merge(std::span<const TriangleMesh> parts);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

/// Draws `n` points area-weighted uniformly over the surface. The stream is
/// derived only from `seed` (mt19937_64 plus a fixed 53-bit mapping), so the
/// result is reproducible across standard libraries.
PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n,
                          std::uint64_t seed);

}  // namespace foodmet
