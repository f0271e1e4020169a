#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "foodmet/core/error.hpp"
#include "foodmet/core/geometry.hpp"

namespace foodmet::sfmio {

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Ideal pinhole camera. Pixel coordinates follow the SfM text export
/// convention: the center of the top-left pixel is (0.5, 0.5).
struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  /// World to camera.
  RigidTransform pose;

  void validate() const;
};

/// Nullopt when the point is on or behind the image plane (q.z <= 0).
std::optional<Pixel> project(const PinholeCamera& cam, const Vec3& world);

/// World point at camera depth `depth` along the ray through `pixel`.
Vec3 unproject(const PinholeCamera& cam, const Pixel& pixel, double depth);

struct SfmBundle {
  std::map<std::string, PinholeCamera> cameras;  // keyed by image name
  PointCloud cloud;
};

class UnsupportedModelError : public ParseError {
 public:
  using ParseError::ParseError;
};

class NoCandidateError : public Error {
 public:
  using Error::Error;
};

/// Reads `cameras.txt`, `images.txt` and `points3D.txt` from `dir`.
/// Accepted camera models: PINHOLE (fx fy cx cy) and SIMPLE_PINHOLE (f cx cy).
SfmBundle parse_bundle(const std::filesystem::path& dir);

/// Writes the three text files (PINHOLE cameras, empty 2D observation
/// lines, points with gray color and zero error/track).
void write_bundle(const SfmBundle& bundle, const std::filesystem::path& dir);

/// Rotation from a (w, x, y, z) quaternion. Throws ParameterError for a
/// zero-norm quaternion; otherwise normalizes first.
Mat3 quaternion_to_rotation(double qw, double qx, double qy, double qz);

/// Projections of a whole cloud into one camera, reusable across queries.
class ProjectedCloud {
 public:
  ProjectedCloud(const PinholeCamera& cam, const PointCloud& cloud);

  /// Index of the visible cloud point whose projection is closest to
  /// `pixel`; ties go to the lowest index. Throws NoCandidateError when no
  /// point is in front of the camera.
  std::uint32_t nearest_index(const Pixel& pixel) const;

  std::size_t visible_count() const { return indices_.size(); }

 private:
  std::vector<std::uint32_t> indices_;  // ascending
  std::vector<Pixel> pixels_;
};

Vec3 nearest_projected_point(const PinholeCamera& cam, const PointCloud& cloud,
                             const Pixel& pixel);

}  // namespace foodmet::sfmio
