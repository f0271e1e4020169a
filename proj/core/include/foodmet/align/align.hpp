#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "foodmet/core/error.hpp"
#include "foodmet/core/geometry.hpp"

namespace foodmet::align {

class DegenerateCorrespondenceError : public Error {
 public:
  using Error::Error;
};

/// Pure translation taking centroid(src) onto centroid(dst).
RigidTransform centroid_align(const PointCloud& src, const PointCloud& dst);

struct IcpParams {
  int max_iterations = 50;
  /// Stop once the mean squared correspondence error improves by less
  /// than this (m^2).
  double convergence_delta = 1e-8;
  /// Pairs farther apart than this (meters) are ignored.
  std::optional<double> correspondence_cutoff;
};

struct IcpResult {
  RigidTransform transform;
  /// Mean squared correspondence error at each evaluated pose; never
  /// increases.
  std::vector<double> mse_history;
  int iterations = 0;
};

/// Point-to-point ICP starting from `init`. The returned transform already
/// includes `init`. Throws DegenerateCorrespondenceError when the
/// cross-covariance has rank below 2 (e.g. collinear points).
IcpResult icp(const PointCloud& src, const PointCloud& dst, const RigidTransform& init,
              const IcpParams& params = {});

/// Local pose increment around a base transform, see `perturb`.
struct PoseDelta {
  Vec3 rotation = Vec3::Zero();     // axis-angle, radians
  Vec3 translation = Vec3::Zero();  // meters
  double log_scale = 0.0;
};

/// p -> exp(log_scale) * Exp(rotation) * (base(p) - pivot) + pivot + translation.
SimilarityTransform perturb(const SimilarityTransform& base, const PoseDelta& delta,
                            const Vec3& pivot);

struct ChamferGradient {
  double value = 0.0;
  /// Partial derivatives with respect to the PoseDelta fields at zero.
  PoseDelta gradient;
};

/// Chamfer(pose(src), dst) and its gradient in the local chart of `perturb`
/// around `pose`, holding nearest-neighbor correspondences fixed.
ChamferGradient chamfer_gradient(const PointCloud& src, const PointCloud& dst,
                                 const SimilarityTransform& pose, const Vec3& pivot);

struct GradientParams {
  int steps = 200;
  double learning_rate = 1e-2;
  /// Adds a seventh, log-scale parameter. Off for evaluation runs.
  bool allow_scale = false;
};

struct GradientResult {
  SimilarityTransform transform;
  /// Objective after each accepted step, starting with the initial pose.
  std::vector<double> objective_history;
  int steps_taken = 0;
};

/// Gradient descent on the Chamfer objective with backtracking: a step that
/// would raise the objective is halved and retried, an accepted step grows
/// the next one. Rotation is preconditioned by the cloud's RMS radius so
/// both parameter groups move in length units.
GradientResult refine_gradient(const PointCloud& src, const PointCloud& dst,
                               const SimilarityTransform& init, const GradientParams& params = {});

struct AlignOptions {
  IcpParams icp{.max_iterations = 100, .convergence_delta = 1e-8, .correspondence_cutoff = std::nullopt};
  GradientParams gradient;
};

struct StageRecord {
  std::string stage;
  double chamfer = 0.0;
};

struct AlignmentResult {
  /// Maps pred into the ground-truth frame.
  SimilarityTransform transform;
  double chamfer_before = 0.0;
  double chamfer_after_icp = 0.0;
  double chamfer_final = 0.0;
  std::vector<StageRecord> stage_log;
  int icp_iterations = 0;
  int gradient_steps = 0;
};

/// Samples both meshes with the same seed, then centroid shift, ICP and
/// gradient refinement. A stage that does not lower the Chamfer value is
/// not adopted, so chamfer_final <= chamfer_after_icp <= chamfer_before.
AlignmentResult align_pipeline(const TriangleMesh& pred, const TriangleMesh& gt,
                               std::size_t n_samples, std::uint64_t seed,
                               const AlignOptions& options = {});

/// 4x4 homogeneous matrix, one row per line.
std::string format_transform(const SimilarityTransform& t);
void write_transform(const SimilarityTransform& t, const std::filesystem::path& path);
/// Parses a 4x4 matrix written by write_transform. The upper-left block must
/// be a positive multiple of a rotation.
SimilarityTransform read_transform(const std::filesystem::path& path);

}  // namespace foodmet::align
