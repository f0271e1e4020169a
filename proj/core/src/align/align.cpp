#include "foodmet/align/align.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "foodmet/core/kdtree.hpp"
#include "foodmet/core/parallel.hpp"
#include "foodmet/metrics/metrics.hpp"

namespace foodmet::align {

RigidTransform centroid_align(const PointCloud& src, const PointCloud& dst) {
  if (src.empty() || dst.empty()) throw ParameterError("centroid_align: empty cloud");
  return RigidTransform::from_translation(centroid(dst.points) - centroid(src.points));
}

namespace {

// Least-squares rigid motion taking p[i] onto q[i].
RigidTransform kabsch(std::span<const Vec3> p, std::span<const Vec3> q) {
  const Vec3 pc = centroid(p);
  const Vec3 qc = centroid(q);
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) h += (p[i] - pc) * (q[i] - qc).transpose();
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw DegenerateCorrespondenceError("correspondence cross-covariance has rank < 2");
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Mat3 r = v * d * u.transpose();
  return {r, qc - r * pc};
}

bool collinear(std::span<const Vec3> pts) {
  const Vec3 c = centroid(pts);
  Mat3 cov = Mat3::Zero();
  for (const Vec3& x : pts) cov += (x - c) * (x - c).transpose();
  const Eigen::JacobiSVD<Mat3> svd(cov);
  const Vec3 sv = svd.singularValues();
  return !(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0);
}

}  // namespace

IcpResult icp(const PointCloud& src, const PointCloud& dst, const RigidTransform& init,
              const IcpParams& params) {
  if (params.max_iterations < 1) throw ParameterError("icp: max_iterations must be >= 1");
  if (src.size() < 3 || dst.size() < 3) throw ParameterError("icp: need at least 3 points per cloud");
  if (params.correspondence_cutoff && !(*params.correspondence_cutoff > 0.0)) {
    throw ParameterError("icp: correspondence cutoff must be positive");
  }
  if (collinear(src.points) || collinear(dst.points)) {
    throw DegenerateCorrespondenceError("icp: input cloud is collinear");
  }
  const KdTree tree(dst.points);
  const std::size_t n = src.size();
  std::vector<Vec3> moved(n);
  std::vector<Vec3> matched(n);
  std::vector<double> d2(n);
  const double cutoff2 = params.correspondence_cutoff
                             ? *params.correspondence_cutoff * *params.correspondence_cutoff
                             : std::numeric_limits<double>::infinity();

  IcpResult result{init, {}, 0};
  RigidTransform previous = init;
  for (int it = 0; it < params.max_iterations; ++it) {
    const RigidTransform& t = result.transform;
    parallel_for(n, [&](std::size_t i) {
      moved[i] = t.apply(src.points[i]);
      const auto hit = tree.nearest(moved[i]);
      matched[i] = tree.point(hit.index);
      d2[i] = hit.squared_distance;
    });
    std::vector<Vec3> p;
    std::vector<Vec3> q;
    p.reserve(n);
    q.reserve(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] > cutoff2) continue;
      sum += d2[i];
      p.push_back(moved[i]);
      q.push_back(matched[i]);
    }
    if (p.size() < 3) {
      throw DegenerateCorrespondenceError("icp: fewer than 3 pairs within the cutoff");
    }
    const double mse = sum / static_cast<double>(p.size());
    result.iterations = it + 1;
    if (!result.mse_history.empty() && mse > result.mse_history.back()) {
      result.transform = previous;
      break;
    }
    const bool converged = !result.mse_history.empty() &&
                           result.mse_history.back() - mse < params.convergence_delta;
    result.mse_history.push_back(mse);
    if (mse == 0.0 || converged) break;
    previous = result.transform;
    result.transform = kabsch(p, q) * result.transform;
  }
  return result;
}

SimilarityTransform perturb(const SimilarityTransform& base, const PoseDelta& delta,
                            const Vec3& pivot) {
  const Mat3 r = RigidTransform::from_axis_angle(delta.rotation, Vec3::Zero()).rotation();
  const double k = std::exp(delta.log_scale);
  const Vec3 t = k * (r * (base.rigid.translation() - pivot)) + pivot + delta.translation;
  return {k * base.scale, RigidTransform(r * base.rigid.rotation(), t)};
}

namespace {

class ChamferObjective {
 public:
  ChamferObjective(const PointCloud& src, const PointCloud& dst)
      : src_(src), dst_(dst), src_tree_(src.points), dst_tree_(dst.points) {
    if (src.empty() || dst.empty()) throw ParameterError("chamfer objective: empty cloud");
  }

  ChamferGradient evaluate(const SimilarityTransform& pose, const Vec3& pivot) const {
    const std::size_t nx = src_.size();
    const std::size_t ny = dst_.size();
    std::vector<Vec3> moved(nx);
    std::vector<std::uint32_t> fwd(nx);
    std::vector<std::uint32_t> bwd(ny);
    parallel_for(nx, [&](std::size_t i) {
      moved[i] = pose.apply(src_.points[i]);
      fwd[i] = dst_tree_.nearest(moved[i]).index;
    });
    // Distances under a similarity are uniformly scaled, so the nearest
    // moved point to y is the nearest source point to pose^-1(y).
    const Mat3 rt = pose.rigid.rotation().transpose();
    const Vec3& t = pose.rigid.translation();
    const double inv_s = 1.0 / pose.scale;
    parallel_for(ny, [&](std::size_t j) {
      bwd[j] = src_tree_.nearest(inv_s * (rt * (dst_.points[j] - t))).index;
    });

    std::vector<Vec3> g(nx, Vec3::Zero());
    double fsum = 0.0;
    const double wx = 2.0 / static_cast<double>(nx);
    for (std::size_t i = 0; i < nx; ++i) {
      const Vec3 diff = moved[i] - dst_.points[fwd[i]];
      fsum += squared_distance(moved[i], dst_.points[fwd[i]]);
      g[i] += wx * diff;
    }
    double bsum = 0.0;
    const double wy = 2.0 / static_cast<double>(ny);
    for (std::size_t j = 0; j < ny; ++j) {
      const auto i = bwd[j];
      const Vec3 diff = moved[i] - dst_.points[j];
      bsum += squared_distance(moved[i], dst_.points[j]);
      g[i] += wy * diff;
    }

    ChamferGradient out;
    out.value = fsum / static_cast<double>(nx) + bsum / static_cast<double>(ny);
    for (std::size_t i = 0; i < nx; ++i) {
      const Vec3 q = moved[i] - pivot;
      out.gradient.translation += g[i];
      out.gradient.rotation += q.cross(g[i]);
      out.gradient.log_scale += q.dot(g[i]);
    }
    return out;
  }

 private:
  const PointCloud& src_;
  const PointCloud& dst_;
  KdTree src_tree_;
  KdTree dst_tree_;
};

}  // namespace

ChamferGradient chamfer_gradient(const PointCloud& src, const PointCloud& dst,
                                 const SimilarityTransform& pose, const Vec3& pivot) {
  return ChamferObjective(src, dst).evaluate(pose, pivot);
}

GradientResult refine_gradient(const PointCloud& src, const PointCloud& dst,
                               const SimilarityTransform& init, const GradientParams& params) {
  if (params.steps < 0) throw ParameterError("refine_gradient: steps must be >= 0");
  if (!(params.learning_rate > 0.0)) {
    throw ParameterError("refine_gradient: learning rate must be positive");
  }
  if (!(init.scale > 0.0) || !init.rigid.is_valid()) {
    throw ParameterError("refine_gradient: invalid initial transform");
  }
  const ChamferObjective objective(src, dst);
  const Vec3 src_center = centroid(src.points);

  SimilarityTransform pose = init;
  Vec3 pivot = pose.apply(src_center);
  ChamferGradient current = objective.evaluate(pose, pivot);
  GradientResult result{pose, {current.value}, 0};

  double radius2 = 0.0;
  for (const Vec3& p : src.points) radius2 += (pose.apply(p) - pivot).squaredNorm();
  radius2 = std::max(radius2 / static_cast<double>(src.size()), 1e-300);

  double step = params.learning_rate;
  for (int k = 0; k < params.steps; ++k) {
    if (current.value == 0.0) break;
    PoseDelta delta;
    delta.translation = -step * current.gradient.translation;
    delta.rotation = -step / radius2 * current.gradient.rotation;
    if (params.allow_scale) delta.log_scale = -step / radius2 * current.gradient.log_scale;
    const double move = std::max(
        {delta.translation.lpNorm<Eigen::Infinity>(),
         std::sqrt(radius2) * delta.rotation.lpNorm<Eigen::Infinity>(),
         std::sqrt(radius2) * std::abs(delta.log_scale)});
    if (!(move > 1e-15 * std::sqrt(radius2))) break;

    ++result.steps_taken;
    const SimilarityTransform trial = perturb(pose, delta, pivot);
    const Vec3 trial_pivot = trial.apply(src_center);
    const ChamferGradient next = objective.evaluate(trial, trial_pivot);
    if (next.value < current.value) {
      pose = trial;
      pivot = trial_pivot;
      current = next;
      result.objective_history.push_back(current.value);
      step *= 1.5;
    } else {
      step *= 0.5;
    }
  }
  result.transform = pose;
  return result;
}

AlignmentResult align_pipeline(const TriangleMesh& pred, const TriangleMesh& gt,
                               std::size_t n_samples, std::uint64_t seed,
                               const AlignOptions& options) {
  const PointCloud x = sample_surface(pred, n_samples, seed);
  const PointCloud y = sample_surface(gt, n_samples, seed);
  const KdTree tree_y(y.points);
  auto score = [&](const SimilarityTransform& t) {
    const PointCloud moved = apply_transform(x, t);
    const KdTree tree_moved(moved.points);
    return metrics::chamfer(moved, tree_moved, y, tree_y).value;
  };

  AlignmentResult r;
  SimilarityTransform best;
  double best_value = score(best);
  r.chamfer_before = best_value;
  r.stage_log.push_back({"before", best_value});
  auto consider = [&](const char* stage, const SimilarityTransform& t) {
    const double v = score(t);
    r.stage_log.push_back({stage, v});
    if (v < best_value) {
      best_value = v;
      best = t;
    }
  };

  const RigidTransform shift = centroid_align(x, y);
  consider("centroid", SimilarityTransform::from_rigid(shift));
  const IcpResult fitted = icp(x, y, shift, options.icp);
  r.icp_iterations = fitted.iterations;
  consider("icp", SimilarityTransform::from_rigid(fitted.transform));
  r.chamfer_after_icp = best_value;

  const GradientResult tuned = refine_gradient(x, y, best, options.gradient);
  r.gradient_steps = tuned.steps_taken;
  consider("gradient", tuned.transform);
  r.chamfer_final = best_value;
  r.transform = best;
  return r;
}

std::string format_transform(const SimilarityTransform& t) {
  const Mat4 m = t.matrix();
  std::string out;
  char buf[64];
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 4; ++col) {
      std::snprintf(buf, sizeof buf, "%.17g", m(row, col));
      out += buf;
      out += col == 3 ? '\n' : ' ';
    }
  }
  return out;
}

void write_transform(const SimilarityTransform& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_transform(t);
  if (!out) throw IoError("failed writing " + path.string());
}

SimilarityTransform read_transform(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Mat4 m;
  std::string line;
  int row = 0;
  std::size_t line_no = 0;
  while (row < 4 && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    for (int col = 0; col < 4; ++col) {
      if (!(ss >> m(row, col))) {
        throw ParseError("transform row needs 4 numbers", line_no, ParseError::Unit::kLine);
      }
    }
    ++row;
  }
  if (row < 4) throw ParseError("transform needs 4 rows", line_no, ParseError::Unit::kLine);
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12) {
    throw StructuralError("transform bottom row must be 0 0 0 1");
  }
  const Mat3 a = m.topLeftCorner<3, 3>();
  const double det = a.determinant();
  if (!(det > 0.0)) throw StructuralError("transform has non-positive determinant");
  const double s = std::cbrt(det);
  const RigidTransform rigid(a / s, m.topRightCorner<3, 1>());
  if (!rigid.is_valid(1e-6)) throw StructuralError("transform is not a similarity");
  return {s, rigid};
}

}  // namespace foodmet::align
