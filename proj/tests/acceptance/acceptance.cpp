// Acceptance suite: one PASS/FAIL line per criterion. Every tolerance and
// time budget is a constant in this file.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "foodmet/align/align.hpp"
#include "foodmet/core/kdtree.hpp"
#include "foodmet/frames/keyframes.hpp"
#include "foodmet/metrics/metrics.hpp"
#include "foodmet/refine/refine.hpp"
#include "foodmet/refine/topology.hpp"
#include "foodmet/scale/scale.hpp"
#include "synthetic.hpp"

using namespace foodmet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// --- 1: headline MAPE -------------------------------------------------------

Outcome mape_headline() {
  const std::vector<double> pred = {40.06,  216.9,  278.86, 279.02, 395.76, 205.17,
                                    372.93, 186.62, 224.08, 153.76, 80.4,   363.99,
                                    535.44, 163.13, 224.08, 25.4,   110.05, 130.96};
  const std::vector<double> gt = {38.53,  280.36, 249.67, 295.13, 392.58, 218.44,
                                  368.77, 173.13, 232.74, 163.09, 85.18,  308.28,
                                  589.83, 262.15, 181.36, 20.58,  108.35, 119.83};
  constexpr double kPublished = 10.973;
  constexpr double kTolerancePp = 0.05;
  const double m = metrics::mape(pred, gt);
  return {std::abs(m - kPublished) <= kTolerancePp,
          fmt("MAPE %.4f%% vs %.3f%% (tol %.2f pp)", m, kPublished, kTolerancePp)};
}

// --- 2: per-object errors ---------------------------------------------------

Outcome per_object_errors() {
  struct Row {
    int id;
    double pred, gt, printed;
  };
  const std::vector<Row> rows = {
      {1, 44.51, 38.53, 15.52},   {2, 321.26, 280.36, 14.59}, {3, 336.11, 249.67, 34.62},
      {4, 347.54, 295.13, 17.76}, {5, 389.28, 392.58, 0.84},  {6, 197.82, 218.44, 9.44},
      {7, 412.52, 368.77, 11.86}, {8, 181.21, 173.13, 4.67},  {9, 233.79, 232.74, 0.45},
      {10, 160.06, 163.09, 1.86}, {11, 86.0, 85.18, 0.96},    {13, 334.7, 308.28, 8.57},
      {14, 517.75, 589.83, 12.22}, {16, 176.24, 262.15, 32.77}, {17, 180.68, 181.36, 0.37},
      {18, 13.58, 20.58, 34.01},  {19, 117.72, 108.35, 8.64}, {20, 117.43, 119.83, 20.03},
  };
  constexpr double kTolerancePp = 0.01;
  constexpr int kFlaggedId = 20;
  int matched = 0;
  bool flagged_mismatch = false;
  double flagged_value = 0.0;
  std::string misses;
  for (const Row& r : rows) {
    const double e = metrics::absolute_percentage_error(r.pred, r.gt);
    const bool ok = std::abs(e - r.printed) <= kTolerancePp;
    if (ok) ++matched;
    if (r.id == kFlaggedId) {
      flagged_mismatch = !ok;
      flagged_value = e;
    } else if (!ok) {
      misses += fmt(" id %d: %.4f vs %.2f;", r.id, e, r.printed);
    }
  }
  const bool pass = matched == 17 && flagged_mismatch && std::abs(flagged_value - 2.00) <= 0.01;
  return {pass, fmt("%d/18 rows within %.2f pp; row %d computes %.4f%% vs printed 20.03 (flagged)%s",
                    matched, kTolerancePp, kFlaggedId, flagged_value, misses.c_str())};
}

// --- 3: bounding-box volumes ------------------------------------------------

Outcome bbox_volumes() {
  struct Row {
    int row;
    double f_w, f_l, f_h, ppu, printed;
  };
  const std::vector<Row> rows = {{1, 238, 257, 2.353, 0.01786, 45.91},
                                 {2, 363, 419, 2.353, 0.02347, 197.07},
                                 {7, 378, 400, 2.353, 0.02435, 211.03},
                                 {19, 465, 537, 0.8, 0.01902, 72.29}};
  constexpr double kToleranceCm3 = 0.5;
  bool pass = true;
  std::string detail;
  for (const Row& r : rows) {
    const double v = scale::bbox_volume(r.f_w, r.f_l, r.f_h, r.ppu);
    pass = pass && std::abs(v - r.printed) <= kToleranceCm3;
    detail += fmt("row %d %.2f vs %.2f; ", r.row, v, r.printed);
  }
  detail += fmt("tol %.1f cm^3", kToleranceCm3);
  return {pass, detail};
}

// --- 4: accelerated Chamfer vs brute force ----------------------------------

Outcome chamfer_oracle() {
  constexpr int kPairs = 500;
  constexpr std::size_t kMaxPoints = 200;
  constexpr double kRelTol = 1e-12;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> count(1, kMaxPoints);
  double worst = 0.0;
  for (int k = 0; k < kPairs; ++k) {
    const PointCloud x = fixtures::random_cloud(rng, count(rng), 0.1);
    const PointCloud y = fixtures::random_cloud(rng, count(rng), 0.1);
    auto directed = [](const PointCloud& a, const PointCloud& b) {
      double s = 0.0;
      for (const Vec3& p : a.points) {
        double best = INFINITY;
        for (const Vec3& q : b.points) best = std::min(best, squared_distance(p, q));
        s += best;
      }
      return s / static_cast<double>(a.size());
    };
    const double brute = directed(x, y) + directed(y, x);
    const double fast = metrics::chamfer(x, y).value;
    worst = std::max(worst, std::abs(fast - brute) / std::max(brute, 1e-300));
  }
  return {worst <= kRelTol, fmt("%d pairs, worst relative difference %.3g (tol %.0e)", kPairs,
                                worst, kRelTol)};
}

// --- 5: alignment recovery --------------------------------------------------

TriangleMesh food_like(std::mt19937_64& rng) {
  TriangleMesh m = fixtures::random_blob(rng);
  std::uniform_real_distribution<double> stretch(0.6, 1.4);
  const Vec3 c = centroid(m.vertices);
  const Vec3 axes(stretch(rng), stretch(rng), stretch(rng));
  const double d = diameter(bounding_box(m));
  // About 10 cm across, centred near the origin.
  for (Vec3& v : m.vertices) v = 0.1 * (v - c).cwiseProduct(axes) / d;
  return m;
}

double rotation_angle(const Mat3& r) {
  return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
}

Outcome alignment_recovery() {
  constexpr int kCases = 20;
  constexpr std::size_t kSamples = 50000;
  constexpr double kMaxAngle = 10.0 * std::numbers::pi / 180.0;
  constexpr double kMaxShift = 0.05;
  constexpr double kChamferTol = 1e-8;
  constexpr double kRotTol = 1e-4;
  constexpr double kTransTol = 1e-4;
  std::mt19937_64 rng(515);
  int ok = 0;
  double worst_ch = 0.0, worst_rot = 0.0, worst_t = 0.0;
  for (int k = 0; k < kCases; ++k) {
    const TriangleMesh gt = food_like(rng);
    const RigidTransform p = fixtures::random_rigid(rng, kMaxAngle, kMaxShift);
    const auto r = align::align_pipeline(apply_transform(gt, p), gt, kSamples,
                                         static_cast<std::uint64_t>(k));
    const RigidTransform inv = p.inverse();
    const double rot = rotation_angle(r.transform.rigid.rotation().transpose() * inv.rotation());
    const double t = (r.transform.rigid.translation() - inv.translation()).norm();
    worst_ch = std::max(worst_ch, r.chamfer_final);
    worst_rot = std::max(worst_rot, rot);
    worst_t = std::max(worst_t, t);
    const bool monotone = r.chamfer_final <= r.chamfer_after_icp &&
                          r.chamfer_after_icp <= r.chamfer_before + 1e-12;
    if (r.chamfer_final < kChamferTol && rot <= kRotTol && t <= kTransTol && monotone) ++ok;
  }
  return {ok == kCases,
          fmt("%d/%d cases; worst chamfer %.3g m^2, rotation %.3g rad, translation %.3g m", ok,
              kCases, worst_ch, worst_rot, worst_t)};
}

// --- 6: gradient vs finite differences --------------------------------------

Outcome gradient_check() {
  constexpr int kPoses = 10;
  constexpr double kRelTol = 1e-4;
  constexpr double kStep = 1e-7;
  std::mt19937_64 rng(66);
  const PointCloud src = sample_surface(food_like(rng), 2000, 1);
  const PointCloud dst = sample_surface(food_like(rng), 2000, 2);
  std::uniform_real_distribution<double> log_scale(-0.1, 0.1);
  double worst = 0.0;
  for (int k = 0; k < kPoses; ++k) {
    const SimilarityTransform pose{std::exp(log_scale(rng)), fixtures::random_rigid(rng, 0.3, 0.02)};
    const Vec3 pivot = pose.apply(centroid(src.points));
    const auto g = align::chamfer_gradient(src, dst, pose, pivot);
    Eigen::Matrix<double, 7, 1> analytic, numeric;
    analytic << g.gradient.translation, g.gradient.rotation, g.gradient.log_scale;
    for (int i = 0; i < 7; ++i) {
      align::PoseDelta plus, minus;
      auto set = [i](align::PoseDelta& d, double h) {
        if (i < 3) d.translation[i] = h;
        else if (i < 6) d.rotation[i - 3] = h;
        else d.log_scale = h;
      };
      set(plus, kStep);
      set(minus, -kStep);
      const double fp = align::chamfer_gradient(src, dst, align::perturb(pose, plus, pivot), pivot).value;
      const double fm = align::chamfer_gradient(src, dst, align::perturb(pose, minus, pivot), pivot).value;
      numeric[i] = (fp - fm) / (2 * kStep);
    }
    worst = std::max(worst, (analytic - numeric).lpNorm<Eigen::Infinity>() /
                                analytic.lpNorm<Eigen::Infinity>());
  }
  return {worst < kRelTol,
          fmt("%d poses, worst relative error %.3g (tol %.0e)", kPoses, worst, kRelTol)};
}

// --- 7: volumes -------------------------------------------------------------

Outcome volume_checks() {
  constexpr double kSphereTol = 0.005;
  constexpr double kScaleRelTol = 1e-12;
  const double cube = metrics::mesh_volume(fixtures::cube(1.0)).volume_cm3;
  const double r = 0.1;
  const double exact = 4.0 / 3.0 * std::numbers::pi * r * r * r * metrics::kCubicMetersToCm3;
  const double sphere = metrics::mesh_volume(fixtures::icosphere(4, r)).volume_cm3;
  const double sphere_err = std::abs(sphere - exact) / exact;
  std::mt19937_64 rng(77);
  double worst_scale = 0.0;
  for (int k = 0; k < 20; ++k) {
    const TriangleMesh m = fixtures::random_blob(rng);
    const double v = metrics::mesh_volume(m).volume_cm3;
    for (double s : {0.5, 2.0, 0.013, 7.3}) {
      const double vs =
          metrics::mesh_volume(apply_transform(m, SimilarityTransform::uniform_scale(s))).volume_cm3;
      worst_scale = std::max(worst_scale, std::abs(vs - s * s * s * v) / (s * s * s * v));
    }
  }
  const bool pass = cube == 1e6 && sphere_err <= kSphereTol && worst_scale <= kScaleRelTol;
  return {pass, fmt("cube %.17g cm^3; icosphere error %.4f%% (tol %.1f%%); s^3 worst rel %.3g",
                    cube, 100 * sphere_err, 100 * kSphereTol, worst_scale)};
}

// --- 8: corner-projection scale ---------------------------------------------

Outcome scale_checks() {
  constexpr double kTol = 0.005;
  const auto one = fixtures::checkerboard_scene(1.0);
  const auto two = fixtures::checkerboard_scene(2.0);
  const double s1 = scale::estimate_scale_corner_projection(one.bundle, one.images).estimate.scale;
  const double s2 = scale::estimate_scale_corner_projection(two.bundle, two.images).estimate.scale;
  const bool pass = std::abs(s1 - 1.0) <= kTol && std::abs(s2 - 0.5) <= kTol;
  return {pass, fmt("scale %.6f (want 1.000), pre-scaled x2 %.6f (want 0.500), tol %.3f", s1, s2, kTol)};
}

// --- 9: refinement properties -----------------------------------------------

bool same(const TriangleMesh& a, const TriangleMesh& b) {
  return a.vertices == b.vertices && a.faces == b.faces;
}

Outcome refine_checks() {
  constexpr int kMeshes = 100;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> shrink(0.005, 1.0);
  int idempotent = 0;
  for (int k = 0; k < kMeshes; ++k) {
    TriangleMesh a = fixtures::random_blob(rng);
    TriangleMesh b = fixtures::random_blob(rng);
    const Vec3 c = centroid(b.vertices);
    const double f = shrink(rng);
    for (Vec3& v : b.vertices) v = c + f * (v - c) + Vec3(3, 0, 0);
    const TriangleMesh parts[] = {a, b};
    const TriangleMesh once = refine::remove_isolated_pieces(merge(parts));
    if (same(refine::remove_isolated_pieces(once), once)) ++idempotent;
  }

  int contained = 0, identity = 0;
  std::normal_distribution<double> g;
  for (int k = 0; k < kMeshes; ++k) {
    const TriangleMesh m = fixtures::random_blob(rng);
    if (same(refine::laplacian_smooth(m, {.lambda = 0.0, .iterations = 10}), m)) ++identity;
    const TriangleMesh s = refine::laplacian_smooth(m, {.lambda = 0.2, .iterations = 10});
    bool inside = true;
    for (int d = 0; d < 200 && inside; ++d) {
      const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
      double h = -INFINITY;
      for (const Vec3& v : m.vertices) h = std::max(h, dir.dot(v));
      for (const Vec3& v : s.vertices) inside = inside && dir.dot(v) <= h + 1e-12;
    }
    if (inside) ++contained;
  }

  // Hemisphere: the capped polyhedron lies between the half-ball of its
  // inradius and the true half-ball.
  const double r = 0.05;
  bool bounded = true;
  std::string hemi;
  for (int level : {1, 2, 3}) {
    const TriangleMesh h = fixtures::hemisphere(4 * level, 12 * level, r);
    const TriangleMesh capped = refine::cap_base(h, refine::SupportPlane{});
    double r_in = INFINITY;
    for (const Face& f : h.faces) {
      const Vec3& a = h.vertices[f[0]];
      const Vec3 n = (h.vertices[f[1]] - a).cross(h.vertices[f[2]] - a).normalized();
      r_in = std::min(r_in, std::abs(n.dot(a)));
    }
    const double v = metrics::signed_volume(capped);
    const double hi = 2.0 / 3.0 * std::numbers::pi * r * r * r;
    const double lo = 2.0 / 3.0 * std::numbers::pi * r_in * r_in * r_in;
    bounded = bounded && lo <= v && v <= hi &&
              refine::EdgeTopology(capped).boundary_edge_count() == 0;
    hemi += fmt(" L%d %.4f%%", level, 100 * (hi - v) / hi);
  }
  const bool pass = idempotent == kMeshes && contained == kMeshes && identity == kMeshes && bounded;
  return {pass, fmt("idempotent %d/%d, hull %d/%d, lambda=0 identity %d/%d, hemisphere deficit%s",
                    idempotent, kMeshes, contained, kMeshes, identity, kMeshes, hemi.c_str())};
}

// --- 10: keyframe determinism -----------------------------------------------

GrayImage noise_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> u(0, 255);
  GrayImage img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(u(rng));
  return img;
}

Outcome keyframe_checks() {
  constexpr int kSets = 100;
  std::mt19937_64 rng(1010);
  frames::KeyframeOptions opt;
  opt.blur_radii = {0, 2, 4, 6, 8};
  // The default threshold is absolute and tuned for full-size video frames;
  // this criterion isolates the duplicate logic.
  opt.blur_threshold = 0.0;

  const GrayImage board = fixtures::render_checkerboard(64, 64, 0, 0, 8, 8);
  const std::vector<GrayImage> dup(5, board);
  const std::vector<int> dup_idx = {0, 1, 2, 3, 4};
  const auto dup_set = frames::select_keyframes(dup, dup_idx, opt);
  const bool one_kept = dup_set.selected_indices.size() == 1;

  // Earlier decisions must not depend on how later frames are ordered.
  int stable = 0;
  for (int k = 0; k < kSets; ++k) {
    std::vector<GrayImage> base;
    for (int i = 0; i < 4; ++i) base.push_back(noise_image(rng, 32, 32));
    std::vector<GrayImage> imgs;
    std::vector<int> idx;
    const int n = 6 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) {
      imgs.push_back(base[rng() % base.size()]);
      if (rng() % 3 == 0) imgs.back() = noise_image(rng, 32, 32);
      idx.push_back(i);
    }
    const auto full = frames::select_keyframes(imgs, idx, opt);
    const int prefix = n / 2;
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin() + prefix, order.end(), rng);
    // Later slots of the scan carry permuted content.
    std::vector<GrayImage> p_imgs;
    for (std::size_t i : order) p_imgs.push_back(imgs[i]);
    const auto permuted = frames::select_keyframes(p_imgs, idx, opt);
    bool same_prefix = true;
    for (int i = 0; i < prefix; ++i) {
      const auto& a = full.log[static_cast<std::size_t>(i)];
      const auto& b = permuted.log[static_cast<std::size_t>(i)];
      same_prefix = same_prefix && a.decision == b.decision && a.duplicate_of == b.duplicate_of;
    }
    const auto again = frames::select_keyframes(imgs, idx, opt);
    if (same_prefix && again.selected_indices == full.selected_indices) ++stable;
  }
  return {one_kept && stable == kSets,
          fmt("duplicates kept %zu of 5; prefix-stable and repeatable on %d/%d sets",
              dup_set.selected_indices.size(), stable, kSets)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "MAPE headline", 1.0, mape_headline},
      {2, "per-object APE", 1.0, per_object_errors},
      {3, "bbox volume", 1.0, bbox_volumes},
      {4, "chamfer oracle", 30.0, chamfer_oracle},
      {5, "alignment recovery", 120.0, alignment_recovery},
      {6, "gradient check", 10.0, gradient_check},
      {7, "volume", 1.0, volume_checks},
      {8, "scale estimator", 30.0, scale_checks},
      {9, "refinement", 60.0, refine_checks},
      {10, "keyframes", 30.0, keyframe_checks},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s %2d %-20s %s [%.3f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
