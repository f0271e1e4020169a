#include "foodmet/scale/scale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "foodmet/core/parallel.hpp"
#include "foodmet/metrics/metrics.hpp"

namespace foodmet::scale {

std::string to_string(ScaleMethod m) {
  switch (m) {
    case ScaleMethod::kBlock:
      return "block";
    case ScaleMethod::kCornerProjection:
      return "corner_projection";
    case ScaleMethod::kDepthBbox:
      return "depth_bbox";
  }
  return "unknown";
}

std::optional<ScaleMethod> scale_method_from_string(const std::string& s) {
  if (s == "block") return ScaleMethod::kBlock;
  if (s == "corner_projection" || s == "corner") return ScaleMethod::kCornerProjection;
  if (s == "depth_bbox" || s == "depth") return ScaleMethod::kDepthBbox;
  return std::nullopt;
}

double pairwise_min_median(std::span<const Vec3> points) {
  const std::size_t n = points.size();
  if (n < 2) throw ParameterError("pairwise_min_median: need at least 2 points");
  std::vector<double> row_min(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::sqrt(squared_distance(points[i], points[j]));
      row_min[i] = std::min(row_min[i], d);
      row_min[j] = std::min(row_min[j], d);
    }
  }
  std::sort(row_min.begin(), row_min.end());
  if (n % 2 == 1) return row_min[n / 2];
  return 0.5 * (row_min[n / 2 - 1] + row_min[n / 2]);
}

CornerProjectionReport estimate_scale_corner_projection(const sfmio::SfmBundle& bundle,
                                                        std::span<const NamedImage> images,
                                                        const CheckerboardSpec& board,
                                                        const CornerOptions& corners) {
  if (!(board.square_length > 0.0)) {
    throw ParameterError("checkerboard square length must be positive");
  }
  for (const NamedImage& img : images) {
    if (!bundle.cameras.contains(img.name)) {
      throw ParameterError("no camera for image '" + img.name + "'");
    }
  }

  const std::size_t n = images.size();
  std::vector<int> counts(n, 0);
  std::vector<std::optional<double>> medians(n);
  parallel_for(
      n,
      [&](std::size_t k) {
        const auto detected = detect_corners(images[k].image, corners);
        counts[k] = static_cast<int>(detected.size());
        if (detected.size() < 2) return;
        const sfmio::ProjectedCloud projected(bundle.cameras.at(images[k].name), bundle.cloud);
        if (projected.visible_count() == 0) return;
        std::vector<std::uint32_t> snapped;
        snapped.reserve(detected.size());
        for (const auto& px : detected) snapped.push_back(projected.nearest_index(px));
        std::sort(snapped.begin(), snapped.end());
        snapped.erase(std::unique(snapped.begin(), snapped.end()), snapped.end());
        if (snapped.size() < 2) return;
        std::vector<Vec3> pts;
        pts.reserve(snapped.size());
        for (auto i : snapped) pts.push_back(bundle.cloud.points[i]);
        medians[k] = pairwise_min_median(pts);
      },
      /*threads=*/0);

  CornerProjectionReport report;
  std::vector<double> used;
  for (std::size_t k = 0; k < n; ++k) {
    report.corner_counts.emplace_back(images[k].name, counts[k]);
    if (medians[k] && *medians[k] > 0.0) used.push_back(*medians[k]);
  }
  if (used.empty()) {
    std::string msg = "corner-projection scale failed; corners per image:";
    for (const auto& [name, c] : report.corner_counts) {
      msg += " " + name + "=" + std::to_string(c);
    }
    throw EstimationFailedError(msg);
  }
  double sum = 0.0;
  for (double m : used) sum += m;
  const double mean = sum / static_cast<double>(used.size());
  report.estimate = {board.square_length / mean, ScaleMethod::kCornerProjection, used};
  return report;
}

ScaleEstimate estimate_scale_block_lengths(std::span<const double> block_lengths,
                                           const CheckerboardSpec& board) {
  if (block_lengths.empty()) throw ParameterError("block lengths: need at least one value");
  if (!(board.square_length > 0.0)) {
    throw ParameterError("checkerboard square length must be positive");
  }
  double sum = 0.0;
  for (double l : block_lengths) {
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw ParameterError("block lengths must be positive and finite");
    }
    sum += l;
  }
  const double mean = sum / static_cast<double>(block_lengths.size());
  return {board.square_length / mean, ScaleMethod::kBlock, std::nullopt};
}

double ppu_from_reference(const BinaryMask& reference_mask, double physical_width_cm) {
  if (!(physical_width_cm > 0.0)) {
    throw ParameterError("reference width must be positive");
  }
  const auto box = foreground_bounds(reference_mask);
  if (!box) throw ParameterError("reference mask is empty");
  return physical_width_cm / static_cast<double>(box->width());
}

MaskExtent mask_extent(const BinaryMask& mask) {
  const auto box = foreground_bounds(mask);
  if (!box) throw ParameterError("mask is empty");
  return {std::min(box->width(), box->height()), std::max(box->width(), box->height())};
}

namespace {

double mean_depth_under(const DepthMap& depth, const BinaryMask& mask, const char* which) {
  if (mask.width() != depth.width() || mask.height() != depth.height()) {
    throw StructuralError(std::string(which) + " mask size differs from the depth map");
  }
  double sum = 0.0;
  std::size_t count = 0;
  const auto d = depth.data();
  const auto m = mask.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (m[i] != 0 && d[i] > 0.0) {
      sum += d[i];
      ++count;
    }
  }
  if (count == 0) {
    throw EstimationFailedError(std::string("no valid depth under the ") + which + " mask");
  }
  return sum / static_cast<double>(count);
}

}  // namespace

double food_height(const DepthMap& depth, const BinaryMask& reference_mask,
                   const BinaryMask& food_mask) {
  return std::abs(mean_depth_under(depth, reference_mask, "reference") -
                  mean_depth_under(depth, food_mask, "food"));
}

double bbox_volume(double f_w_px, double f_l_px, double f_h_cm, double ppu_cm_per_px) {
  if (!(f_w_px > 0.0 && f_l_px > 0.0 && f_h_cm > 0.0 && ppu_cm_per_px > 0.0)) {
    throw ParameterError("bbox_volume: all inputs must be positive");
  }
  return (f_w_px * ppu_cm_per_px) * (f_l_px * ppu_cm_per_px) * f_h_cm;
}

DepthScaleCheck depth_scale_check(const DepthMap& depth, const BinaryMask& reference_mask,
                                  const BinaryMask& food_mask, double reference_width_cm) {
  DepthScaleCheck c;
  c.ppu = ppu_from_reference(reference_mask, reference_width_cm);
  const MaskExtent e = mask_extent(food_mask);
  c.f_w = e.width_px;
  c.f_l = e.length_px;
  c.d_r = mean_depth_under(depth, reference_mask, "reference");
  c.d_f = mean_depth_under(depth, food_mask, "food");
  c.f_h = std::abs(c.d_r - c.d_f) * 100.0;
  if (!(c.f_h > 0.0)) {
    throw EstimationFailedError("food and reference depths coincide; height is zero");
  }
  c.potential_volume = bbox_volume(c.f_w, c.f_l, c.f_h, c.ppu);
  return c;
}

ScaleEstimate refine_scale(std::span<const ScaleEstimate> candidates, const TriangleMesh& mesh,
                           double target_volume_cm3) {
  if (candidates.empty()) throw ParameterError("refine_scale: no candidates");
  if (!(target_volume_cm3 > 0.0)) throw ParameterError("refine_scale: target volume must be positive");
  const double model_volume_cm3 =
      std::abs(metrics::signed_volume(mesh)) * metrics::kCubicMetersToCm3;
  const ScaleEstimate* best = nullptr;
  double best_err = 0.0;
  for (const ScaleEstimate& c : candidates) {
    if (!(c.scale > 0.0)) throw ParameterError("refine_scale: candidate scale must be positive");
    const double err = std::abs(model_volume_cm3 * c.scale * c.scale * c.scale - target_volume_cm3);
    if (best == nullptr || err < best_err || (err == best_err && c.scale < best->scale)) {
      best = &c;
      best_err = err;
    }
  }
  return *best;
}

}  // namespace foodmet::scale
