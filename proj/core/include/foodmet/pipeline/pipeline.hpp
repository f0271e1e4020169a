#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "foodmet/align/align.hpp"
#include "foodmet/frames/keyframes.hpp"
#include "foodmet/pipeline/manifest.hpp"
#include "foodmet/pipeline/report.hpp"
#include "foodmet/refine/refine.hpp"
#include "foodmet/scale/scale.hpp"

namespace foodmet::pipeline {

/// Files of one frame under a frames directory laid out as
/// rgb/<index>.png, depth/<index>.png, food_mask/<index>.png and
/// reference_mask/<index>.png. Only rgb is required.
struct FrameFiles {
  int index = 0;
  std::filesystem::path rgb;
  std::optional<std::filesystem::path> depth;
  std::optional<std::filesystem::path> food_mask;
  std::optional<std::filesystem::path> reference_mask;
};

/// Frames sorted by index. Files in rgb/ whose stem is not an integer are
/// ignored. A missing directory yields an empty list.
std::vector<FrameFiles> list_frames(const std::filesystem::path& frames_dir);

struct RefineConfig {
  std::optional<double> remove_isolated = 0.05;
  std::optional<refine::SmoothingParams> smooth = refine::SmoothingParams{};
  std::optional<std::size_t> fill_holes = 64;
  bool cap_base = true;
};

/// remove isolated pieces -> smooth -> fill holes -> cap base, each step
/// optional. Notes about what ran are appended to `log`.
TriangleMesh refine_mesh(const TriangleMesh& mesh, const RefineConfig& config,
                         std::vector<std::string>& log);

std::string keyframes_to_json(const frames::KeyframeSet& set);
std::string scale_to_json(const scale::ScaleEstimate& estimate,
                          const std::vector<std::string>& notes = {});
scale::ScaleEstimate scale_from_json(const std::string& text);
std::string alignment_to_json(const align::AlignmentResult& result, std::uint64_t seed,
                              std::size_t samples);

/// Volumes and APE only.
EvaluationReport run_phase1(const DatasetManifest& manifest, unsigned jobs = 1);

struct Phase2Config {
  std::filesystem::path out_dir;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  align::AlignOptions align;
  unsigned jobs = 1;
};

/// Phase 1 plus alignment and Chamfer. Transforms are written to
/// out_dir/<id>/transform.txt and referenced by relative path.
EvaluationReport run_phase2(const DatasetManifest& manifest, const Phase2Config& config);

struct RunConfig {
  std::filesystem::path out_dir;
  unsigned jobs = 1;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  frames::KeyframeOptions keyframes;
  RefineConfig refine;
  scale::CheckerboardSpec board;
  align::AlignOptions align;
};

/// keyframes -> refine -> scale -> volume -> align -> evaluate for every
/// object. Stage outputs land in out_dir/<id>/; a failing object gets an
/// error entry and the run moves on.
EvaluationReport run_full(const DatasetManifest& manifest, const RunConfig& config);

}  // namespace foodmet::pipeline
