#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "foodmet/core/error.hpp"
#include "foodmet/core/geometry.hpp"

namespace foodmet::pipeline {

enum class Difficulty { kEasy, kMedium, kHard };
std::string to_string(Difficulty d);

/// Which model axis points up. Meshes are rotated so it becomes +z.
enum class UpAxis { kPosX, kNegX, kPosY, kNegY, kPosZ, kNegZ };
std::string to_string(UpAxis a);
/// Proper rotation taking `a` onto +z (identity for +z).
Mat3 up_axis_rotation(UpAxis a);

class ManifestError : public Error {
 public:
  using Error::Error;
};

struct ObjectEntry {
  int id = 0;
  std::string label;
  Difficulty difficulty = Difficulty::kEasy;
  std::filesystem::path frames_dir;
  std::optional<std::filesystem::path> bundle_dir;
  std::optional<std::filesystem::path> gt_mesh_path;
  std::optional<std::filesystem::path> pred_mesh_path;
  UpAxis up_axis = UpAxis::kPosZ;
  std::optional<double> reference_width_cm;

  // Optional inputs that let a stage be skipped or fed directly.
  std::optional<double> pred_volume_cm3;
  std::optional<double> gt_volume_cm3;
  std::optional<std::filesystem::path> scale_json;
  std::vector<double> block_lengths;
  std::vector<double> scale_candidates;
  /// Frame index used for the depth bounding-box check; defaults to the
  /// lowest kept keyframe.
  std::optional<int> overhead_frame;
  std::optional<std::uint64_t> seed;
};

struct DatasetManifest {
  std::vector<ObjectEntry> objects;
  /// Ids kept out of every aggregate.
  std::vector<int> exclude{12, 15};
  std::uint64_t seed = 7;
  std::size_t samples = 100000;
};

/// Parses manifest JSON. Relative paths resolve against `base_dir`.
/// Throws ManifestError on schema violations (missing id, duplicate ids,
/// unknown enum values, wrong types).
DatasetManifest parse_manifest(const std::string& json_text,
                               const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace foodmet::pipeline
