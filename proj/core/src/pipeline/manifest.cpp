#include "foodmet/pipeline/manifest.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace foodmet::pipeline {

using nlohmann::json;

std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy:
      return "easy";
    case Difficulty::kMedium:
      return "medium";
    case Difficulty::kHard:
      return "hard";
  }
  return "unknown";
}

std::string to_string(UpAxis a) {
  switch (a) {
    case UpAxis::kPosX:
      return "+x";
    case UpAxis::kNegX:
      return "-x";
    case UpAxis::kPosY:
      return "+y";
    case UpAxis::kNegY:
      return "-y";
    case UpAxis::kPosZ:
      return "+z";
    case UpAxis::kNegZ:
      return "-z";
  }
  return "unknown";
}

Mat3 up_axis_rotation(UpAxis a) {
  Mat3 r;
  switch (a) {
    case UpAxis::kPosZ:
      return Mat3::Identity();
    case UpAxis::kNegZ:  // half turn about x
      r << 1, 0, 0, 0, -1, 0, 0, 0, -1;
      return r;
    case UpAxis::kPosY:  // quarter turn about x: y -> z
      r << 1, 0, 0, 0, 0, -1, 0, 1, 0;
      return r;
    case UpAxis::kNegY:
      r << 1, 0, 0, 0, 0, 1, 0, -1, 0;
      return r;
    case UpAxis::kPosX:  // quarter turn about y: x -> z
      r << 0, 0, -1, 0, 1, 0, 1, 0, 0;
      return r;
    case UpAxis::kNegX:
      r << 0, 0, 1, 0, 1, 0, -1, 0, 0;
      return r;
  }
  return Mat3::Identity();
}

namespace {

Difficulty parse_difficulty(const std::string& s) {
  if (s == "easy") return Difficulty::kEasy;
  if (s == "medium") return Difficulty::kMedium;
  if (s == "hard") return Difficulty::kHard;
  throw ManifestError("unknown difficulty '" + s + "'");
}

UpAxis parse_up_axis(const std::string& s) {
  if (s == "+x" || s == "x") return UpAxis::kPosX;
  if (s == "-x") return UpAxis::kNegX;
  if (s == "+y" || s == "y") return UpAxis::kPosY;
  if (s == "-y") return UpAxis::kNegY;
  if (s == "+z" || s == "z") return UpAxis::kPosZ;
  if (s == "-z") return UpAxis::kNegZ;
  throw ManifestError("unknown up_axis '" + s + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ManifestError(where + ": field '" + key + "' has the wrong type");
  }
}

ObjectEntry parse_object(const json& j, const std::filesystem::path& base, std::size_t pos) {
  const std::string where = "objects[" + std::to_string(pos) + "]";
  if (!j.is_object()) throw ManifestError(where + " is not an object");
  ObjectEntry e;
  const auto id = optional_field<int>(j, "id", where);
  if (!id) throw ManifestError(where + ": missing id");
  e.id = *id;
  e.label = optional_field<std::string>(j, "label", where).value_or("");
  e.difficulty = parse_difficulty(optional_field<std::string>(j, "difficulty", where).value_or("easy"));
  if (auto v = optional_field<std::string>(j, "frames_dir", where)) e.frames_dir = resolve(base, *v);
  if (auto v = optional_field<std::string>(j, "bundle_dir", where)) e.bundle_dir = resolve(base, *v);
  if (auto v = optional_field<std::string>(j, "gt_mesh_path", where)) e.gt_mesh_path = resolve(base, *v);
  if (auto v = optional_field<std::string>(j, "pred_mesh_path", where)) {
    e.pred_mesh_path = resolve(base, *v);
  }
  e.up_axis = parse_up_axis(optional_field<std::string>(j, "up_axis", where).value_or("+z"));
  e.reference_width_cm = optional_field<double>(j, "reference_width_cm", where);
  e.pred_volume_cm3 = optional_field<double>(j, "pred_volume_cm3", where);
  e.gt_volume_cm3 = optional_field<double>(j, "gt_volume_cm3", where);
  if (auto v = optional_field<std::string>(j, "scale_json", where)) e.scale_json = resolve(base, *v);
  e.block_lengths = optional_field<std::vector<double>>(j, "block_lengths", where).value_or(std::vector<double>{});
  e.scale_candidates =
      optional_field<std::vector<double>>(j, "scale_candidates", where).value_or(std::vector<double>{});
  e.overhead_frame = optional_field<int>(j, "overhead_frame", where);
  e.seed = optional_field<std::uint64_t>(j, "seed", where);
  if (e.reference_width_cm && !(*e.reference_width_cm > 0.0)) {
    throw ManifestError(where + ": reference_width_cm must be positive");
  }
  return e;
}

}  // namespace

DatasetManifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what(), e.byte,
                     ParseError::Unit::kByte);
  }
  if (!root.is_object()) throw ManifestError("manifest root must be an object");
  DatasetManifest m;
  if (auto v = optional_field<std::vector<int>>(root, "exclude", "manifest")) m.exclude = *v;
  if (auto v = optional_field<std::uint64_t>(root, "seed", "manifest")) m.seed = *v;
  if (auto v = optional_field<std::size_t>(root, "samples", "manifest")) m.samples = *v;
  if (m.samples == 0) throw ManifestError("manifest: samples must be positive");
  if (!root.contains("objects") || !root.at("objects").is_array()) {
    throw ManifestError("manifest: 'objects' must be an array");
  }
  std::set<int> ids;
  const json& objects = root.at("objects");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    ObjectEntry e = parse_object(objects[i], base_dir, i);
    if (!ids.insert(e.id).second) {
      throw ManifestError("manifest: duplicate object id " + std::to_string(e.id));
    }
    m.objects.push_back(std::move(e));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

}  // namespace foodmet::pipeline
