#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foodmet/core/error.hpp"

namespace foodmet::pipeline {

inline constexpr int kReportSchemaVersion = 1;

struct ObjectReport {
  int id = 0;
  std::string label;
  /// Listed in the manifest's exclusion set; reported but not aggregated.
  bool excluded = false;
  /// Set when any stage failed; such objects are left out of aggregates.
  std::optional<std::string> error;

  std::optional<double> pred_volume_cm3;
  std::optional<double> gt_volume_cm3;
  std::optional<double> ape_pct;
  std::optional<bool> pred_watertight;
  std::optional<bool> gt_watertight;

  /// Chamfer without the transform, after ICP, and with the final transform.
  std::optional<double> chamfer_before;
  std::optional<double> chamfer_after_icp;
  std::optional<double> chamfer_final;
  std::optional<std::string> transform_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;

  std::optional<double> scale;
  std::optional<std::string> scale_method;
  /// Stage notes (skips, fallbacks) in execution order.
  std::vector<std::string> log;
};

struct Aggregate {
  std::size_t n = 0;
  std::optional<double> mape_pct;
  std::optional<double> chamfer_sum;
  std::optional<double> chamfer_mean;
  std::optional<double> chamfer_sum_without_transform;
};

struct EvaluationReport {
  int schema_version = kReportSchemaVersion;
  std::string phase;
  std::vector<ObjectReport> objects;
  Aggregate aggregate;
  std::vector<std::string> warnings;
};

/// Fills `report.aggregate` from the per-object entries that are neither
/// excluded nor failed. Chamfer aggregates are set only if every such entry
/// has chamfer values.
void compute_aggregate(EvaluationReport& report);

std::string to_json(const EvaluationReport& report);
EvaluationReport report_from_json(const std::string& text);

/// Recomputes per-object errors and aggregates and returns a description of
/// every mismatch (empty when consistent).
std::vector<std::string> validate_report(const EvaluationReport& report, double tolerance = 1e-9);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace foodmet::pipeline
