#include "foodmet/pipeline/report.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "foodmet/metrics/metrics.hpp"

namespace foodmet::pipeline {

using nlohmann::ordered_json;

namespace {

bool counts(const ObjectReport& o) { return !o.excluded && !o.error; }

template <typename T>
void put(ordered_json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

template <typename T>
std::optional<T> take(const ordered_json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void compute_aggregate(EvaluationReport& report) {
  Aggregate a;
  std::vector<double> pred;
  std::vector<double> gt;
  bool have_volumes = true;
  bool have_chamfer = true;
  double sum = 0.0;
  double sum_without = 0.0;
  for (const ObjectReport& o : report.objects) {
    if (!counts(o)) continue;
    ++a.n;
    if (o.pred_volume_cm3 && o.gt_volume_cm3) {
      pred.push_back(*o.pred_volume_cm3);
      gt.push_back(*o.gt_volume_cm3);
    } else {
      have_volumes = false;
    }
    if (o.chamfer_final && o.chamfer_before) {
      sum += *o.chamfer_final;
      sum_without += *o.chamfer_before;
    } else {
      have_chamfer = false;
    }
  }
  if (a.n > 0 && have_volumes) a.mape_pct = metrics::mape(pred, gt);
  if (a.n > 0 && have_chamfer) {
    a.chamfer_sum = sum;
    a.chamfer_mean = sum / static_cast<double>(a.n);
    a.chamfer_sum_without_transform = sum_without;
  }
  report.aggregate = a;
}

std::string to_json(const EvaluationReport& report) {
  ordered_json root;
  root["schema_version"] = report.schema_version;
  root["phase"] = report.phase;
  ordered_json objects = ordered_json::array();
  for (const ObjectReport& o : report.objects) {
    ordered_json j;
    j["id"] = o.id;
    j["label"] = o.label;
    j["excluded"] = o.excluded;
    put(j, "error", o.error);
    put(j, "pred_volume_cm3", o.pred_volume_cm3);
    put(j, "gt_volume_cm3", o.gt_volume_cm3);
    put(j, "ape_pct", o.ape_pct);
    put(j, "pred_watertight", o.pred_watertight);
    put(j, "gt_watertight", o.gt_watertight);
    put(j, "chamfer_before", o.chamfer_before);
    put(j, "chamfer_after_icp", o.chamfer_after_icp);
    put(j, "chamfer_final", o.chamfer_final);
    put(j, "transform_path", o.transform_path);
    put(j, "seed", o.seed);
    put(j, "samples", o.samples);
    put(j, "scale", o.scale);
    put(j, "scale_method", o.scale_method);
    if (!o.log.empty()) j["log"] = o.log;
    objects.push_back(std::move(j));
  }
  root["objects"] = std::move(objects);
  ordered_json agg;
  agg["n"] = report.aggregate.n;
  put(agg, "mape_pct", report.aggregate.mape_pct);
  put(agg, "chamfer_sum", report.aggregate.chamfer_sum);
  put(agg, "chamfer_mean", report.aggregate.chamfer_mean);
  put(agg, "chamfer_sum_without_transform", report.aggregate.chamfer_sum_without_transform);
  root["aggregate"] = std::move(agg);
  root["warnings"] = report.warnings;
  return root.dump(2) + "\n";
}

EvaluationReport report_from_json(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(std::string("report is not valid JSON: ") + e.what(), e.byte,
                     ParseError::Unit::kByte);
  }
  try {
    EvaluationReport r;
    r.schema_version = root.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) {
      throw StructuralError("unsupported report schema_version " +
                            std::to_string(r.schema_version));
    }
    r.phase = root.value("phase", "");
    for (const auto& j : root.at("objects")) {
      ObjectReport o;
      o.id = j.at("id").get<int>();
      o.label = j.value("label", "");
      o.excluded = j.value("excluded", false);
      o.error = take<std::string>(j, "error");
      o.pred_volume_cm3 = take<double>(j, "pred_volume_cm3");
      o.gt_volume_cm3 = take<double>(j, "gt_volume_cm3");
      o.ape_pct = take<double>(j, "ape_pct");
      o.pred_watertight = take<bool>(j, "pred_watertight");
      o.gt_watertight = take<bool>(j, "gt_watertight");
      o.chamfer_before = take<double>(j, "chamfer_before");
      o.chamfer_after_icp = take<double>(j, "chamfer_after_icp");
      o.chamfer_final = take<double>(j, "chamfer_final");
      o.transform_path = take<std::string>(j, "transform_path");
      o.seed = take<std::uint64_t>(j, "seed");
      o.samples = take<std::size_t>(j, "samples");
      o.scale = take<double>(j, "scale");
      o.scale_method = take<std::string>(j, "scale_method");
      if (j.contains("log")) o.log = j.at("log").get<std::vector<std::string>>();
      r.objects.push_back(std::move(o));
    }
    const auto& agg = root.at("aggregate");
    r.aggregate.n = agg.at("n").get<std::size_t>();
    r.aggregate.mape_pct = take<double>(agg, "mape_pct");
    r.aggregate.chamfer_sum = take<double>(agg, "chamfer_sum");
    r.aggregate.chamfer_mean = take<double>(agg, "chamfer_mean");
    r.aggregate.chamfer_sum_without_transform = take<double>(agg, "chamfer_sum_without_transform");
    if (root.contains("warnings")) r.warnings = root.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const ordered_json::exception& e) {
    throw StructuralError(std::string("malformed report: ") + e.what());
  }
}

namespace {

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

void compare(std::vector<std::string>& problems, const std::string& what,
             const std::optional<double>& stored, const std::optional<double>& expected,
             double tol) {
  if (stored.has_value() != expected.has_value()) {
    problems.push_back(what + (stored ? " present but not derivable" : " missing"));
  } else if (stored && !close(*stored, *expected, tol)) {
    problems.push_back(what + " is " + std::to_string(*stored) + ", recomputed " +
                       std::to_string(*expected));
  }
}

}  // namespace

std::vector<std::string> validate_report(const EvaluationReport& report, double tolerance) {
  std::vector<std::string> problems;
  if (report.schema_version != kReportSchemaVersion) {
    problems.push_back("unsupported schema_version " + std::to_string(report.schema_version));
  }
  for (const ObjectReport& o : report.objects) {
    if (o.ape_pct && o.pred_volume_cm3 && o.gt_volume_cm3) {
      const double ape = metrics::absolute_percentage_error(*o.pred_volume_cm3, *o.gt_volume_cm3);
      compare(problems, "object " + std::to_string(o.id) + " ape_pct", o.ape_pct, ape, tolerance);
    }
    if (o.chamfer_final && o.chamfer_after_icp && o.chamfer_before &&
        !(*o.chamfer_final <= *o.chamfer_after_icp && *o.chamfer_after_icp <= *o.chamfer_before)) {
      problems.push_back("object " + std::to_string(o.id) + " chamfer stages are not monotone");
    }
  }
  EvaluationReport recomputed = report;
  compute_aggregate(recomputed);
  const Aggregate& want = recomputed.aggregate;
  const Aggregate& have = report.aggregate;
  if (have.n != want.n) {
    problems.push_back("aggregate n is " + std::to_string(have.n) + ", recomputed " +
                       std::to_string(want.n));
  }
  compare(problems, "aggregate mape_pct", have.mape_pct, want.mape_pct, tolerance);
  compare(problems, "aggregate chamfer_sum", have.chamfer_sum, want.chamfer_sum, tolerance);
  compare(problems, "aggregate chamfer_mean", have.chamfer_mean, want.chamfer_mean, tolerance);
  compare(problems, "aggregate chamfer_sum_without_transform", have.chamfer_sum_without_transform,
          want.chamfer_sum_without_transform, tolerance);
  return problems;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << contents;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace foodmet::pipeline
