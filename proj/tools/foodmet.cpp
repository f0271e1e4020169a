// foodmet: command line front end for the food-mesh metrology pipeline.
//
// Exit codes: 0 success, 1 one or more objects failed, 2 bad flags, config
// or manifest.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "foodmet/align/align.hpp"
#include "foodmet/core/error.hpp"
#include "foodmet/core/image.hpp"
#include "foodmet/core/mesh_io.hpp"
#include "foodmet/frames/keyframes.hpp"
#include "foodmet/metrics/metrics.hpp"
#include "foodmet/pipeline/manifest.hpp"
#include "foodmet/pipeline/pipeline.hpp"
#include "foodmet/pipeline/report.hpp"
#include "foodmet/refine/refine.hpp"
#include "foodmet/refine/topology.hpp"
#include "foodmet/scale/scale.hpp"
#include "foodmet/sfmio/bundle.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace foodmet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitObjectFailures = 1;
constexpr int kExitConfig = 2;

// Input the user can fix by changing flags, config or manifest.
class UsageError : public Error {
 public:
  using Error::Error;
};

void emit(const std::optional<fs::path>& out, const std::string& text) {
  if (out) {
    pipeline::write_file_atomic(*out, text);
  } else {
    std::cout << text;
  }
}

std::string chamfer_text(double v, bool x1e3) {
  char buf[64];
  if (x1e3) {
    std::snprintf(buf, sizeof buf, "%.6g m^2 (%.6g x1e-3 m^2)", v, v * 1e3);
  } else {
    std::snprintf(buf, sizeof buf, "%.6g m^2", v);
  }
  return buf;
}

// "lambda=0.2,iters=10"
refine::SmoothingParams parse_smoothing(const std::string& spec) {
  refine::SmoothingParams p;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--smooth: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      if (key == "lambda") {
        p.lambda = std::stod(value);
      } else if (key == "iters" || key == "iterations") {
        p.iterations = std::stoi(value);
      } else {
        throw UsageError("--smooth: unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw UsageError("--smooth: bad value for " + key + ": '" + value + "'");
    }
  }
  return p;
}

// --- keyframes ---------------------------------------------------------------

struct KeyframesArgs {
  fs::path frames_dir;
  frames::KeyframeOptions options;
  std::optional<fs::path> out;
};

void add_keyframes(CLI::App& app, KeyframesArgs& a) {
  auto* sub = app.add_subcommand("keyframes", "Select keyframes from an RGB frame directory");
  sub->add_option("--frames-dir", a.frames_dir, "Directory with rgb/<index>.png")->required();
  sub->add_option("--hash-threshold", a.options.hash_threshold,
                  "Max hamming distance for a duplicate (negative disables)")
      ->capture_default_str();
  sub->add_option("--blur-threshold", a.options.blur_threshold,
                  "Reject frames whose mean blur score is below this")
      ->capture_default_str();
  sub->add_option("--blur-radii", a.options.blur_radii, "Even radii averaged into the score")
      ->delimiter(',');
  sub->add_option("--out", a.out, "Output JSON (stdout if omitted)");
}

int run_keyframes(const KeyframesArgs& a) {
  const auto files = pipeline::list_frames(a.frames_dir);
  if (files.empty()) throw UsageError("no frames under " + (a.frames_dir / "rgb").string());
  std::vector<GrayImage> gray;
  std::vector<int> indices;
  for (const auto& f : files) {
    gray.push_back(to_gray(load_rgb_png(f.rgb)));
    indices.push_back(f.index);
  }
  const auto set = frames::select_keyframes(gray, indices, a.options);
  emit(a.out, pipeline::keyframes_to_json(set));
  std::cerr << "kept " << set.selected_indices.size() << " of " << files.size() << " frames\n";
  return kExitOk;
}

// --- scale -------------------------------------------------------------------

struct ScaleArgs {
  std::string method;
  std::optional<fs::path> bundle;
  std::optional<fs::path> frames_dir;
  double square_mm = 12.0;
  std::vector<double> block_lengths;
  std::optional<fs::path> depth;
  std::optional<fs::path> food_mask;
  std::optional<fs::path> reference_mask;
  std::optional<double> reference_width_cm;
  std::optional<fs::path> mesh;
  std::optional<fs::path> out;
};

void add_scale(CLI::App& app, ScaleArgs& a) {
  auto* sub = app.add_subcommand("scale", "Estimate the model-to-metric scale factor");
  sub->add_option("--method", a.method, "corner | block | depth")
      ->required()
      ->check(CLI::IsMember({"corner", "block", "depth"}));
  sub->add_option("--bundle", a.bundle, "SfM text bundle directory (corner)");
  sub->add_option("--frames-dir", a.frames_dir,
                  "Images named as in the bundle, in DIR or DIR/rgb (corner)");
  sub->add_option("--square-mm", a.square_mm, "Checkerboard square side in mm")
      ->capture_default_str();
  sub->add_option("--block-lengths", a.block_lengths, "Measured block lengths in model units (block)")
      ->delimiter(',');
  sub->add_option("--depth", a.depth, "16-bit depth PNG in mm (depth)");
  sub->add_option("--food-mask", a.food_mask, "Food mask PNG (depth)");
  sub->add_option("--reference-mask", a.reference_mask, "Reference object mask PNG (depth)");
  sub->add_option("--reference-width-cm", a.reference_width_cm,
                  "Physical width of the reference object (depth)");
  sub->add_option("--mesh", a.mesh, "Unscaled mesh whose bounding box is matched (depth)");
  sub->add_option("--out", a.out, "Output JSON (stdout if omitted)");
}

std::vector<scale::NamedImage> images_for_bundle(const sfmio::SfmBundle& bundle,
                                                 const fs::path& dir) {
  std::vector<scale::NamedImage> images;
  for (const auto& [name, cam] : bundle.cameras) {
    const fs::path leaf = fs::path(name).filename();
    for (const fs::path& candidate : {dir / name, dir / "rgb" / leaf, dir / leaf}) {
      if (fs::is_regular_file(candidate)) {
        images.push_back({name, to_gray(load_rgb_png(candidate))});
        break;
      }
    }
  }
  return images;
}

int run_scale(const ScaleArgs& a) {
  const scale::CheckerboardSpec board{a.square_mm / 1000.0};
  scale::ScaleEstimate est;
  std::vector<std::string> notes;
  if (a.method == "corner") {
    if (!a.bundle || !a.frames_dir) throw UsageError("--method corner needs --bundle and --frames-dir");
    const auto bundle = sfmio::parse_bundle(*a.bundle);
    const auto images = images_for_bundle(bundle, *a.frames_dir);
    if (images.empty()) throw UsageError("no bundle image found under " + a.frames_dir->string());
    const auto rep = scale::estimate_scale_corner_projection(bundle, images, board);
    est = rep.estimate;
    for (const auto& [name, count] : rep.corner_counts) {
      notes.push_back(name + ": " + std::to_string(count) + " corners");
    }
  } else if (a.method == "block") {
    if (a.block_lengths.empty()) throw UsageError("--method block needs --block-lengths");
    est = scale::estimate_scale_block_lengths(a.block_lengths, board);
  } else {
    if (!a.depth || !a.food_mask || !a.reference_mask || !a.reference_width_cm || !a.mesh) {
      throw UsageError(
          "--method depth needs --depth, --food-mask, --reference-mask, --reference-width-cm and "
          "--mesh");
    }
    const auto check = scale::depth_scale_check(load_depth_png(*a.depth),
                                                load_mask_png(*a.reference_mask),
                                                load_mask_png(*a.food_mask), *a.reference_width_cm);
    const Vec3 ext = bounding_box(load_mesh(*a.mesh)).extent();
    const double model_cm3 = ext.x() * ext.y() * ext.z() * metrics::kCubicMetersToCm3;
    if (!(model_cm3 > 0.0)) throw scale::EstimationFailedError("mesh bounding box is flat");
    est = {std::cbrt(check.potential_volume / model_cm3), scale::ScaleMethod::kDepthBbox,
           std::nullopt};
    char buf[128];
    std::snprintf(buf, sizeof buf, "potential volume %.4f cm^3, ppu %.6f cm/px",
                  check.potential_volume, check.ppu);
    notes.emplace_back(buf);
  }
  emit(a.out, pipeline::scale_to_json(est, notes));
  std::cerr << "scale " << est.scale << " (" << scale::to_string(est.method) << ")\n";
  return kExitOk;
}

// --- refine ------------------------------------------------------------------

struct RefineArgs {
  fs::path in;
  fs::path out;
  double remove_isolated = 0.05;
  std::string smooth;
  std::size_t fill_holes = 64;
  std::string cap_base;
  CLI::App* sub = nullptr;
};

void add_refine(CLI::App& app, RefineArgs& a) {
  a.sub = app.add_subcommand("refine", "Clean a mesh; steps run in the order given");
  a.sub->add_option("--in", a.in, "Input mesh (.obj or .ply)")->required();
  a.sub->add_option("--out", a.out, "Output mesh (.obj or .ply)")->required();
  a.sub->add_option("--remove-isolated", a.remove_isolated,
                    "Drop components smaller than this fraction of the mesh diagonal");
  a.sub->add_option("--smooth", a.smooth, "Laplacian smoothing, e.g. lambda=0.2,iters=10");
  a.sub->add_option("--fill-holes", a.fill_holes, "Fill boundary loops up to this many edges");
  a.sub->add_option("--cap-base", a.cap_base, "Close the base on the support plane")
      ->check(CLI::IsMember({"auto", "none"}));
}

int run_refine(const RefineArgs& a) {
  TriangleMesh m = load_mesh(a.in);
  for (const CLI::Option* opt : a.sub->parse_order()) {
    const std::string name = opt->get_name();
    if (name == "--remove-isolated") {
      const auto before = m.faces.size();
      m = refine::remove_isolated_pieces(m, a.remove_isolated);
      std::cerr << "remove-isolated: " << before - m.faces.size() << " faces removed\n";
    } else if (name == "--smooth") {
      const auto p = parse_smoothing(a.smooth);
      m = refine::laplacian_smooth(m, p);
      std::cerr << "smooth: lambda " << p.lambda << ", " << p.iterations << " iterations\n";
    } else if (name == "--fill-holes") {
      auto r = refine::fill_holes(m, a.fill_holes);
      m = std::move(r.mesh);
      std::cerr << "fill-holes: " << r.filled_loops << " filled, " << r.open_loop_sizes.size()
                << " left open\n";
    } else if (name == "--cap-base" && a.cap_base == "auto") {
      if (refine::EdgeTopology(m).boundary_edge_count() == 0) {
        std::cerr << "cap-base: mesh already closed\n";
      } else {
        m = refine::cap_base(m, refine::estimate_support_plane(m));
        std::cerr << "cap-base: capped\n";
      }
    }
  }
  save_mesh(m, a.out);
  return kExitOk;
}

// --- volume ------------------------------------------------------------------

struct VolumeArgs {
  fs::path mesh;
  std::optional<double> scale;
  std::optional<fs::path> scale_json;
  std::optional<fs::path> out;
};

void add_volume(CLI::App& app, VolumeArgs& a) {
  auto* sub = app.add_subcommand("volume", "Enclosed volume of a mesh in cm^3");
  sub->add_option("--mesh", a.mesh, "Mesh in meters, or model units with a scale")->required();
  auto* s = sub->add_option("--scale", a.scale, "Uniform scale applied before measuring");
  sub->add_option("--scale-json", a.scale_json, "Read the scale from a scale JSON file")
      ->excludes(s);
  sub->add_option("--out", a.out, "Output JSON (stdout if omitted)");
}

int run_volume(const VolumeArgs& a) {
  TriangleMesh m = load_mesh(a.mesh);
  double s = a.scale.value_or(1.0);
  if (a.scale_json) s = pipeline::scale_from_json(pipeline::read_file(*a.scale_json)).scale;
  if (!(s > 0.0)) throw UsageError("scale must be positive");
  if (s != 1.0) m = apply_transform(m, SimilarityTransform{s, RigidTransform::identity()});
  const auto v = metrics::mesh_volume(m);
  ordered_json j;
  j["mesh"] = a.mesh.string();
  j["scale"] = s;
  j["volume_cm3"] = v.volume_cm3;
  j["watertight"] = v.watertight;
  j["boundary_edges"] = v.boundary_edge_count;
  emit(a.out, j.dump(2) + "\n");
  if (!v.watertight) std::cerr << "warning: mesh is not watertight\n";
  return kExitOk;
}

// --- align -------------------------------------------------------------------

struct AlignArgs {
  fs::path pred;
  fs::path gt;
  std::size_t samples = 50000;
  std::uint64_t seed = 7;
  fs::path out;
  std::optional<fs::path> log;
  bool allow_scale = false;
  bool x1e3 = false;
};

void add_align(CLI::App& app, AlignArgs& a) {
  auto* sub = app.add_subcommand("align", "Align a predicted mesh to ground truth");
  sub->add_option("--pred", a.pred, "Predicted mesh")->required();
  sub->add_option("--gt", a.gt, "Ground-truth mesh")->required();
  sub->add_option("--samples", a.samples, "Surface samples per mesh")->capture_default_str();
  sub->add_option("--seed", a.seed, "Sampling seed")->capture_default_str();
  sub->add_option("--out", a.out, "4x4 transform text file")->required();
  sub->add_option("--log", a.log, "Per-stage JSON log");
  sub->add_flag("--allow-scale", a.allow_scale, "Also optimize a uniform scale");
  sub->add_flag("--chamfer-x1e3", a.x1e3, "Also print Chamfer values in units of 1e-3 m^2");
}

int run_align(const AlignArgs& a) {
  align::AlignOptions opt;
  opt.gradient.allow_scale = a.allow_scale;
  const auto r = align::align_pipeline(load_mesh(a.pred), load_mesh(a.gt), a.samples, a.seed, opt);
  align::write_transform(r.transform, a.out);
  if (a.log) pipeline::write_file_atomic(*a.log, pipeline::alignment_to_json(r, a.seed, a.samples));
  for (const auto& s : r.stage_log) {
    std::cout << s.stage << ": " << chamfer_text(s.chamfer, a.x1e3) << "\n";
  }
  std::cout << "icp iterations " << r.icp_iterations << ", gradient steps " << r.gradient_steps
            << "\n";
  return kExitOk;
}

// --- evaluate / run ----------------------------------------------------------

struct EvaluateArgs {
  fs::path pairs;
  std::optional<fs::path> pred_dir;
  std::optional<fs::path> gt_dir;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<int>> exclude;
  bool volumes_only = false;
  unsigned jobs = 1;
  fs::path out;
  bool x1e3 = false;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  auto* sub = app.add_subcommand("evaluate", "Score predicted meshes against ground truth");
  sub->add_option("--pairs", a.pairs, "Dataset manifest JSON")->required();
  sub->add_option("--pred-dir", a.pred_dir, "Look up predicted meshes as DIR/<id>.{obj,ply}");
  sub->add_option("--gt-dir", a.gt_dir, "Look up ground-truth meshes as DIR/<id>.{obj,ply}");
  sub->add_option("--samples", a.samples, "Surface samples per mesh (manifest default 100000)");
  sub->add_option("--seed", a.seed, "Sampling seed (manifest default 7)");
  sub->add_option("--exclude", a.exclude, "Object ids left out of aggregates")->delimiter(',');
  sub->add_flag("--volumes-only", a.volumes_only, "Volume accuracy only, no alignment");
  sub->add_option("--jobs", a.jobs, "Objects processed in parallel")->capture_default_str();
  sub->add_option("--out", a.out, "Report JSON")->required();
  sub->add_flag("--chamfer-x1e3", a.x1e3, "Also print Chamfer values in units of 1e-3 m^2");
}

std::optional<fs::path> find_mesh(const fs::path& dir, const pipeline::ObjectEntry& e) {
  for (const std::string& stem : {std::to_string(e.id), e.label}) {
    if (stem.empty()) continue;
    for (const char* ext : {".obj", ".ply"}) {
      const fs::path p = dir / (stem + ext);
      if (fs::is_regular_file(p)) return p;
    }
  }
  return std::nullopt;
}

pipeline::DatasetManifest load_manifest_checked(const fs::path& path) {
  try {
    return pipeline::load_manifest(path);
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void print_report(const pipeline::EvaluationReport& r, bool x1e3) {
  for (const auto& o : r.objects) {
    std::cout << o.id << " " << o.label;
    if (o.excluded) std::cout << " [excluded]";
    if (o.error) {
      std::cout << "  error: " << *o.error << "\n";
      continue;
    }
    char buf[160];
    if (o.ape_pct) {
      std::snprintf(buf, sizeof buf, "  pred %.2f cm^3  gt %.2f cm^3  APE %.2f%%",
                    o.pred_volume_cm3.value_or(0.0), o.gt_volume_cm3.value_or(0.0), *o.ape_pct);
      std::cout << buf;
    }
    if (o.chamfer_final) std::cout << "  chamfer " << chamfer_text(*o.chamfer_final, x1e3);
    std::cout << "\n";
  }
  const auto& g = r.aggregate;
  std::cout << "n " << g.n;
  if (g.mape_pct) std::cout << "  MAPE " << *g.mape_pct << "%";
  if (g.chamfer_sum) std::cout << "  chamfer sum " << chamfer_text(*g.chamfer_sum, x1e3);
  if (g.chamfer_mean) std::cout << "  mean " << chamfer_text(*g.chamfer_mean, x1e3);
  std::cout << "\n";
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
}

int report_exit(const pipeline::EvaluationReport& r) {
  for (const auto& o : r.objects) {
    if (o.error) return kExitObjectFailures;
  }
  return kExitOk;
}

int run_evaluate(const EvaluateArgs& a) {
  auto manifest = load_manifest_checked(a.pairs);
  if (a.exclude) manifest.exclude = *a.exclude;
  for (auto& e : manifest.objects) {
    if (a.pred_dir) e.pred_mesh_path = find_mesh(*a.pred_dir, e);
    if (a.gt_dir) e.gt_mesh_path = find_mesh(*a.gt_dir, e);
  }
  pipeline::EvaluationReport report;
  if (a.volumes_only) {
    report = pipeline::run_phase1(manifest, a.jobs);
  } else {
    pipeline::Phase2Config cfg;
    cfg.out_dir = a.out.parent_path().empty() ? fs::path(".") : a.out.parent_path();
    cfg.samples = a.samples;
    cfg.seed = a.seed;
    cfg.jobs = a.jobs;
    report = pipeline::run_phase2(manifest, cfg);
  }
  pipeline::write_file_atomic(a.out, pipeline::to_json(report));
  print_report(report, a.x1e3);
  return report_exit(report);
}

struct RunArgs {
  fs::path manifest;
  fs::path out_dir;
  pipeline::RunConfig config;
  std::optional<std::vector<int>> exclude;
  double square_mm = 12.0;
  bool no_smooth = false;
  bool no_cap = false;
  bool x1e3 = false;
};

void add_run(CLI::App& app, RunArgs& a) {
  auto* sub = app.add_subcommand("run", "Run every stage for every object in a manifest");
  sub->add_option("--manifest", a.manifest, "Dataset manifest JSON")->required();
  sub->add_option("--out-dir", a.out_dir, "Output root; per-object files go to <id>/")->required();
  sub->add_option("--jobs", a.config.jobs, "Objects processed in parallel")->capture_default_str();
  sub->add_option("--samples", a.config.samples, "Surface samples per mesh");
  sub->add_option("--seed", a.config.seed, "Sampling seed");
  sub->add_option("--exclude", a.exclude, "Object ids left out of aggregates")->delimiter(',');
  sub->add_option("--hash-threshold", a.config.keyframes.hash_threshold)->capture_default_str();
  sub->add_option("--blur-threshold", a.config.keyframes.blur_threshold)->capture_default_str();
  sub->add_option("--square-mm", a.square_mm, "Checkerboard square side in mm")
      ->capture_default_str();
  sub->add_flag("--no-smooth", a.no_smooth, "Skip Laplacian smoothing");
  sub->add_flag("--no-cap-base", a.no_cap, "Leave the base open");
  sub->add_flag("--chamfer-x1e3", a.x1e3, "Also print Chamfer values in units of 1e-3 m^2");
}

int run_run(RunArgs& a) {
  auto manifest = load_manifest_checked(a.manifest);
  if (a.exclude) manifest.exclude = *a.exclude;
  a.config.out_dir = a.out_dir;
  a.config.board.square_length = a.square_mm / 1000.0;
  if (a.no_smooth) a.config.refine.smooth.reset();
  if (a.no_cap) a.config.refine.cap_base = false;
  const auto report = pipeline::run_full(manifest, a.config);
  pipeline::write_file_atomic(a.out_dir / "report.json", pipeline::to_json(report));
  print_report(report, a.x1e3);
  return report_exit(report);
}

// --- validate-report ---------------------------------------------------------

struct ValidateArgs {
  fs::path report;
  double tolerance = 1e-9;
};

void add_validate(CLI::App& app, ValidateArgs& a) {
  auto* sub = app.add_subcommand("validate-report", "Recompute a report's aggregates and compare");
  sub->add_option("report", a.report, "Report JSON")->required();
  sub->add_option("--tolerance", a.tolerance)->capture_default_str();
}

int run_validate(const ValidateArgs& a) {
  const auto report = pipeline::report_from_json(pipeline::read_file(a.report));
  const auto issues = pipeline::validate_report(report, a.tolerance);
  for (const auto& i : issues) std::cout << i << "\n";
  if (!issues.empty()) return kExitObjectFailures;
  std::cout << "ok\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Food mesh metrology: keyframes, scale, refinement, volume and alignment"};
  app.set_config("--config", "", "INI file; [section] names match subcommands");
  app.require_subcommand(1);

  KeyframesArgs keyframes;
  ScaleArgs scale_args;
  RefineArgs refine_args;
  VolumeArgs volume;
  AlignArgs align_args;
  EvaluateArgs evaluate;
  RunArgs run;
  ValidateArgs validate;
  add_keyframes(app, keyframes);
  add_scale(app, scale_args);
  add_refine(app, refine_args);
  add_volume(app, volume);
  add_align(app, align_args);
  add_evaluate(app, evaluate);
  add_run(app, run);
  add_validate(app, validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "keyframes") return run_keyframes(keyframes);
    if (cmd == "scale") return run_scale(scale_args);
    if (cmd == "refine") return run_refine(refine_args);
    if (cmd == "volume") return run_volume(volume);
    if (cmd == "align") return run_align(align_args);
    if (cmd == "evaluate") return run_evaluate(evaluate);
    if (cmd == "run") return run_run(run);
    if (cmd == "validate-report") return run_validate(validate);
  } catch (const UsageError& e) {
    std::cerr << "foodmet " << cmd << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "foodmet " << cmd << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "foodmet " << cmd << ": " << e.what() << "\n";
    return kExitObjectFailures;
  }
  return kExitConfig;
}
