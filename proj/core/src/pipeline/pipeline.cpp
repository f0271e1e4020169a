#include "foodmet/pipeline/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <thread>

#include "foodmet/core/mesh_io.hpp"
#include "foodmet/metrics/metrics.hpp"
#include "foodmet/refine/topology.hpp"

namespace foodmet::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::vector<FrameFiles> list_frames(const fs::path& frames_dir) {
  std::vector<FrameFiles> out;
  const fs::path rgb_dir = frames_dir / "rgb";
  if (frames_dir.empty() || !fs::is_directory(rgb_dir)) return out;
  for (const auto& entry : fs::directory_iterator(rgb_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const std::string stem = entry.path().stem().string();
    int index = 0;
    const auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), index);
    if (ec != std::errc{} || ptr != stem.data() + stem.size()) continue;
    FrameFiles f;
    f.index = index;
    f.rgb = entry.path();
    auto sibling = [&](const char* dir) -> std::optional<fs::path> {
      fs::path p = frames_dir / dir / entry.path().filename();
      if (fs::is_regular_file(p)) return p;
      return std::nullopt;
    };
    f.depth = sibling("depth");
    f.food_mask = sibling("food_mask");
    f.reference_mask = sibling("reference_mask");
    out.push_back(std::move(f));
  }
  std::sort(out.begin(), out.end(), [](const FrameFiles& a, const FrameFiles& b) {
    return a.index < b.index;
  });
  return out;
}

TriangleMesh refine_mesh(const TriangleMesh& mesh, const RefineConfig& config,
                         std::vector<std::string>& log) {
  TriangleMesh m = mesh;
  if (config.remove_isolated) {
    const std::size_t before = m.faces.size();
    m = refine::remove_isolated_pieces(m, *config.remove_isolated);
    log.push_back("refine: removed " + std::to_string(before - m.faces.size()) +
                  " faces in isolated pieces");
  }
  if (config.smooth) {
    m = refine::laplacian_smooth(m, *config.smooth);
    log.push_back("refine: smoothed");
  }
  if (config.fill_holes) {
    auto filled = refine::fill_holes(m, *config.fill_holes);
    m = std::move(filled.mesh);
    log.push_back("refine: filled " + std::to_string(filled.filled_loops) + " holes, " +
                  std::to_string(filled.open_loop_sizes.size()) + " left open");
  }
  if (config.cap_base && refine::EdgeTopology(m).boundary_edge_count() > 0) {
    m = refine::cap_base(m, refine::estimate_support_plane(m));
    log.push_back("refine: capped base");
  }
  return m;
}

std::string keyframes_to_json(const frames::KeyframeSet& set) {
  ordered_json root;
  root["selected_indices"] = set.selected_indices;
  ordered_json decisions = ordered_json::array();
  for (const auto& d : set.log) {
    ordered_json j;
    j["index"] = d.index;
    j["decision"] = frames::to_string(d.decision);
    if (d.duplicate_of) {
      j["duplicate_of"] = *d.duplicate_of;
      j["hamming"] = d.hamming_distance;
    }
    j["blur"] = d.blur;
    decisions.push_back(std::move(j));
  }
  root["frames"] = std::move(decisions);
  return root.dump(2) + "\n";
}

std::string scale_to_json(const scale::ScaleEstimate& estimate, const std::vector<std::string>& notes) {
  ordered_json root;
  root["scale"] = estimate.scale;
  root["method"] = scale::to_string(estimate.method);
  if (estimate.per_image_medians) root["per_image_medians"] = *estimate.per_image_medians;
  if (!notes.empty()) root["notes"] = notes;
  return root.dump(2) + "\n";
}

scale::ScaleEstimate scale_from_json(const std::string& text) {
  try {
    const auto root = ordered_json::parse(text);
    scale::ScaleEstimate e;
    e.scale = root.at("scale").get<double>();
    if (!(e.scale > 0.0)) throw StructuralError("scale must be positive");
    const auto method = scale::scale_method_from_string(root.value("method", "block"));
    if (!method) throw StructuralError("unknown scale method");
    e.method = *method;
    if (root.contains("per_image_medians")) {
      e.per_image_medians = root.at("per_image_medians").get<std::vector<double>>();
    }
    return e;
  } catch (const ordered_json::exception& ex) {
    throw StructuralError(std::string("malformed scale file: ") + ex.what());
  }
}

std::string alignment_to_json(const align::AlignmentResult& r, std::uint64_t seed,
                              std::size_t samples) {
  ordered_json root;
  root["seed"] = seed;
  root["samples"] = samples;
  root["chamfer_before"] = r.chamfer_before;
  root["chamfer_after_icp"] = r.chamfer_after_icp;
  root["chamfer_final"] = r.chamfer_final;
  root["icp_iterations"] = r.icp_iterations;
  root["gradient_steps"] = r.gradient_steps;
  ordered_json stages = ordered_json::array();
  for (const auto& s : r.stage_log) stages.push_back({{"stage", s.stage}, {"chamfer", s.chamfer}});
  root["stages"] = std::move(stages);
  root["scale"] = r.transform.scale;
  ordered_json rows = ordered_json::array();
  const Mat4 m = r.transform.matrix();
  for (int i = 0; i < 4; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2), m(i, 3)});
  root["matrix"] = std::move(rows);
  return root.dump(2) + "\n";
}

namespace {

// Runs fn(i) for i in [0, n) on at most `jobs` threads; fn must not throw.
template <typename Fn>
void for_each_object(std::size_t n, unsigned jobs, Fn&& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(jobs, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

bool is_excluded(const DatasetManifest& m, int id) {
  return std::find(m.exclude.begin(), m.exclude.end(), id) != m.exclude.end();
}

void save_mesh_atomic(const TriangleMesh& mesh, const fs::path& path) {
  fs::create_directories(path.parent_path());
  fs::path tmp = path.parent_path() / (path.stem().string() + ".partial" + path.extension().string());
  save_mesh(mesh, tmp);
  fs::rename(tmp, path);
}

struct VolumeInfo {
  double cm3;
  std::optional<bool> watertight;
};

VolumeInfo volume_of(const std::optional<double>& given, const std::optional<fs::path>& mesh_path,
                     const char* which) {
  if (given) return {*given, std::nullopt};
  if (!mesh_path) throw Error(std::string("no ") + which + " volume or mesh");
  const auto v = metrics::mesh_volume(load_mesh(*mesh_path));
  return {v.volume_cm3, v.watertight};
}

void fill_volumes(const ObjectEntry& e, ObjectReport& o, std::vector<std::string>& warnings) {
  const VolumeInfo pred = volume_of(e.pred_volume_cm3, e.pred_mesh_path, "predicted");
  const VolumeInfo gt = volume_of(e.gt_volume_cm3, e.gt_mesh_path, "ground-truth");
  o.pred_volume_cm3 = pred.cm3;
  o.pred_watertight = pred.watertight;
  o.gt_volume_cm3 = gt.cm3;
  o.gt_watertight = gt.watertight;
  o.ape_pct = metrics::absolute_percentage_error(pred.cm3, gt.cm3);
  if (pred.watertight == false) {
    warnings.push_back("object " + std::to_string(e.id) + ": predicted mesh is not watertight");
  }
  if (gt.watertight == false) {
    warnings.push_back("object " + std::to_string(e.id) + ": ground-truth mesh is not watertight");
  }
}

struct Slot {
  ObjectReport report;
  std::vector<std::string> warnings;
};

ObjectReport start_report(const DatasetManifest& m, const ObjectEntry& e) {
  ObjectReport o;
  o.id = e.id;
  o.label = e.label;
  o.excluded = is_excluded(m, e.id);
  return o;
}

EvaluationReport finish(std::vector<Slot>& slots, std::string phase) {
  EvaluationReport r;
  r.phase = std::move(phase);
  for (auto& s : slots) {
    if (s.report.error) {
      s.warnings.push_back("object " + std::to_string(s.report.id) + " failed (" +
                           *s.report.error + "); left out of the aggregate");
    }
    r.objects.push_back(std::move(s.report));
    r.warnings.insert(r.warnings.end(), s.warnings.begin(), s.warnings.end());
  }
  compute_aggregate(r);
  return r;
}

std::uint64_t object_seed(const DatasetManifest& m, const ObjectEntry& e,
                          const std::optional<std::uint64_t>& override_seed) {
  return e.seed.value_or(override_seed.value_or(m.seed));
}

void run_alignment(const TriangleMesh& pred, const TriangleMesh& gt, const ObjectEntry& e,
                   std::uint64_t seed, std::size_t samples, const align::AlignOptions& options,
                   const fs::path& out_dir, ObjectReport& o) {
  const auto result = align::align_pipeline(pred, gt, samples, seed, options);
  const fs::path rel = fs::path(std::to_string(e.id)) / "transform.txt";
  write_file_atomic(out_dir / rel, align::format_transform(result.transform));
  write_file_atomic(out_dir / std::to_string(e.id) / "stages.json",
                    alignment_to_json(result, seed, samples));
  o.chamfer_before = result.chamfer_before;
  o.chamfer_after_icp = result.chamfer_after_icp;
  o.chamfer_final = result.chamfer_final;
  o.transform_path = rel.generic_string();
  o.seed = seed;
  o.samples = samples;
}

}  // namespace

EvaluationReport run_phase1(const DatasetManifest& manifest, unsigned jobs) {
  std::vector<Slot> slots(manifest.objects.size());
  for_each_object(manifest.objects.size(), jobs, [&](std::size_t i) {
    const ObjectEntry& e = manifest.objects[i];
    Slot& s = slots[i];
    s.report = start_report(manifest, e);
    try {
      fill_volumes(e, s.report, s.warnings);
    } catch (const std::exception& ex) {
      s.report.error = ex.what();
    }
  });
  return finish(slots, "phase1");
}

EvaluationReport run_phase2(const DatasetManifest& manifest, const Phase2Config& config) {
  std::vector<Slot> slots(manifest.objects.size());
  const std::size_t samples = config.samples.value_or(manifest.samples);
  for_each_object(manifest.objects.size(), config.jobs, [&](std::size_t i) {
    const ObjectEntry& e = manifest.objects[i];
    Slot& s = slots[i];
    s.report = start_report(manifest, e);
    try {
      if (!e.pred_mesh_path || !e.gt_mesh_path) throw Error("phase 2 needs both meshes");
      fill_volumes(e, s.report, s.warnings);
      run_alignment(load_mesh(*e.pred_mesh_path), load_mesh(*e.gt_mesh_path), e,
                    object_seed(manifest, e, config.seed), samples, config.align, config.out_dir,
                    s.report);
    } catch (const std::exception& ex) {
      s.report.error = ex.what();
    }
  });
  return finish(slots, "phase2");
}

namespace {

std::vector<std::string> camera_names_for(const sfmio::SfmBundle& bundle, const fs::path& rgb) {
  // Bundles name images either by bare file name or with a directory prefix.
  std::vector<std::string> names;
  for (const auto& [name, cam] : bundle.cameras) {
    if (name == rgb.filename().string() || fs::path(name).filename() == rgb.filename()) {
      names.push_back(name);
    }
  }
  return names;
}

struct FullContext {
  const DatasetManifest& manifest;
  const RunConfig& config;
  const ObjectEntry& entry;
  fs::path dir;
  ObjectReport& report;
  std::vector<std::string>& warnings;

  void note(std::string s) { report.log.push_back(std::move(s)); }
};

std::vector<int> stage_keyframes(FullContext& c, const std::vector<FrameFiles>& frames) {
  if (frames.empty()) {
    c.note("keyframes: no frames found, stage skipped");
    return {};
  }
  std::vector<GrayImage> gray;
  std::vector<int> indices;
  gray.reserve(frames.size());
  for (const auto& f : frames) {
    gray.push_back(to_gray(load_rgb_png(f.rgb)));
    indices.push_back(f.index);
  }
  const auto set = frames::select_keyframes(gray, indices, c.config.keyframes);
  write_file_atomic(c.dir / "keyframes.json", keyframes_to_json(set));
  c.note("keyframes: kept " + std::to_string(set.selected_indices.size()) + " of " +
         std::to_string(frames.size()));
  return set.selected_indices;
}

std::optional<scale::DepthScaleCheck> try_depth_check(FullContext& c,
                                                      const std::vector<FrameFiles>& frames,
                                                      const std::vector<int>& kept) {
  if (!c.entry.reference_width_cm) return std::nullopt;
  std::optional<int> want = c.entry.overhead_frame;
  if (!want && !kept.empty()) want = kept.front();
  for (const auto& f : frames) {
    if (want && f.index != *want) continue;
    if (!f.depth || !f.food_mask || !f.reference_mask) continue;
    const auto check = scale::depth_scale_check(load_depth_png(*f.depth),
                                                load_mask_png(*f.reference_mask),
                                                load_mask_png(*f.food_mask),
                                                *c.entry.reference_width_cm);
    ordered_json j;
    j["frame"] = f.index;
    j["ppu"] = check.ppu;
    j["f_w"] = check.f_w;
    j["f_l"] = check.f_l;
    j["f_h"] = check.f_h;
    j["d_r"] = check.d_r;
    j["d_f"] = check.d_f;
    j["potential_volume"] = check.potential_volume;
    write_file_atomic(c.dir / "depth_check.json", j.dump(2) + "\n");
    return check;
  }
  return std::nullopt;
}

scale::ScaleEstimate stage_scale(FullContext& c, const TriangleMesh& refined,
                                 const std::vector<FrameFiles>& frames,
                                 const std::vector<int>& kept) {
  const ObjectEntry& e = c.entry;
  std::vector<std::string> notes;
  if (e.scale_json) {
    auto est = scale_from_json(read_file(*e.scale_json));
    c.note("scale: precomputed " + e.scale_json->filename().string() + " used, stage skipped");
    write_file_atomic(c.dir / "scale.json", scale_to_json(est, {"precomputed"}));
    return est;
  }

  std::vector<scale::ScaleEstimate> candidates;
  if (e.bundle_dir) {
    const auto bundle = sfmio::parse_bundle(*e.bundle_dir);
    std::vector<scale::NamedImage> images;
    for (const auto& f : frames) {
      if (!kept.empty() && !std::binary_search(kept.begin(), kept.end(), f.index)) continue;
      const auto names = camera_names_for(bundle, f.rgb);
      if (names.empty()) continue;
      images.push_back({names.front(), to_gray(load_rgb_png(f.rgb))});
    }
    try {
      auto rep = scale::estimate_scale_corner_projection(bundle, images, c.config.board);
      candidates.push_back(rep.estimate);
      notes.push_back("corner projection over " + std::to_string(images.size()) + " images");
    } catch (const scale::EstimationFailedError& ex) {
      notes.push_back(std::string("corner projection failed: ") + ex.what());
    }
  }
  if (candidates.empty() && !e.block_lengths.empty()) {
    candidates.push_back(scale::estimate_scale_block_lengths(e.block_lengths, c.config.board));
    notes.push_back("block lengths");
  }
  for (double s : e.scale_candidates) {
    candidates.push_back({s, scale::ScaleMethod::kDepthBbox, std::nullopt});
  }

  const auto depth = try_depth_check(c, frames, kept);
  scale::ScaleEstimate chosen;
  if (candidates.size() > 1 && depth) {
    chosen = scale::refine_scale(candidates, refined, depth->potential_volume);
    notes.push_back("depth check picked among " + std::to_string(candidates.size()) +
                    " candidates");
  } else if (!candidates.empty()) {
    chosen = candidates.front();
  } else if (depth) {
    const auto box = bounding_box(refined);
    const Vec3 ext = box.extent();
    const double model_box_cm3 = ext.x() * ext.y() * ext.z() * metrics::kCubicMetersToCm3;
    if (!(model_box_cm3 > 0.0)) throw scale::EstimationFailedError("refined mesh is flat");
    chosen = {std::cbrt(depth->potential_volume / model_box_cm3), scale::ScaleMethod::kDepthBbox,
              std::nullopt};
    notes.push_back("no bundle or block lengths; depth-bbox method auto-selected");
  } else {
    throw scale::EstimationFailedError("no scale source (bundle, block lengths, depth or scale_json)");
  }
  for (const auto& n : notes) c.note("scale: " + n);
  write_file_atomic(c.dir / "scale.json", scale_to_json(chosen, notes));
  return chosen;
}

void run_full_object(FullContext& c) {
  const ObjectEntry& e = c.entry;
  const auto frames = list_frames(e.frames_dir);
  const auto kept = stage_keyframes(c, frames);

  std::optional<TriangleMesh> scaled;
  if (e.pred_mesh_path) {
    TriangleMesh raw = load_mesh(*e.pred_mesh_path);
    if (e.up_axis != UpAxis::kPosZ) {
      raw = apply_transform(raw, RigidTransform(up_axis_rotation(e.up_axis), Vec3::Zero()));
      c.note("refine: rotated " + to_string(e.up_axis) + " to +z");
    }
    const TriangleMesh refined = refine_mesh(raw, c.config.refine, c.report.log);
    save_mesh_atomic(refined, c.dir / "refined.ply");

    const auto est = stage_scale(c, refined, frames, kept);
    c.report.scale = est.scale;
    c.report.scale_method = scale::to_string(est.method);
    scaled = apply_transform(refined, SimilarityTransform::uniform_scale(est.scale));
    save_mesh_atomic(*scaled, c.dir / "pred_scaled.ply");

    const auto vol = metrics::mesh_volume(*scaled);
    ordered_json vj;
    vj["volume_cm3"] = vol.volume_cm3;
    vj["watertight"] = vol.watertight;
    vj["boundary_edge_count"] = vol.boundary_edge_count;
    write_file_atomic(c.dir / "volume.json", vj.dump(2) + "\n");
    c.report.pred_volume_cm3 = vol.volume_cm3;
    c.report.pred_watertight = vol.watertight;
    if (!vol.watertight) {
      c.warnings.push_back("object " + std::to_string(e.id) + ": predicted mesh is not watertight");
    }
  } else if (e.pred_volume_cm3) {
    c.report.pred_volume_cm3 = *e.pred_volume_cm3;
    c.note("refine/scale/volume: no predicted mesh, manifest volume used");
  } else {
    throw Error("no predicted mesh or volume");
  }

  std::optional<TriangleMesh> gt;
  if (e.gt_mesh_path) gt = load_mesh(*e.gt_mesh_path);
  if (scaled && gt) {
    const std::size_t samples = c.config.samples.value_or(c.manifest.samples);
    run_alignment(*scaled, *gt, e, object_seed(c.manifest, e, c.config.seed), samples,
                  c.config.align, c.config.out_dir, c.report);
  } else {
    c.note("align: needs both meshes, stage skipped");
  }

  if (e.gt_volume_cm3) {
    c.report.gt_volume_cm3 = *e.gt_volume_cm3;
  } else if (gt) {
    const auto v = metrics::mesh_volume(*gt);
    c.report.gt_volume_cm3 = v.volume_cm3;
    c.report.gt_watertight = v.watertight;
  } else {
    throw Error("no ground-truth volume or mesh");
  }
  c.report.ape_pct =
      metrics::absolute_percentage_error(*c.report.pred_volume_cm3, *c.report.gt_volume_cm3);
}

}  // namespace

EvaluationReport run_full(const DatasetManifest& manifest, const RunConfig& config) {
  std::vector<Slot> slots(manifest.objects.size());
  for_each_object(manifest.objects.size(), config.jobs, [&](std::size_t i) {
    const ObjectEntry& e = manifest.objects[i];
    Slot& s = slots[i];
    s.report = start_report(manifest, e);
    FullContext c{manifest, config, e, config.out_dir / std::to_string(e.id), s.report, s.warnings};
    try {
      fs::create_directories(c.dir);
      run_full_object(c);
    } catch (const std::exception& ex) {
      s.report.error = ex.what();
    }
  });
  return finish(slots, "full");
}

}  // namespace foodmet::pipeline
