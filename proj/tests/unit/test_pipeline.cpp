#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "foodmet/core/mesh_io.hpp"
#include "foodmet/metrics/metrics.hpp"
#include "foodmet/pipeline/pipeline.hpp"
#include "synthetic.hpp"
#include "temp_dir.hpp"

using namespace foodmet;
using namespace foodmet::pipeline;
using foodmet::fixtures::TempDir;
namespace fs = std::filesystem;

namespace {

struct Row {
  int id;
  double pred;
  double gt;
  double printed;
};

// Per-object volumes (cm^3) and printed errors (%) of the published table.
const std::vector<Row> kTable8 = {
    {1, 44.51, 38.53, 15.52},   {2, 321.26, 280.36, 14.59}, {3, 336.11, 249.67, 34.62},
    {4, 347.54, 295.13, 17.76}, {5, 389.28, 392.58, 0.84},  {6, 197.82, 218.44, 9.44},
    {7, 412.52, 368.77, 11.86}, {8, 181.21, 173.13, 4.67},  {9, 233.79, 232.74, 0.45},
    {10, 160.06, 163.09, 1.86}, {11, 86.0, 85.18, 0.96},    {13, 334.7, 308.28, 8.57},
    {14, 517.75, 589.83, 12.22}, {16, 176.24, 262.15, 32.77}, {17, 180.68, 181.36, 0.37},
    {18, 13.58, 20.58, 34.01},  {19, 117.72, 108.35, 8.64}, {20, 117.43, 119.83, 20.03},
};

ObjectEntry volume_entry(int id, double pred, double gt) {
  ObjectEntry e;
  e.id = id;
  e.label = "object_" + std::to_string(id);
  e.pred_volume_cm3 = pred;
  e.gt_volume_cm3 = gt;
  return e;
}

TriangleMesh lumpy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TriangleMesh m = fixtures::random_blob(rng);
  const Vec3 c = centroid(m.vertices);
  for (Vec3& v : m.vertices) v = (v - c).cwiseProduct(Vec3(0.3, 0.2, 0.15)) / diameter(bounding_box(m));
  return m;
}

BinaryMask rect_mask(int w, int h, int x0, int y0, int rw, int rh) {
  BinaryMask m(w, h, 0);
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) m.at(x, y) = 1;
  }
  return m;
}

RgbImage to_rgb(const GrayImage& g) {
  RgbImage out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) out.at(x, y) = {g.at(x, y), g.at(x, y), g.at(x, y)};
  }
  return out;
}

// One overhead RGBD frame: a 50 px reference of 5 cm at 0.5 m and a
// 20 x 30 px food region 3 cm closer, so the box volume is 2 * 3 * 3 cm^3.
void write_depth_frame(const fs::path& frames_dir, int index) {
  for (const char* d : {"rgb", "depth", "food_mask", "reference_mask"}) {
    fs::create_directories(frames_dir / d);
  }
  const std::string name = std::to_string(index) + ".png";
  save_png(to_rgb(fixtures::render_checkerboard(96, 64, 4, 4, 6, 8)), frames_dir / "rgb" / name);
  DepthMap depth(96, 64, 0.5);
  for (int y = 20; y < 50; ++y) {
    for (int x = 60; x < 80; ++x) depth.at(x, y) = 0.47;
  }
  save_png(depth, frames_dir / "depth" / name);
  save_png(rect_mask(96, 64, 5, 10, 50, 8), frames_dir / "reference_mask" / name);
  save_png(rect_mask(96, 64, 60, 20, 20, 30), frames_dir / "food_mask" / name);
}

RunConfig quiet_config(const fs::path& out) {
  RunConfig c;
  c.out_dir = out;
  c.samples = 3000;
  c.keyframes.blur_threshold = 0.0;
  c.refine.smooth = std::nullopt;
  return c;
}

std::map<std::string, std::string> json_outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (ext == ".json" || ext == ".txt") {
      out[fs::relative(e.path(), dir).generic_string()] = read_file(e.path());
    }
  }
  return out;
}

}  // namespace

TEST(Manifest, ParsesAndResolvesPaths) {
  const std::string text = R"({
    "seed": 11, "samples": 2000, "exclude": [3],
    "objects": [
      {"id": 1, "label": "strawberry", "difficulty": "easy", "frames_dir": "frames/1",
       "gt_mesh_path": "/abs/gt.obj", "up_axis": "-y", "reference_width_cm": 5.7},
      {"id": 2, "label": "burger", "difficulty": "hard", "frames_dir": "f2",
       "scale_candidates": [0.1, 0.2], "block_lengths": [0.12]}
    ]})";
  const DatasetManifest m = parse_manifest(text, "/data/set");
  EXPECT_EQ(m.seed, 11u);
  EXPECT_EQ(m.samples, 2000u);
  EXPECT_EQ(m.exclude, std::vector<int>{3});
  ASSERT_EQ(m.objects.size(), 2u);
  EXPECT_EQ(m.objects[0].frames_dir, fs::path("/data/set/frames/1"));
  EXPECT_EQ(m.objects[0].gt_mesh_path, fs::path("/abs/gt.obj"));
  EXPECT_EQ(m.objects[0].up_axis, UpAxis::kNegY);
  EXPECT_EQ(m.objects[0].reference_width_cm, 5.7);
  EXPECT_EQ(m.objects[1].difficulty, Difficulty::kHard);
  EXPECT_EQ(m.objects[1].scale_candidates, (std::vector<double>{0.1, 0.2}));
  EXPECT_FALSE(m.objects[1].bundle_dir);
}

TEST(Manifest, Defaults) {
  const DatasetManifest m = parse_manifest(R"({"objects": [{"id": 4, "frames_dir": "x"}]})", "/b");
  EXPECT_EQ(m.exclude, (std::vector<int>{12, 15}));
  EXPECT_EQ(m.seed, 7u);
  EXPECT_EQ(m.samples, 100000u);
  EXPECT_EQ(m.objects[0].up_axis, UpAxis::kPosZ);
  EXPECT_EQ(m.objects[0].difficulty, Difficulty::kEasy);
}

TEST(Manifest, Errors) {
  EXPECT_THROW(parse_manifest(R"({"objects": [{"id": 1}, {"id": 1}]})", "/"), ManifestError);
  EXPECT_THROW(parse_manifest(R"({"objects": [{"label": "x"}]})", "/"), ManifestError);
  EXPECT_THROW(parse_manifest(R"({"objects": [{"id": 1, "difficulty": "extreme"}]})", "/"),
               ManifestError);
  EXPECT_THROW(parse_manifest(R"({"objects": [{"id": "one"}]})", "/"), ManifestError);
  EXPECT_THROW(parse_manifest(R"({"objects": [)", "/"), ParseError);
}

TEST(UpAxis, RotatesOntoZ) {
  const std::pair<UpAxis, Vec3> axes[] = {
      {UpAxis::kPosX, Vec3::UnitX()},  {UpAxis::kNegX, -Vec3::UnitX()},
      {UpAxis::kPosY, Vec3::UnitY()},  {UpAxis::kNegY, -Vec3::UnitY()},
      {UpAxis::kPosZ, Vec3::UnitZ()},  {UpAxis::kNegZ, -Vec3::UnitZ()}};
  for (const auto& [axis, v] : axes) {
    const Mat3 r = up_axis_rotation(axis);
    EXPECT_LE((r * v - Vec3::UnitZ()).norm(), 1e-15) << to_string(axis);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-15);
  }
}

TEST(Phase1, PublishedPerObjectErrors) {
  DatasetManifest m;
  m.exclude.clear();
  for (const Row& r : kTable8) m.objects.push_back(volume_entry(r.id, r.pred, r.gt));
  const EvaluationReport rep = run_phase1(m);
  int matched = 0;
  for (std::size_t i = 0; i < kTable8.size(); ++i) {
    ASSERT_TRUE(rep.objects[i].ape_pct);
    if (std::abs(*rep.objects[i].ape_pct - kTable8[i].printed) <= 0.01) ++matched;
  }
  EXPECT_EQ(matched, 17);
  // The last row's printed error does not follow from its own volumes.
  EXPECT_NEAR(*rep.objects.back().ape_pct, 2.00, 0.01);
  EXPECT_EQ(rep.aggregate.n, 18u);
  EXPECT_TRUE(validate_report(rep).empty());
}

TEST(Phase1, PerfectPredictionsGiveZero) {
  DatasetManifest m;
  for (int id = 1; id <= 5; ++id) m.objects.push_back(volume_entry(id, 10.0 * id, 10.0 * id));
  const EvaluationReport rep = run_phase1(m);
  EXPECT_EQ(rep.aggregate.mape_pct, 0.0);
  EXPECT_EQ(rep.aggregate.n, 5u);
}

TEST(Phase1, MissingObjectLeftOutWithWarning) {
  DatasetManifest m;
  m.objects.push_back(volume_entry(1, 110, 100));
  m.objects.push_back(volume_entry(2, 90, 100));
  ObjectEntry missing;
  missing.id = 3;
  missing.gt_volume_cm3 = 50;
  missing.pred_mesh_path = "/nonexistent/pred.obj";
  m.objects.push_back(missing);
  const EvaluationReport rep = run_phase1(m);
  EXPECT_EQ(rep.aggregate.n, 2u);
  EXPECT_NEAR(*rep.aggregate.mape_pct, 10.0, 1e-12);
  EXPECT_TRUE(rep.objects[2].error);
  ASSERT_FALSE(rep.warnings.empty());
  EXPECT_NE(rep.warnings.back().find("object 3"), std::string::npos);
}

TEST(Phase1, ExclusionsHonored) {
  DatasetManifest m;
  m.objects.push_back(volume_entry(1, 110, 100));
  m.objects.push_back(volume_entry(12, 500, 100));
  m.objects.push_back(volume_entry(15, 1, 100));
  const EvaluationReport rep = run_phase1(m);
  EXPECT_EQ(rep.aggregate.n, 1u);
  EXPECT_NEAR(*rep.aggregate.mape_pct, 10.0, 1e-12);
  EXPECT_TRUE(rep.objects[1].excluded);
  EXPECT_TRUE(rep.objects[1].ape_pct);
}

TEST(Phase1, MeshVolumesUsedWhenNoNumbers) {
  TempDir dir;
  save_mesh(fixtures::cube(0.05), dir / "pred.ply");
  save_mesh(fixtures::cube(0.05), dir / "gt.obj");
  ObjectEntry e;
  e.id = 1;
  e.pred_mesh_path = dir / "pred.ply";
  e.gt_mesh_path = dir / "gt.obj";
  DatasetManifest m;
  m.objects = {e};
  const EvaluationReport rep = run_phase1(m);
  EXPECT_NEAR(*rep.objects[0].pred_volume_cm3, 125.0, 1e-9);
  EXPECT_EQ(rep.objects[0].pred_watertight, true);
}

TEST(Phase2, IdenticalMeshesGiveIdentity) {
  TempDir dir;
  save_mesh(lumpy(1), dir / "a.ply");
  ObjectEntry e;
  e.id = 1;
  e.pred_mesh_path = dir / "a.ply";
  e.gt_mesh_path = dir / "a.ply";
  DatasetManifest m;
  m.objects = {e};
  const EvaluationReport rep = run_phase2(m, {.out_dir = dir / "out", .samples = 2000, .seed = {}, .align = {}, .jobs = 1});
  ASSERT_FALSE(rep.objects[0].error) << *rep.objects[0].error;
  EXPECT_EQ(*rep.objects[0].chamfer_final, 0.0);
  EXPECT_EQ(*rep.objects[0].transform_path, "1/transform.txt");
  const auto t = align::read_transform(dir / "out" / "1" / "transform.txt");
  EXPECT_LE((t.matrix() - Mat4::Identity()).norm(), 1e-9);
  EXPECT_EQ(*rep.objects[0].seed, 7u);
}

TEST(Phase2, ChamferSumIsSumOfIndependentRuns) {
  TempDir dir;
  std::mt19937_64 rng(3);
  DatasetManifest m;
  m.samples = 3000;
  std::vector<double> independent;
  for (int id = 1; id <= 3; ++id) {
    const TriangleMesh gt = lumpy(static_cast<std::uint64_t>(id));
    const TriangleMesh pred = apply_transform(gt, fixtures::random_rigid(rng, 0.1, 0.02));
    const std::string p = "pred" + std::to_string(id) + ".ply";
    const std::string g = "gt" + std::to_string(id) + ".ply";
    save_mesh(pred, dir / p);
    save_mesh(gt, dir / g);
    ObjectEntry e;
    e.id = id;
    e.pred_mesh_path = dir / p;
    e.gt_mesh_path = dir / g;
    m.objects.push_back(e);
    independent.push_back(
        align::align_pipeline(load_mesh(dir / p), load_mesh(dir / g), 3000, 7).chamfer_final);
  }
  const EvaluationReport rep = run_phase2(m, {.out_dir = dir / "out", .samples = {}, .seed = {}, .align = {}, .jobs = 3});
  EXPECT_EQ(*rep.aggregate.chamfer_sum, independent[0] + independent[1] + independent[2]);
  EXPECT_NEAR(*rep.aggregate.chamfer_mean, *rep.aggregate.chamfer_sum / 3.0, 1e-12);
  EXPECT_GE(*rep.aggregate.chamfer_sum_without_transform, *rep.aggregate.chamfer_sum);
  EXPECT_TRUE(validate_report(rep).empty());
}

TEST(Report, JsonRoundTripAndValidation) {
  DatasetManifest m;
  for (const Row& r : kTable8) m.objects.push_back(volume_entry(r.id, r.pred, r.gt));
  EvaluationReport rep = run_phase1(m);
  const std::string text = to_json(rep);
  const EvaluationReport back = report_from_json(text);
  EXPECT_EQ(to_json(back), text);
  EXPECT_EQ(back.schema_version, kReportSchemaVersion);
  EXPECT_TRUE(validate_report(back).empty());

  EvaluationReport tampered = back;
  *tampered.aggregate.mape_pct += 0.5;
  EXPECT_FALSE(validate_report(tampered).empty());
  tampered = back;
  *tampered.objects[0].ape_pct = 1.0;
  EXPECT_FALSE(validate_report(tampered).empty());
  tampered = back;
  tampered.aggregate.n = 3;
  EXPECT_FALSE(validate_report(tampered).empty());
}

TEST(Report, MeanIsSumOverN) {
  // Aggregate layout of the published alignment table: sum 0.130 over 18.
  EvaluationReport rep;
  for (int i = 0; i < 18; ++i) {
    ObjectReport o;
    o.id = i + 1;
    o.pred_volume_cm3 = o.gt_volume_cm3 = 1.0;
    o.ape_pct = 0.0;
    o.chamfer_before = o.chamfer_after_icp = o.chamfer_final = 0.130 / 18;
    rep.objects.push_back(o);
  }
  rep.objects[11].excluded = true;  // not aggregated
  compute_aggregate(rep);
  EXPECT_EQ(rep.aggregate.n, 17u);
  rep.objects[11].excluded = false;
  compute_aggregate(rep);
  EXPECT_NEAR(*rep.aggregate.chamfer_sum, 0.130, 1e-12);
  EXPECT_NEAR(*rep.aggregate.chamfer_mean, 0.007, 0.0005);
  EXPECT_EQ(*rep.aggregate.chamfer_mean, *rep.aggregate.chamfer_sum / 18.0);
}

TEST(Report, AtomicWrite) {
  TempDir dir;
  write_file_atomic(dir / "sub" / "x.json", "one");
  write_file_atomic(dir / "sub" / "x.json", "two");
  EXPECT_EQ(read_file(dir / "sub" / "x.json"), "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "sub")) ++files;
  EXPECT_EQ(files, 1u);
}

TEST(ListFrames, SortedWithSiblings) {
  TempDir dir;
  write_depth_frame(dir.path(), 10);
  write_depth_frame(dir.path(), 2);
  std::ofstream(dir / "rgb" / "notes.png") << "x";
  fs::remove(dir / "depth" / "2.png");
  const auto frames = list_frames(dir.path());
  ASSERT_EQ(frames.size(), 2u);
  EXPECT_EQ(frames[0].index, 2);
  EXPECT_FALSE(frames[0].depth);
  EXPECT_TRUE(frames[1].depth);
  EXPECT_TRUE(list_frames(dir / "missing").empty());
}

TEST(RunFull, DepthFallbackWithoutBundle) {
  TempDir dir;
  write_depth_frame(dir / "frames", 0);
  save_mesh(fixtures::cube(1.0, Vec3(0, 0, 0.5)), dir / "pred.ply");
  ObjectEntry e;
  e.id = 5;
  e.difficulty = Difficulty::kHard;
  e.frames_dir = dir / "frames";
  e.pred_mesh_path = dir / "pred.ply";
  e.reference_width_cm = 5.0;
  e.gt_volume_cm3 = 20.0;
  DatasetManifest m;
  m.objects = {e};
  const EvaluationReport rep = run_full(m, quiet_config(dir / "out"));
  const ObjectReport& o = rep.objects[0];
  ASSERT_FALSE(o.error) << *o.error;
  EXPECT_EQ(o.scale_method, "depth_bbox");
  EXPECT_NEAR(*o.pred_volume_cm3, 18.0, 1e-6);
  EXPECT_NEAR(*o.ape_pct, 10.0, 1e-5);
  const bool logged = std::any_of(o.log.begin(), o.log.end(), [](const std::string& s) {
    return s.find("auto-selected") != std::string::npos;
  });
  EXPECT_TRUE(logged);
  for (const char* f : {"keyframes.json", "refined.ply", "scale.json", "depth_check.json",
                        "pred_scaled.ply", "volume.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / "5" / f)) << f;
  }
  const auto check = nlohmann::json::parse(read_file(dir / "out" / "5" / "depth_check.json"));
  EXPECT_NEAR(check["potential_volume"].get<double>(), 18.0, 1e-9);
}

TEST(RunFull, PrecomputedScaleSkipsStage) {
  TempDir dir;
  save_mesh(fixtures::cube(1.0), dir / "pred.ply");
  std::ofstream(dir / "scale.json") << R"({"scale": 0.05, "method": "block"})";
  ObjectEntry e;
  e.id = 2;
  e.pred_mesh_path = dir / "pred.ply";
  e.scale_json = dir / "scale.json";
  e.gt_volume_cm3 = 125.0;
  DatasetManifest m;
  m.objects = {e};
  const EvaluationReport rep = run_full(m, quiet_config(dir / "out"));
  const ObjectReport& o = rep.objects[0];
  ASSERT_FALSE(o.error) << *o.error;
  EXPECT_EQ(o.scale, 0.05);
  EXPECT_NEAR(*o.pred_volume_cm3, 125.0, 1e-9);
  const bool logged = std::any_of(o.log.begin(), o.log.end(), [](const std::string& s) {
    return s.find("stage skipped") != std::string::npos && s.rfind("scale", 0) == 0;
  });
  EXPECT_TRUE(logged);
}

TEST(RunFull, CornerProjectionFromBundle) {
  TempDir dir;
  auto scene = fixtures::checkerboard_scene(1.0);
  sfmio::SfmBundle bundle;
  bundle.cloud = scene.bundle.cloud;
  fs::create_directories(dir / "frames" / "rgb");
  for (std::size_t k = 0; k < scene.images.size(); ++k) {
    const std::string name = std::to_string(k) + ".png";
    bundle.cameras.emplace(name, scene.bundle.cameras.at(scene.images[k].name));
    save_png(to_rgb(scene.images[k].image), dir / "frames" / "rgb" / name);
  }
  sfmio::write_bundle(bundle, dir / "bundle");
  const TriangleMesh gt = fixtures::cube(0.05, Vec3(0, 0, 0.025));
  save_mesh(gt, dir / "gt.ply");
  save_mesh(apply_transform(gt, RigidTransform::from_translation(Vec3(0.01, 0, 0))), dir / "pred.ply");
  ObjectEntry e;
  e.id = 1;
  e.frames_dir = dir / "frames";
  e.bundle_dir = dir / "bundle";
  e.pred_mesh_path = dir / "pred.ply";
  e.gt_mesh_path = dir / "gt.ply";
  DatasetManifest m;
  m.objects = {e};
  const EvaluationReport rep = run_full(m, quiet_config(dir / "out"));
  const ObjectReport& o = rep.objects[0];
  ASSERT_FALSE(o.error) << *o.error;
  EXPECT_EQ(o.scale_method, "corner_projection");
  EXPECT_NEAR(*o.scale, 1.0, 0.005);
  EXPECT_NEAR(*o.ape_pct, 0.0, 2.0);
  EXPECT_LE(*o.chamfer_final, *o.chamfer_before);
  EXPECT_TRUE(fs::exists(dir / "out" / "1" / "transform.txt"));
}

TEST(RunFull, RerunIsByteIdentical) {
  TempDir dir;
  write_depth_frame(dir / "frames", 0);
  write_depth_frame(dir / "frames", 1);
  save_mesh(lumpy(4), dir / "pred.ply");
  save_mesh(lumpy(5), dir / "gt.ply");
  DatasetManifest m;
  for (int id = 1; id <= 3; ++id) {
    ObjectEntry e;
    e.id = id;
    e.frames_dir = dir / "frames";
    e.pred_mesh_path = dir / "pred.ply";
    e.gt_mesh_path = dir / "gt.ply";
    e.reference_width_cm = 5.0;
    e.block_lengths = {0.1 * id};
    m.objects.push_back(e);
  }
  RunConfig a = quiet_config(dir / "a");
  a.jobs = 3;
  RunConfig b = quiet_config(dir / "b");
  b.jobs = 1;
  const std::string ra = to_json(run_full(m, a));
  const std::string rb = to_json(run_full(m, b));
  EXPECT_EQ(ra, rb);
  EXPECT_EQ(json_outputs(dir / "a"), json_outputs(dir / "b"));
  EXPECT_TRUE(validate_report(report_from_json(ra)).empty());
}

TEST(RunFull, FailingObjectDoesNotStopOthers) {
  TempDir dir;
  save_mesh(fixtures::cube(1.0), dir / "pred.ply");
  DatasetManifest m;
  ObjectEntry bad;
  bad.id = 1;
  bad.pred_mesh_path = dir / "missing.ply";
  bad.gt_volume_cm3 = 1.0;
  ObjectEntry good;
  good.id = 2;
  good.pred_mesh_path = dir / "pred.ply";
  good.block_lengths = {1.0};
  good.gt_volume_cm3 = 1.0;
  m.objects = {bad, good};
  const EvaluationReport rep = run_full(m, quiet_config(dir / "out"));
  EXPECT_TRUE(rep.objects[0].error);
  EXPECT_FALSE(rep.objects[1].error);
  EXPECT_EQ(rep.aggregate.n, 1u);
}
