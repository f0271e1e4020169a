#include <benchmark/benchmark.h>

#include <numbers>
#include <random>

#include "foodmet/align/align.hpp"
#include "synthetic.hpp"

using namespace foodmet;

namespace {

void BM_Icp(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const TriangleMesh gt = fixtures::icosphere(3, 0.05);
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud dst = sample_surface(gt, n, 1);
  const RigidTransform motion = fixtures::random_rigid(rng, 5.0 * std::numbers::pi / 180, 0.005);
  const PointCloud src = apply_transform(sample_surface(gt, n, 2), motion);
  for (auto _ : state) {
    benchmark::DoNotOptimize(align::icp(src, dst, RigidTransform::identity()).iterations);
  }
}
BENCHMARK(BM_Icp)->Arg(5000)->Arg(50000)->Unit(benchmark::kMillisecond);

void BM_AlignPipeline(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const TriangleMesh gt = fixtures::random_blob(rng);
  const RigidTransform motion = fixtures::random_rigid(rng, 10.0 * std::numbers::pi / 180, 0.05);
  const TriangleMesh pred = apply_transform(gt, motion);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(align::align_pipeline(pred, gt, n, 7).chamfer_final);
  }
}
BENCHMARK(BM_AlignPipeline)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
