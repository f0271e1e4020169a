#include <benchmark/benchmark.h>

#include <limits>
#include <random>

#include "foodmet/core/kdtree.hpp"
#include "foodmet/metrics/metrics.hpp"
#include "synthetic.hpp"

using namespace foodmet;

namespace {

double brute_chamfer(const PointCloud& x, const PointCloud& y) {
  auto directed = [](const PointCloud& a, const PointCloud& b) {
    double sum = 0.0;
    for (const Vec3& p : a.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& q : b.points) best = std::min(best, (p - q).squaredNorm());
      sum += best;
    }
    return sum / static_cast<double>(a.size());
  };
  return directed(x, y) + directed(y, x);
}

void BM_ChamferKdTree(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud x = fixtures::random_cloud(rng, n);
  const PointCloud y = fixtures::random_cloud(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::chamfer(x, y).value);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ChamferKdTree)->RangeMultiplier(4)->Range(256, 65536)->Complexity();

void BM_ChamferBruteForce(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointCloud x = fixtures::random_cloud(rng, n);
  const PointCloud y = fixtures::random_cloud(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(brute_chamfer(x, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ChamferBruteForce)->RangeMultiplier(4)->Range(256, 4096)->Complexity();

void BM_KdTreeBuild(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const PointCloud c = fixtures::random_cloud(rng, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    KdTree tree(c.points);
    benchmark::DoNotOptimize(tree.size());
  }
}
BENCHMARK(BM_KdTreeBuild)->Arg(10000)->Arg(100000);

void BM_SampleSurface(benchmark::State& state) {
  const TriangleMesh m = fixtures::icosphere(4, 0.05);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_surface(m, n, 7).points.data());
}
BENCHMARK(BM_SampleSurface)->Arg(10000)->Arg(100000);

void BM_MeshVolume(benchmark::State& state) {
  const TriangleMesh m = fixtures::icosphere(static_cast<int>(state.range(0)), 0.05);
  for (auto _ : state) benchmark::DoNotOptimize(metrics::mesh_volume(m).volume_cm3);
}
BENCHMARK(BM_MeshVolume)->Arg(3)->Arg(5);

}  // namespace
