#include <benchmark/benchmark.h>

#include <random>

#include "foodmet/frames/keyframes.hpp"

using namespace foodmet;

namespace {

GrayImage noise(int w, int h) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> u(0, 255);
  GrayImage img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(u(rng));
  return img;
}

void BM_PerceptualHash(benchmark::State& state) {
  const GrayImage img = noise(640, 480);
  for (auto _ : state) benchmark::DoNotOptimize(frames::perceptual_hash(img));
}
BENCHMARK(BM_PerceptualHash);

void BM_BlurScoresSweep(benchmark::State& state) {
  const GrayImage img = noise(640, 480);
  const frames::KeyframeOptions opt;
  for (auto _ : state) benchmark::DoNotOptimize(frames::blur_scores(img, opt.blur_radii).data());
}
BENCHMARK(BM_BlurScoresSweep)->Unit(benchmark::kMillisecond);

}  // namespace
