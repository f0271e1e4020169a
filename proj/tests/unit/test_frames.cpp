#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "foodmet/frames/keyframes.hpp"

using namespace foodmet;
using namespace foodmet::frames;

namespace {

GrayImage gradient(int w, int h) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y) = static_cast<std::uint8_t>((x * 3 + y * 2 + (x * y) % 17) % 256);
    }
  }
  return img;
}

GrayImage shift_right(const GrayImage& img) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.at(x, y) = img.at(std::max(0, x - 1), y);
  }
  return out;
}

GrayImage noise(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> u(0, 255);
  GrayImage img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(u(rng));
  return img;
}

GrayImage checkerboard(int size, int cell) {
  GrayImage img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) img.at(x, y) = ((x / cell + y / cell) % 2) ? 255 : 0;
  }
  return img;
}

// Separable Gaussian with clamped borders, radius 3 sigma.
GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * r + 1);
  for (int i = -r; i <= r; ++i) k[i + r] = std::exp(-i * i / (2 * sigma * sigma));
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  for (double& v : k) v /= sum;
  const int w = img.width();
  const int h = img.height();
  std::vector<double> tmp(static_cast<std::size_t>(w * h));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(std::clamp(x + i, 0, w - 1), y);
      tmp[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -r; i <= r; ++i) {
        acc += k[i + r] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, h - 1) * w + x)];
      }
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(acc));
    }
  }
  return out;
}

}  // namespace

TEST(Hamming, DirectCounts) {
  const Hash64 h = 0x0123456789abcdefULL;
  EXPECT_EQ(hamming(h, h), 0);
  EXPECT_EQ(hamming(h, ~h), 64);
  EXPECT_EQ(hamming(0b1010, 0b0110), 2);
}

TEST(PerceptualHash, IdenticalImagesMatch) {
  const GrayImage g = gradient(64, 48);
  EXPECT_EQ(hamming(perceptual_hash(g), perceptual_hash(g)), 0);
}

TEST(PerceptualHash, OnePixelShiftIsClose) {
  const GrayImage g = gradient(64, 48);
  EXPECT_LE(hamming(perceptual_hash(g), perceptual_hash(shift_right(g))), 10);
}

TEST(PerceptualHash, IndependentNoiseIsFar) {
  std::mt19937_64 rng(101);
  int far = 0;
  for (int i = 0; i < 1000; ++i) {
    const GrayImage a = noise(rng, 32, 32);
    const GrayImage b = noise(rng, 32, 32);
    if (hamming(perceptual_hash(a), perceptual_hash(b)) >= 20) ++far;
  }
  EXPECT_GE(far, 990);
}

TEST(PerceptualHash, EmptyImageThrows) {
  EXPECT_THROW(perceptual_hash(GrayImage{}), ParameterError);
}

TEST(BlurScore, ConstantImageScoresZero) {
  const GrayImage g(64, 64, 77);
  for (int r : {0, 2, 10, 32}) EXPECT_NEAR(blur_score(g, r), 0.0, 1e-9) << r;
}

// Cell 10 does not tile 64 px, so the sharp board has broadband edge energy.
// A board that tiles exactly has a handful of nonzero bins and scores near 0.
TEST(BlurScore, SharpBeatsBlurred) {
  const GrayImage sharp = checkerboard(64, 10);
  const GrayImage soft = gaussian_blur(sharp, 3.0);
  for (int r : {0, 4, 8, 16}) EXPECT_GT(blur_score(sharp, r), blur_score(soft, r)) << r;
}

TEST(BlurScore, RadiusPreconditions) {
  const GrayImage g = checkerboard(64, 8);
  EXPECT_THROW(blur_score(g, 3), ParameterError);
  EXPECT_THROW(blur_score(g, -2), ParameterError);
  EXPECT_THROW(blur_score(g, 34), ParameterError);
}

TEST(BlurScore, InvariantToDcOffset) {
  std::mt19937_64 rng(5);
  GrayImage g = noise(rng, 40, 30);
  for (auto& v : g.data()) v = static_cast<std::uint8_t>(v / 2);
  GrayImage lifted = g;
  for (auto& v : lifted.data()) v = static_cast<std::uint8_t>(v + 60);
  for (int r : {0, 2, 8}) EXPECT_NEAR(blur_score(g, r), blur_score(lifted, r), 1e-9);
}

TEST(BlurScores, MatchSingleRadius) {
  const GrayImage g = gradient(48, 40);
  const std::vector<int> radii = {0, 2, 6, 20};
  const auto all = blur_scores(g, radii);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    EXPECT_DOUBLE_EQ(all[i], blur_score(g, radii[i]));
  }
}

TEST(SelectKeyframes, IdenticalFramesKeepOne) {
  const std::vector<GrayImage> imgs(5, checkerboard(64, 8));
  const std::vector<int> idx = {0, 1, 2, 3, 4};
  KeyframeOptions opt;
  opt.blur_threshold = 0.0;
  const KeyframeSet set = select_keyframes(imgs, idx, opt);
  EXPECT_EQ(set.selected_indices, std::vector<int>{0});
  ASSERT_EQ(set.log.size(), 5u);
  for (std::size_t i = 1; i < 5; ++i) {
    EXPECT_EQ(set.log[i].decision, Decision::kDuplicate);
    EXPECT_EQ(set.log[i].duplicate_of, 0);
  }
}

TEST(SelectKeyframes, DistinctSharpFramesAllKept) {
  std::mt19937_64 rng(77);
  std::vector<GrayImage> imgs;
  std::vector<int> idx;
  for (int i = 0; i < 200; ++i) {
    imgs.push_back(noise(rng, 32, 32));
    idx.push_back(i);
  }
  KeyframeOptions opt;
  opt.hash_threshold = -1;
  opt.blur_threshold = 0.0;
  opt.blur_radii = {0, 2, 4};
  EXPECT_EQ(select_keyframes(imgs, idx, opt).selected_indices.size(), 200u);
}

TEST(SelectKeyframes, BlurryFrameRejected) {
  const GrayImage sharp = checkerboard(64, 10);
  const GrayImage soft = gaussian_blur(checkerboard(64, 10), 3.0);
  const std::vector<GrayImage> imgs = {sharp, soft};
  const std::vector<int> idx = {0, 1};
  KeyframeOptions opt;
  opt.hash_threshold = -1;
  opt.blur_radii = {0, 2};
  const double s0 = blur_score(sharp, 0);
  const double s1 = blur_score(soft, 0);
  ASSERT_GT(s0, s1);
  opt.blur_threshold = 0.5 * ((s0 + blur_score(sharp, 2)) / 2 + (s1 + blur_score(soft, 2)) / 2);
  const KeyframeSet set = select_keyframes(imgs, idx, opt);
  EXPECT_EQ(set.selected_indices, std::vector<int>{0});
  EXPECT_EQ(set.log[1].decision, Decision::kBlurry);
}

TEST(SelectKeyframes, ScanIsByIndexAndWitnessesHold) {
  std::mt19937_64 rng(8);
  std::vector<GrayImage> base;
  for (int i = 0; i < 4; ++i) base.push_back(noise(rng, 32, 32));
  std::vector<GrayImage> imgs;
  std::vector<int> idx;
  for (int i = 0; i < 12; ++i) {
    imgs.push_back(base[static_cast<std::size_t>(i % 4)]);
    idx.push_back(100 - i);
  }
  KeyframeOptions opt;
  opt.blur_threshold = 0.0;
  opt.blur_radii = {0, 2, 4};
  const KeyframeSet set = select_keyframes(imgs, idx, opt);
  EXPECT_EQ(set.selected_indices.size(), 4u);
  EXPECT_TRUE(std::is_sorted(set.selected_indices.begin(), set.selected_indices.end()));
  for (const auto& d : set.log) {
    if (d.decision != Decision::kDuplicate) continue;
    ASSERT_TRUE(d.duplicate_of);
    const auto w = std::find_if(set.log.begin(), set.log.end(),
                                [&](const FrameDecision& k) { return k.index == *d.duplicate_of; });
    ASSERT_NE(w, set.log.end());
    EXPECT_EQ(w->decision, Decision::kKept);
    EXPECT_LE(hamming(w->hash, d.hash), opt.hash_threshold);
  }
}

TEST(SelectKeyframes, Errors) {
  EXPECT_THROW(select_keyframes(std::span<const GrayImage>{}, std::span<const int>{}),
               ParameterError);
  const std::vector<GrayImage> imgs(2, checkerboard(16, 4));
  const std::vector<int> dup = {3, 3};
  EXPECT_THROW(select_keyframes(imgs, dup), ParameterError);
}

TEST(FrameRecord, ValidateSizes) {
  FrameRecord f;
  f.rgb = RgbImage(4, 4);
  f.depth = DepthMap(4, 3);
  EXPECT_THROW(f.validate(), StructuralError);
  f.depth = DepthMap(4, 4);
  EXPECT_NO_THROW(f.validate());
}

TEST(FrameRecord, SelectionFromRecordsMatchesGray) {
  std::mt19937_64 rng(4);
  std::vector<FrameRecord> frames;
  std::vector<GrayImage> grays;
  std::vector<int> idx;
  for (int i = 0; i < 6; ++i) {
    FrameRecord f;
    f.index = i;
    f.rgb = RgbImage(32, 32);
    std::uniform_int_distribution<int> u(0, 255);
    for (auto& px : f.rgb.data()) {
      px = {static_cast<std::uint8_t>(u(rng)), static_cast<std::uint8_t>(u(rng)),
            static_cast<std::uint8_t>(u(rng))};
    }
    grays.push_back(to_gray(f.rgb));
    idx.push_back(i);
    frames.push_back(std::move(f));
  }
  KeyframeOptions opt;
  opt.blur_radii = {0, 2};
  const auto a = select_keyframes(frames, opt);
  const auto b = select_keyframes(grays, idx, opt);
  EXPECT_EQ(a.selected_indices, b.selected_indices);
}
