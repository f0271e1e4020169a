#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "foodmet/core/image.hpp"

namespace foodmet::frames {

/// One capture instant. Rasters that are present share one size.
struct FrameRecord {
  int index = 0;
  RgbImage rgb;
  DepthMap depth;
  BinaryMask food_mask;
  std::optional<BinaryMask> reference_mask;

  /// Throws StructuralError when non-empty rasters disagree in size.
  void validate() const;
};

using Hash64 = std::uint64_t;

/// DCT perceptual hash. The image is box-resampled to 32x32, transformed
/// with a 2D DCT-II, and the 8x8 block of coefficients at rows/cols 1..8
/// (the lowest AC frequencies, DC row and column skipped) is compared with
/// its median. Bit (8*row + col) is set when that coefficient is above the
/// median.
Hash64 perceptual_hash(const GrayImage& image);

int hamming(Hash64 a, Hash64 b);

/// Mean of log(1 + |F|) over the centered spectrum with the central
/// (2r+1)^2 low-frequency window removed. Higher means sharper. `radius`
/// must be even and at most min(width, height) / 2.
double blur_score(const GrayImage& image, int radius);

/// blur_score for several radii sharing one FFT.
std::vector<double> blur_scores(const GrayImage& image, std::span<const int> radii);

enum class Decision { kKept, kDuplicate, kBlurry };

struct FrameDecision {
  int index = 0;
  Decision decision = Decision::kKept;
  /// Kept frame that this one duplicates (kDuplicate only).
  std::optional<int> duplicate_of;
  int hamming_distance = -1;
  double blur = 0.0;
  Hash64 hash = 0;
};

struct KeyframeSet {
  std::vector<int> selected_indices;
  /// One entry per input frame, in scan order.
  std::vector<FrameDecision> log;
};

struct KeyframeOptions {
  /// A frame is a duplicate when its hash is within this distance of a kept
  /// frame. Negative disables the duplicate test.
  int hash_threshold = 12;
  std::vector<int> blur_radii = {0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30};
  double blur_threshold = 10.0;
};

/// Greedy scan in ascending frame index. Each frame is compared only with
/// frames already kept; the first kept frame within the threshold is the
/// witness. Non-duplicates whose mean blur score over `blur_radii` falls
/// below `blur_threshold` are rejected as blurry.
KeyframeSet select_keyframes(std::span<const FrameRecord> frames,
                             const KeyframeOptions& options = {});

/// Same selection from grayscale images with explicit indices.
KeyframeSet select_keyframes(std::span<const GrayImage> images,
                             std::span<const int> indices,
                             const KeyframeOptions& options = {});

std::string to_string(Decision d);

}  // namespace foodmet::frames
