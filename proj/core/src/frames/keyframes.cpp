#include "foodmet/frames/keyframes.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

#include "foodmet/core/error.hpp"
#include "foodmet/core/parallel.hpp"

namespace foodmet::frames {

void FrameRecord::validate() const {
  const int w = rgb.width();
  const int h = rgb.height();
  auto same = [&](int ow, int oh, bool empty, const char* what) {
    if (!empty && (ow != w || oh != h)) {
      throw StructuralError(std::string("frame ") + std::to_string(index) + ": " +
                            what + " size differs from rgb");
    }
  };
  same(depth.width(), depth.height(), depth.empty(), "depth");
  same(food_mask.width(), food_mask.height(), food_mask.empty(), "food mask");
  if (reference_mask) {
    same(reference_mask->width(), reference_mask->height(),
         reference_mask->empty(), "reference mask");
  }
}

namespace {

constexpr int kHashSide = 32;

struct Tap {
  int source;
  double weight;
};

// Area-weighted taps: output i averages the source interval
// [i*n/m, (i+1)*n/m).
std::vector<std::vector<Tap>> box_taps(int n, int m) {
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(m));
  const double ratio = static_cast<double>(n) / m;
  for (int i = 0; i < m; ++i) {
    const double a = i * ratio;
    const double b = (i + 1) * ratio;
    const int first = static_cast<int>(std::floor(a));
    const int last = std::min(n - 1, static_cast<int>(std::ceil(b)) - 1);
    for (int s = first; s <= last; ++s) {
      const double w = std::min<double>(b, s + 1) - std::max<double>(a, s);
      if (w > 0) taps[static_cast<std::size_t>(i)].push_back({s, w / ratio});
    }
  }
  return taps;
}

// Returns a kHashSide x kHashSide row-major buffer.
std::vector<double> resample_to_hash_grid(const GrayImage& image) {
  const auto xt = box_taps(image.width(), kHashSide);
  const auto yt = box_taps(image.height(), kHashSide);
  std::vector<double> rows(static_cast<std::size_t>(image.height()) * kHashSide);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < kHashSide; ++x) {
      double acc = 0.0;
      for (const Tap& t : xt[static_cast<std::size_t>(x)]) acc += t.weight * image.at(t.source, y);
      rows[static_cast<std::size_t>(y) * kHashSide + static_cast<std::size_t>(x)] = acc;
    }
  }
  std::vector<double> grid(static_cast<std::size_t>(kHashSide) * kHashSide);
  for (int y = 0; y < kHashSide; ++y) {
    for (int x = 0; x < kHashSide; ++x) {
      double acc = 0.0;
      for (const Tap& t : yt[static_cast<std::size_t>(y)]) {
        acc += t.weight * rows[static_cast<std::size_t>(t.source) * kHashSide + static_cast<std::size_t>(x)];
      }
      grid[static_cast<std::size_t>(y) * kHashSide + static_cast<std::size_t>(x)] = acc;
    }
  }
  return grid;
}

const std::array<double, kHashSide * kHashSide>& dct_basis() {
  static const auto basis = [] {
    std::array<double, kHashSide * kHashSide> b{};
    for (int u = 0; u < kHashSide; ++u) {
      for (int x = 0; x < kHashSide; ++x) {
        b[static_cast<std::size_t>(u * kHashSide + x)] =
            std::cos(std::numbers::pi * (2 * x + 1) * u / (2.0 * kHashSide));
      }
    }
    return b;
  }();
  return basis;
}

}  // namespace

Hash64 perceptual_hash(const GrayImage& image) {
  if (image.empty()) throw ParameterError("perceptual_hash: empty image");
  const auto grid = resample_to_hash_grid(image);
  const auto& basis = dct_basis();

  // Only rows/cols 0..8 of the transform are needed.
  constexpr int kKeep = 9;
  std::array<double, kHashSide * kKeep> rows{};  // [y][u]
  for (int y = 0; y < kHashSide; ++y) {
    for (int u = 0; u < kKeep; ++u) {
      double acc = 0.0;
      for (int x = 0; x < kHashSide; ++x) {
        acc += basis[static_cast<std::size_t>(u * kHashSide + x)] *
               grid[static_cast<std::size_t>(y * kHashSide + x)];
      }
      rows[static_cast<std::size_t>(y * kKeep + u)] = acc;
    }
  }
  std::array<double, 64> block{};
  for (int v = 1; v < kKeep; ++v) {
    for (int u = 1; u < kKeep; ++u) {
      double acc = 0.0;
      for (int y = 0; y < kHashSide; ++y) {
        acc += basis[static_cast<std::size_t>(v * kHashSide + y)] *
               rows[static_cast<std::size_t>(y * kKeep + u)];
      }
      block[static_cast<std::size_t>((v - 1) * 8 + (u - 1))] = acc;
    }
  }

  auto sorted = block;
  std::sort(sorted.begin(), sorted.end());
  const double median = 0.5 * (sorted[31] + sorted[32]);
  Hash64 hash = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    if (block[i] > median) hash |= Hash64{1} << i;
  }
  return hash;
}

int hamming(Hash64 a, Hash64 b) { return std::popcount(a ^ b); }

namespace {

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// log(1 + |F|) in fftshift order (DC at (h/2, w/2)).
std::vector<double> centered_log_spectrum(const GrayImage& image) {
  const int w = image.width();
  const int h = image.height();
  const std::size_t n = image.size();
  std::unique_ptr<fftw_complex, FftwFree> in(fftw_alloc_complex(n));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n));
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(h, w, in.get(), out.get(), FFTW_FORWARD, FFTW_ESTIMATE);
  }
  auto px = image.data();
  for (std::size_t i = 0; i < n; ++i) {
    in.get()[i][0] = px[i];
    in.get()[i][1] = 0.0;
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  std::vector<double> spectrum(n);
  for (int ky = 0; ky < h; ++ky) {
    const int sy = (ky + h / 2) % h;
    for (int kx = 0; kx < w; ++kx) {
      const int sx = (kx + w / 2) % w;
      const auto& c = out.get()[static_cast<std::size_t>(ky) * static_cast<std::size_t>(w) +
                                static_cast<std::size_t>(kx)];
      spectrum[static_cast<std::size_t>(sy) * static_cast<std::size_t>(w) +
               static_cast<std::size_t>(sx)] = std::log1p(std::hypot(c[0], c[1]));
    }
  }
  return spectrum;
}

void check_radius(const GrayImage& image, int radius) {
  if (radius < 0) throw ParameterError("blur radius must be non-negative");
  if (radius % 2 != 0) {
    throw ParameterError("blur radius must be even, got " + std::to_string(radius));
  }
  if (radius > std::min(image.width(), image.height()) / 2) {
    throw ParameterError("blur radius " + std::to_string(radius) +
                         " exceeds half the image size");
  }
}

}  // namespace

std::vector<double> blur_scores(const GrayImage& image, std::span<const int> radii) {
  if (image.empty()) throw ParameterError("blur_score: empty image");
  for (int r : radii) check_radius(image, r);

  const int w = image.width();
  const int h = image.height();
  const auto spectrum = centered_log_spectrum(image);

  std::vector<double> scores;
  scores.reserve(radii.size());
  for (int r : radii) {
    const int y0 = std::max(0, h / 2 - r);
    const int y1 = std::min(h - 1, h / 2 + r);
    const int x0 = std::max(0, w / 2 - r);
    const int x1 = std::min(w - 1, w / 2 + r);
    // Summed directly (not total minus window) so the DC term never enters.
    double sum = 0.0;
    std::size_t count = 0;
    for (int y = 0; y < h; ++y) {
      const bool row_in = y >= y0 && y <= y1;
      for (int x = 0; x < w; ++x) {
        if (row_in && x >= x0 && x <= x1) continue;
        sum += spectrum[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                        static_cast<std::size_t>(x)];
        ++count;
      }
    }
    scores.push_back(count == 0 ? 0.0 : sum / static_cast<double>(count));
  }
  return scores;
}

double blur_score(const GrayImage& image, int radius) {
  const int radii[] = {radius};
  return blur_scores(image, radii).front();
}

KeyframeSet select_keyframes(std::span<const GrayImage> images,
                             std::span<const int> indices,
                             const KeyframeOptions& options) {
  if (images.empty()) throw ParameterError("select_keyframes: no frames");
  if (images.size() != indices.size()) {
    throw ParameterError("select_keyframes: image/index count mismatch");
  }
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return indices[a] < indices[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (indices[order[k]] == indices[order[k - 1]]) {
      throw ParameterError("select_keyframes: duplicate frame index " +
                           std::to_string(indices[order[k]]));
    }
  }

  // Per-frame features are independent.
  std::vector<Hash64> hashes(images.size());
  std::vector<double> blur(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    hashes[i] = perceptual_hash(images[i]);
    if (options.blur_radii.empty()) {
      blur[i] = 0.0;
    } else {
      const auto s = blur_scores(images[i], options.blur_radii);
      blur[i] = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    }
  });

  KeyframeSet result;
  std::vector<std::size_t> kept;
  for (std::size_t pos : order) {
    FrameDecision d;
    d.index = indices[pos];
    d.hash = hashes[pos];
    d.blur = blur[pos];
    if (options.hash_threshold >= 0) {
      for (std::size_t k : kept) {
        const int dist = hamming(hashes[pos], hashes[k]);
        if (dist <= options.hash_threshold) {
          d.decision = Decision::kDuplicate;
          d.duplicate_of = indices[k];
          d.hamming_distance = dist;
          break;
        }
      }
    }
    if (d.decision == Decision::kKept && blur[pos] < options.blur_threshold) {
      d.decision = Decision::kBlurry;
    }
    if (d.decision == Decision::kKept) {
      kept.push_back(pos);
      result.selected_indices.push_back(d.index);
    }
    result.log.push_back(d);
  }
  return result;
}

KeyframeSet select_keyframes(std::span<const FrameRecord> frames,
                             const KeyframeOptions& options) {
  if (frames.empty()) throw ParameterError("select_keyframes: no frames");
  std::vector<GrayImage> gray;
  std::vector<int> indices;
  gray.reserve(frames.size());
  for (const FrameRecord& f : frames) {
    f.validate();
    gray.push_back(to_gray(f.rgb));
    indices.push_back(f.index);
  }
  return select_keyframes(gray, indices, options);
}

std::string to_string(Decision d) {
  switch (d) {
    case Decision::kKept: return "kept";
    case Decision::kDuplicate: return "duplicate";
    case Decision::kBlurry: return "blurry";
  }
  return "unknown";
}

}  // namespace foodmet::frames
