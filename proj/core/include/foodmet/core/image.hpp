#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "foodmet/core/error.hpp"
#include "foodmet/core/geometry.hpp"

namespace foodmet {

/// Row-major raster. `Tag` keeps rasters with the same sample type (gray
/// images and masks) from converting into each other.
template <typename T, typename Tag>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_size(width, height)) {
      throw StructuralError("raster sample count does not match width*height");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  static std::size_t checked_size(int width, int height) {
    if (width < 0 || height < 0) throw ParameterError("negative raster size");
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct GrayTag {};
struct RgbTag {};
struct DepthTag {};
struct MaskTag {};

using GrayImage = Raster<std::uint8_t, GrayTag>;
using RgbImage = Raster<Rgb8, RgbTag>;
/// Depth in meters; 0 means no reading.
using DepthMap = Raster<double, DepthTag>;
/// Nonzero sample = foreground.
using BinaryMask = Raster<std::uint8_t, MaskTag>;

/// ITU-R BT.601 luma, rounded to nearest.
GrayImage to_gray(const RgbImage& rgb);

/// Inclusive pixel bounds of the foreground; nullopt for an empty mask.
struct PixelBox {
  int x0, y0, x1, y1;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
};
std::optional<PixelBox> foreground_bounds(const BinaryMask& mask);

GrayImage load_gray_png(const std::filesystem::path& path);
RgbImage load_rgb_png(const std::filesystem::path& path);
/// Reads a 16-bit single channel PNG in millimeters.
DepthMap load_depth_png(const std::filesystem::path& path);
BinaryMask load_mask_png(const std::filesystem::path& path);

void save_png(const GrayImage& image, const std::filesystem::path& path);
void save_png(const RgbImage& image, const std::filesystem::path& path);
/// Writes millimeters, rounded, clamped to the 16-bit range.
void save_png(const DepthMap& depth, const std::filesystem::path& path);
void save_png(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace foodmet
