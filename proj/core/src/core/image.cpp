#include "foodmet/core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>

namespace foodmet {

GrayImage to_gray(const RgbImage& rgb) {
  GrayImage gray(rgb.width(), rgb.height());
  auto src = rgb.data();
  auto dst = gray.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double y = 0.299 * src[i][0] + 0.587 * src[i][1] + 0.114 * src[i][2];
    dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return gray;
}

std::optional<PixelBox> foreground_bounds(const BinaryMask& mask) {
  std::optional<PixelBox> box;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      if (!box) {
        box = PixelBox{x, y, x, y};
      } else {
        box->x0 = std::min(box->x0, x);
        box->x1 = std::max(box->x1, x);
        box->y0 = std::min(box->y0, y);
        box->y1 = std::max(box->y1, y);
      }
    }
  }
  return box;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decoded PNG with samples widened to 16 bits.
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint16_t> samples;

  std::uint16_t sample(std::size_t pixel, int channel) const {
    return samples[pixel * static_cast<std::size_t>(channels) +
                   static_cast<std::size_t>(channel)];
  }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  // Scales any bit depth to 8 bits.
  std::uint8_t sample8(std::size_t pixel, int channel) const {
    const auto v = sample(pixel, channel);
    return bit_depth == 16 ? static_cast<std::uint8_t>(v >> 8)
                           : static_cast<std::uint8_t>(v);
  }
};

DecodedPng decode_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());

  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 ||
      png_sig_cmp(signature, 0, 8) != 0) {
    throw ParseError("not a PNG file: " + path.string(), 0,
                     ParseError::Unit::kByte);
  }

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }

  DecodedPng out;
  volatile bool failed = false;
  if (setjmp(png_jmpbuf(png))) {
    failed = true;
  } else {
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_PACKING,
                 nullptr);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    png_bytepp rows = png_get_rows(png, info);

    const std::size_t row_samples =
        static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.channels);
    out.samples.resize(row_samples * static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) {
      const png_bytep row = rows[y];
      auto* dst = out.samples.data() + static_cast<std::size_t>(y) * row_samples;
      for (std::size_t i = 0; i < row_samples; ++i) {
        dst[i] = out.bit_depth == 16
                     ? static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1])
                     : row[i];
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (failed) {
    throw ParseError("corrupt PNG data in " + path.string(), 0,
                     ParseError::Unit::kByte);
  }
  return out;
}

void encode_png(const std::filesystem::path& path, int width, int height,
                int color_type, int bit_depth,
                const std::vector<png_byte>& bytes) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }

  const volatile std::size_t stride = height > 0 ? bytes.size() / static_cast<std::size_t>(height) : 0;
  volatile bool failed = false;
  if (setjmp(png_jmpbuf(png))) {
    failed = true;
  } else {
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width),
                 static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
      png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * stride);
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  if (failed) throw IoError("failed writing PNG " + path.string());
}

void require_nonempty(const DecodedPng& png, const std::filesystem::path& path) {
  if (png.width <= 0 || png.height <= 0) {
    throw StructuralError("empty image: " + path.string());
  }
}

}  // namespace

GrayImage load_gray_png(const std::filesystem::path& path) {
  const DecodedPng png = decode_png(path);
  require_nonempty(png, path);
  if (png.channels >= 3) {
    RgbImage rgb(png.width, png.height);
    auto dst = rgb.data();
    for (std::size_t i = 0; i < png.pixel_count(); ++i) {
      dst[i] = {png.sample8(i, 0), png.sample8(i, 1), png.sample8(i, 2)};
    }
    return to_gray(rgb);
  }
  GrayImage gray(png.width, png.height);
  auto dst = gray.data();
  for (std::size_t i = 0; i < png.pixel_count(); ++i) dst[i] = png.sample8(i, 0);
  return gray;
}

RgbImage load_rgb_png(const std::filesystem::path& path) {
  const DecodedPng png = decode_png(path);
  require_nonempty(png, path);
  RgbImage rgb(png.width, png.height);
  auto dst = rgb.data();
  for (std::size_t i = 0; i < png.pixel_count(); ++i) {
    if (png.channels >= 3) {
      dst[i] = {png.sample8(i, 0), png.sample8(i, 1), png.sample8(i, 2)};
    } else {
      const auto g = png.sample8(i, 0);
      dst[i] = {g, g, g};
    }
  }
  return rgb;
}

DepthMap load_depth_png(const std::filesystem::path& path) {
  const DecodedPng png = decode_png(path);
  require_nonempty(png, path);
  if (png.channels != 1) {
    throw StructuralError("depth PNG must be single channel: " + path.string());
  }
  DepthMap depth(png.width, png.height);
  auto dst = depth.data();
  for (std::size_t i = 0; i < png.pixel_count(); ++i) {
    dst[i] = static_cast<double>(png.sample(i, 0)) / 1000.0;
  }
  return depth;
}

BinaryMask load_mask_png(const std::filesystem::path& path) {
  const DecodedPng png = decode_png(path);
  require_nonempty(png, path);
  const int color_channels = png.channels >= 3 ? 3 : 1;
  BinaryMask mask(png.width, png.height);
  auto dst = mask.data();
  for (std::size_t i = 0; i < png.pixel_count(); ++i) {
    bool on = false;
    for (int c = 0; c < color_channels; ++c) on = on || png.sample(i, c) != 0;
    dst[i] = on ? 1 : 0;
  }
  return mask;
}

void save_png(const GrayImage& image, const std::filesystem::path& path) {
  std::vector<png_byte> bytes(image.data().begin(), image.data().end());
  encode_png(path, image.width(), image.height(), PNG_COLOR_TYPE_GRAY, 8, bytes);
}

void save_png(const RgbImage& image, const std::filesystem::path& path) {
  std::vector<png_byte> bytes;
  bytes.reserve(image.size() * 3);
  for (const Rgb8& p : image.data()) bytes.insert(bytes.end(), p.begin(), p.end());
  encode_png(path, image.width(), image.height(), PNG_COLOR_TYPE_RGB, 8, bytes);
}

void save_png(const DepthMap& depth, const std::filesystem::path& path) {
  std::vector<png_byte> bytes;
  bytes.reserve(depth.size() * 2);
  for (double meters : depth.data()) {
    const auto mm = static_cast<std::uint16_t>(
        std::clamp(std::lround(meters * 1000.0), 0L, 65535L));
    bytes.push_back(static_cast<png_byte>(mm >> 8));
    bytes.push_back(static_cast<png_byte>(mm & 0xff));
  }
  encode_png(path, depth.width(), depth.height(), PNG_COLOR_TYPE_GRAY, 16, bytes);
}

void save_png(const BinaryMask& mask, const std::filesystem::path& path) {
  std::vector<png_byte> bytes;
  bytes.reserve(mask.size());
  for (auto v : mask.data()) bytes.push_back(v ? 255 : 0);
  encode_png(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 8, bytes);
}

}  // namespace foodmet
