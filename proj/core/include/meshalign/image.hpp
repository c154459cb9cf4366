#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "meshalign/error.hpp"

namespace meshalign {

/// Dense interleaved image, row 0 at the top.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, T fill = T{})
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {
    if (width < 0 || height < 0 || channels <= 0) {
      throw ConfigError("image dimensions must be non-negative with at least one channel");
    }
  }

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  // Pixel-major access: p = y * width + x.
  T* pixel(std::size_t p) { return data_.data() + p * channels_; }
  const T* pixel(std::size_t p) const { return data_.data() + p * channels_; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  [[nodiscard]] bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using ImageF = Image<float>;
using ImageD = Image<double>;

/// Square RGB albedo map in linear color. (0,0) is the top-left texel; UV v
/// grows upward so v = 1 maps to row 0.
class TextureImage {
 public:
  TextureImage() = default;
  explicit TextureImage(ImageF texels);

  static TextureImage constant(int size, float r, float g, float b);

  [[nodiscard]] int size() const { return texels_.width(); }
  [[nodiscard]] const ImageF& texels() const { return texels_; }
  // Mutable access for optimizers; callers must keep values finite.
  ImageF& mutable_texels() { return texels_; }

 private:
  ImageF texels_;
};

/// Binary 3-channel mask sharing the texture parametrization.
class MaskImage {
 public:
  MaskImage() = default;
  explicit MaskImage(ImageF texels);

  static MaskImage ones(int size);

  [[nodiscard]] int size() const { return texels_.width(); }
  [[nodiscard]] const ImageF& texels() const { return texels_; }
  // Nearest-texel lookup, returns 0 or 1.
  [[nodiscard]] float sample_nearest(double u, double v) const;

 private:
  ImageF texels_;
};

double srgb_to_linear(double c);
double linear_to_srgb(double c);

// PNG I/O. Color images are sRGB on disk and linear in memory; masks are
// stored verbatim (0/255) and thresholded at 0.5 on load.
ImageF read_png_linear(const std::filesystem::path& path);
/// sRGB-encoded PNG at 8 or 16 bits per sample.
void write_png_linear(const std::filesystem::path& path, const ImageF& image, int bit_depth = 8);
void write_png_linear(const std::filesystem::path& path, const ImageD& image, int bit_depth = 8);
TextureImage read_texture_png(const std::filesystem::path& path);
/// Textures are stored at 16 bits so smooth albedo survives the round trip.
void write_texture_png(const std::filesystem::path& path, const TextureImage& texture);
MaskImage read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const MaskImage& mask);

// Portable float map, little-endian, 1 or 3 channels.
void write_pfm(const std::filesystem::path& path, const ImageD& image);
void write_pfm(const std::filesystem::path& path, const ImageF& image);
ImageF read_pfm(const std::filesystem::path& path);

ImageD to_double(const ImageF& image);
ImageF to_float(const ImageD& image);

} // namespace meshalign
