#include "meshalign/image.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include <fmt/format.h>
#include <png.h>

namespace meshalign {

namespace {

void check_finite(const ImageF& img, const char* what) {
  for (float v : img.data()) {
    if (!std::isfinite(v)) {
      throw ConfigError(fmt::format("{}: texels must be finite", what));
    }
  }
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) {
      std::fclose(f);
    }
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngData {
  int width = 0;
  int height = 0;
  int channels = 0;
  int max_value = 255;
  std::vector<std::uint16_t> samples;
};

PngData read_png_data(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) {
    throw IoError(fmt::format("cannot open PNG '{}'", path.string()));
  }
  png_byte header[8];
  if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw ParseError(fmt::format("'{}' is not a PNG file", path.string()));
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  PngData out;
  std::vector<std::uint8_t> bytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(fmt::format("corrupt PNG '{}'", path.string()));
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = static_cast<int>(png_get_channels(png, info));
  const bool wide = png_get_bit_depth(png, info) == 16;
  out.max_value = wide ? 65535 : 255;
  const std::size_t stride = png_get_rowbytes(png, info);
  bytes.resize(stride * out.height);
  std::vector<png_bytep> rows(out.height);
  for (int y = 0; y < out.height; ++y) {
    rows[y] = bytes.data() + stride * y;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // 16-bit samples are big-endian.
    out.samples[i] = wide ? static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]) : bytes[i];
  }
  return out;
}

void write_png_data(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
                    const std::vector<std::uint16_t>& samples) {
  FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) {
    throw IoError(fmt::format("cannot write PNG '{}'", path.string()));
  }
  const std::size_t row_samples = static_cast<std::size_t>(width) * channels;
  std::vector<std::uint8_t> row(row_samples * (bit_depth / 8));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(fmt::format("failed writing PNG '{}'", path.string()));
  }
  png_init_io(png, file.get());
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, width, height, bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    const std::uint16_t* src = samples.data() + static_cast<std::size_t>(y) * row_samples;
    for (std::size_t i = 0; i < row_samples; ++i) {
      if (bit_depth == 16) {
        row[2 * i] = static_cast<std::uint8_t>(src[i] >> 8);
        row[2 * i + 1] = static_cast<std::uint8_t>(src[i] & 0xff);
      } else {
        row[i] = static_cast<std::uint8_t>(src[i]);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void check_bit_depth(int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw ConfigError(fmt::format("PNG bit depth must be 8 or 16, got {}", bit_depth));
  }
}

template <typename T>
void write_png_impl(const std::filesystem::path& path, const Image<T>& image, int bit_depth) {
  check_bit_depth(bit_depth);
  if (image.channels() != 1 && image.channels() != 3) {
    throw ConfigError("write_png: only 1- or 3-channel images are supported");
  }
  const double top = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::uint16_t> samples(image.data().size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double c = std::clamp(linear_to_srgb(static_cast<double>(image.data()[i])), 0.0, 1.0);
    samples[i] = static_cast<std::uint16_t>(std::lround(c * top));
  }
  write_png_data(path, image.width(), image.height(), image.channels(), bit_depth, samples);
}

template <typename T>
void write_pfm_impl(const std::filesystem::path& path, const Image<T>& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw ConfigError("write_pfm: only 1- or 3-channel images are supported");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError(fmt::format("cannot write PFM '{}'", path.string()));
  }
  out << (image.channels() == 3 ? "PF" : "Pf") << '\n'
      << image.width() << ' ' << image.height() << '\n'
      << "-1.0\n";
  // PFM stores scanlines bottom to top.
  std::vector<float> row(static_cast<std::size_t>(image.width()) * image.channels());
  for (int y = image.height() - 1; y >= 0; --y) {
    for (int x = 0; x < image.width(); ++x) {
      for (int c = 0; c < image.channels(); ++c) {
        row[static_cast<std::size_t>(x) * image.channels() + c] = static_cast<float>(image.at(x, y, c));
      }
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (float& f : row) {
        f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) {
    throw IoError(fmt::format("failed writing PFM '{}'", path.string()));
  }
}

} // namespace

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  c = std::clamp(c, 0.0, 1.0);
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

TextureImage::TextureImage(ImageF texels) : texels_(std::move(texels)) {
  if (texels_.width() != texels_.height()) {
    throw ConfigError(fmt::format("texture must be square, got {}x{}", texels_.width(), texels_.height()));
  }
  if (texels_.width() < 4) {
    throw ConfigError("texture resolution must be at least 4");
  }
  if (texels_.channels() != 3) {
    throw ConfigError("texture must have 3 channels");
  }
  check_finite(texels_, "texture");
}

TextureImage TextureImage::constant(int size, float r, float g, float b) {
  ImageF img(size, size, 3);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    img.pixel(p)[0] = r;
    img.pixel(p)[1] = g;
    img.pixel(p)[2] = b;
  }
  return TextureImage(std::move(img));
}

MaskImage::MaskImage(ImageF texels) : texels_(std::move(texels)) {
  if (texels_.width() != texels_.height() || texels_.width() < 4 || texels_.channels() != 3) {
    throw ConfigError("mask must be square, at least 4x4, with 3 channels");
  }
  for (float v : texels_.data()) {
    if (v != 0.0f && v != 1.0f) {
      throw ConfigError("mask texels must be exactly 0 or 1");
    }
  }
}

MaskImage MaskImage::ones(int size) { return MaskImage(ImageF(size, size, 3, 1.0f)); }

float MaskImage::sample_nearest(double u, double v) const {
  const int t = size();
  const int x = std::clamp(static_cast<int>(std::floor(u * t)), 0, t - 1);
  const int y = std::clamp(static_cast<int>(std::floor((1.0 - v) * t)), 0, t - 1);
  return texels_.at(x, y, 0);
}

ImageF read_png_linear(const std::filesystem::path& path) {
  const PngData png = read_png_data(path);
  ImageF img(png.width, png.height, 3);
  const double top = png.max_value;
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    img.data()[i] = static_cast<float>(srgb_to_linear(png.samples[i] / top));
  }
  return img;
}

void write_png_linear(const std::filesystem::path& path, const ImageF& image, int bit_depth) {
  write_png_impl(path, image, bit_depth);
}
void write_png_linear(const std::filesystem::path& path, const ImageD& image, int bit_depth) {
  write_png_impl(path, image, bit_depth);
}

TextureImage read_texture_png(const std::filesystem::path& path) {
  return TextureImage(read_png_linear(path));
}

void write_texture_png(const std::filesystem::path& path, const TextureImage& texture) {
  write_png_linear(path, texture.texels(), 16);
}

MaskImage read_mask_png(const std::filesystem::path& path) {
  const PngData png = read_png_data(path);
  ImageF img(png.width, png.height, 3);
  for (std::size_t i = 0; i < png.samples.size(); ++i) {
    img.data()[i] = 2 * png.samples[i] >= png.max_value ? 1.0f : 0.0f;
  }
  return MaskImage(std::move(img));
}

void write_mask_png(const std::filesystem::path& path, const MaskImage& mask) {
  const ImageF& t = mask.texels();
  std::vector<std::uint16_t> samples(t.data().size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = t.data()[i] > 0.5f ? 255 : 0;
  }
  write_png_data(path, t.width(), t.height(), 3, 8, samples);
}

void write_pfm(const std::filesystem::path& path, const ImageD& image) { write_pfm_impl(path, image); }
void write_pfm(const std::filesystem::path& path, const ImageF& image) { write_pfm_impl(path, image); }

ImageF read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(fmt::format("cannot open PFM '{}'", path.string()));
  }
  std::string magic;
  int width = 0;
  int height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  in.get();
  if ((magic != "PF" && magic != "Pf") || width <= 0 || height <= 0 || scale == 0.0) {
    throw ParseError(fmt::format("'{}' is not a valid PFM file", path.string()));
  }
  const int channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  ImageF img(width, height, channels);
  std::vector<float> row(static_cast<std::size_t>(width) * channels);
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) {
      throw ParseError(fmt::format("PFM '{}' is truncated", path.string()));
    }
    if (little != (std::endian::native == std::endian::little)) {
      for (float& f : row) {
        f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
      }
    }
    std::copy(row.begin(), row.end(), img.pixel(static_cast<std::size_t>(y) * width));
  }
  return img;
}

ImageD to_double(const ImageF& image) {
  ImageD out(image.width(), image.height(), image.channels());
  std::copy(image.data().begin(), image.data().end(), out.data().begin());
  return out;
}

ImageF to_float(const ImageD& image) {
  ImageF out(image.width(), image.height(), image.channels());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = static_cast<float>(image.data()[i]);
  }
  return out;
}

} // namespace meshalign
