#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "evio/error.hpp"

namespace evio {

/// Row-major dense image.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const auto& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  T& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& operator()(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  /// Replicate-border access.
  const T& clamped(int x, int y) const {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  T* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }
  const T* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool operator==(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ && data_ == o.data_;
  }

 private:
  static std::size_t checked_size(int w, int h) {
    if (w <= 0 || h <= 0) throw Error(Errc::InvalidArgument, "image dimensions must be positive");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Working grayscale image, values in [0, 1].
using GrayImage = Image<float>;

/// Bilinear sample with replicate border.
float sample_bilinear(const GrayImage& img, double x, double y);

/// float [0,1] -> 8-bit by round(v * 255), clamped.
Image<std::uint8_t> to_u8(const GrayImage& img);
GrayImage from_u8(const Image<std::uint8_t>& img);

/// Divides by the maximum value (no-op on an all-zero image).
GrayImage normalize_max(const Image<double>& img);

// Binary PGM (P5). 8-bit and 16-bit (big-endian) variants.
Image<std::uint8_t> read_pgm8(const std::filesystem::path& path);
void write_pgm8(const std::filesystem::path& path, const Image<std::uint8_t>& img);
Image<std::uint16_t> read_pgm16(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const Image<std::uint16_t>& img);

}  // namespace evio
