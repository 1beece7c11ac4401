#pragma once

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "roadfill/common.hpp"

namespace roadfill {

// Dense interleaved image with a compile-time channel count. Row-major,
// origin at the top-left.
template <typename T, int Channels>
class Image {
  static_assert(Channels >= 1);

 public:
  using value_type = T;
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width),
        height_(height),
        data_(static_cast<std::size_t>(std::max(width, 0)) *
                  static_cast<std::size_t>(std::max(height, 0)) * Channels,
              fill) {
    if (width < 0 || height < 0) throw Error("negative image dimensions");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  bool contains(Pixel p) const noexcept { return contains(p.x, p.y); }

  std::size_t index(int x, int y) const noexcept {
    assert(contains(x, y));
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
           Channels;
  }

  T& operator()(int x, int y, int c = 0) noexcept { return data_[index(x, y) + c]; }
  const T& operator()(int x, int y, int c = 0) const noexcept {
    return data_[index(x, y) + c];
  }
  T& operator()(Pixel p, int c = 0) noexcept { return (*this)(p.x, p.y, c); }
  const T& operator()(Pixel p, int c = 0) const noexcept { return (*this)(p.x, p.y, c); }

  std::span<T, Channels> pixel(int x, int y) noexcept {
    return std::span<T, Channels>(data_.data() + index(x, y), Channels);
  }
  std::span<const T, Channels> pixel(int x, int y) const noexcept {
    return std::span<const T, Channels>(data_.data() + index(x, y), Channels);
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool same_size(int w, int h) const noexcept { return width_ == w && height_ == h; }
  template <typename U, int C>
  bool same_size(const Image<U, C>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using RgbImage = Image<std::uint8_t, 3>;
using GrayImage = Image<std::uint8_t, 1>;
using RgbImagef = Image<float, 3>;

// Binary raster stored as 0/1 bytes. Used for void masks and edge maps.
using BinaryImage = Image<std::uint8_t, 1>;

inline std::size_t count_set(const BinaryImage& img) {
  return static_cast<std::size_t>(
      std::count_if(img.data().begin(), img.data().end(), [](std::uint8_t v) { return v != 0; }));
}

// ITU-R BT.601 luma in integer arithmetic, rounded to nearest.
inline std::uint8_t luma601(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((299 * r + 587 * g + 114 * b + 500) / 1000);
}

inline GrayImage to_gray(const RgbImage& rgb) {
  GrayImage out(rgb.width(), rgb.height());
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x)
      out(x, y) = luma601(rgb(x, y, 0), rgb(x, y, 1), rgb(x, y, 2));
  return out;
}

inline std::uint8_t clamp_to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

inline RgbImagef to_float(const RgbImage& img) {
  RgbImagef out(img.width(), img.height());
  std::transform(img.data().begin(), img.data().end(), out.data().begin(),
                 [](std::uint8_t v) { return static_cast<float>(v); });
  return out;
}

inline RgbImage to_u8(const RgbImagef& img) {
  RgbImage out(img.width(), img.height());
  std::transform(img.data().begin(), img.data().end(), out.data().begin(),
                 [](float v) { return clamp_to_u8(v); });
  return out;
}

}  // namespace roadfill
