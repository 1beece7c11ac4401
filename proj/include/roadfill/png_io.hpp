#pragma once

#include <png.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "roadfill/image.hpp"

namespace roadfill {

namespace detail {

struct PngReader {
  png_image image;

  explicit PngReader(const std::filesystem::path& path) {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
      throw Error("cannot read image '" + path.string() + "': " + image.message);
  }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  template <typename Img>
  Img finish(png_uint_32 format, const std::filesystem::path& path) {
    image.format = format;
    Img out(static_cast<int>(image.width), static_cast<int>(image.height));
    if (!png_image_finish_read(&image, nullptr, out.data().data(), 0, nullptr))
      throw Error("cannot decode image '" + path.string() + "': " + image.message);
    return out;
  }
};

template <typename Img>
void write_png(const Img& img, png_uint_32 format, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = format;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.data().data(), 0,
                               nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw Error("cannot write image '" + path.string() + "': " + msg);
  }
}

}  // namespace detail

// Any PNG is converted to 8-bit RGB. Lossless for 8-bit RGB input.
inline RgbImage read_png_rgb(const std::filesystem::path& path) {
  detail::PngReader reader(path);
  return reader.finish<RgbImage>(PNG_FORMAT_RGB, path);
}

// Rejects colour or alpha PNGs unless `require_single_channel` is false.
inline GrayImage read_png_gray(const std::filesystem::path& path, bool require_single_channel = true) {
  detail::PngReader reader(path);
  if (require_single_channel &&
      (reader.image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA)) != 0)
    throw Error("image '" + path.string() + "' is not single-channel");
  return reader.finish<GrayImage>(PNG_FORMAT_GRAY, path);
}

inline void write_png(const RgbImage& img, const std::filesystem::path& path) {
  detail::write_png(img, PNG_FORMAT_RGB, path);
}

inline void write_png(const GrayImage& img, const std::filesystem::path& path) {
  detail::write_png(img, PNG_FORMAT_GRAY, path);
}

// 0/1 binary raster written as 0/255.
inline void write_binary_png(const BinaryImage& img, const std::filesystem::path& path) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.data().size(); ++i) out.data()[i] = img.data()[i] ? 255 : 0;
  write_png(out, path);
}

}  // namespace roadfill
