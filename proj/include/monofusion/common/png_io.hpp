#pragma once

#include <png.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <string>

#include "monofusion/common/error.hpp"
#include "monofusion/common/image.hpp"

namespace mf::png {

using Rgb8 = std::array<std::uint8_t, 3>;

namespace detail {

inline png_image make_image() {
  png_image im;
  std::memset(&im, 0, sizeof(im));
  im.version = PNG_IMAGE_VERSION;
  return im;
}

template <typename Pixel>
Image<Pixel> read_as(const std::string& path, std::uint32_t format) {
  png_image im = make_image();
  if (!png_image_begin_read_from_file(&im, path.c_str()))
    fail(ErrorCode::IoError, "cannot read PNG " + path + ": " + im.message);
  im.format = format;
  Image<Pixel> out(static_cast<int>(im.width), static_cast<int>(im.height));
  if (!png_image_finish_read(&im, nullptr, out.pixels().data(), 0, nullptr)) {
    png_image_free(&im);
    fail(ErrorCode::IoError, "cannot decode PNG " + path + ": " + im.message);
  }
  return out;
}

template <typename Pixel>
void write_as(const std::string& path, const Image<Pixel>& img, std::uint32_t format) {
  png_image im = make_image();
  im.width = static_cast<png_uint_32>(img.width());
  im.height = static_cast<png_uint_32>(img.height());
  im.format = format;
  if (!png_image_write_to_file(&im, path.c_str(), 0, img.pixels().data(), 0, nullptr))
    fail(ErrorCode::IoError, "cannot write PNG " + path + ": " + im.message);
}

}  // namespace detail

/// 16-bit single channel, values passed through unchanged (no gamma conversion).
inline Image<std::uint16_t> read_gray16(const std::string& path) {
  return detail::read_as<std::uint16_t>(path, PNG_FORMAT_LINEAR_Y);
}

inline void write_gray16(const std::string& path, const Image<std::uint16_t>& img) {
  detail::write_as(path, img, PNG_FORMAT_LINEAR_Y);
}

/// 8-bit RGB. Grayscale files are expanded to three equal channels.
inline Image<Rgb8> read_rgb8(const std::string& path) {
  static_assert(sizeof(Rgb8) == 3);
  return detail::read_as<Rgb8>(path, PNG_FORMAT_RGB);
}

inline void write_rgb8(const std::string& path, const Image<Rgb8>& img) {
  detail::write_as(path, img, PNG_FORMAT_RGB);
}

}  // namespace mf::png
