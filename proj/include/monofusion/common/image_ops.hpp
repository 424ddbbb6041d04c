#pragma once

#include <algorithm>
#include <cmath>

#include "monofusion/common/error.hpp"
#include "monofusion/common/image.hpp"

namespace mf {

/// 2x2 area average. Odd trailing rows/columns are dropped.
template <typename T>
Image<T> downsample_area2(const Image<T>& in) {
  Image<T> out(in.width() / 2, in.height() / 2);
  for (int y = 0; y < out.height(); ++y) {
    const T* r0 = in.row(2 * y);
    const T* r1 = in.row(2 * y + 1);
    T* o = out.row(y);
    for (int x = 0; x < out.width(); ++x)
      o[x] = static_cast<T>((r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]) * T(0.25));
  }
  return out;
}

/// Mean over a (2r+1)^2 window with replicated borders.
template <typename T>
Image<T> box_filter(const Image<T>& in, int radius) {
  if (radius <= 0) return in;
  const int w = in.width(), h = in.height();
  Image<T> tmp(w, h), out(w, h);
  const double norm = 1.0 / (2 * radius + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += in(std::clamp(x + k, 0, w - 1), y);
      tmp(x, y) = static_cast<T>(s * norm);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += tmp(x, std::clamp(y + k, 0, h - 1));
      out(x, y) = static_cast<T>(s * norm);
    }
  return out;
}

/// Central differences with replicated borders.
template <typename T>
void central_gradients(const Image<T>& in, Image<T>& gx, Image<T>& gy) {
  const int w = in.width(), h = in.height();
  gx = Image<T>(w, h);
  gy = Image<T>(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      gx(x, y) = static_cast<T>(0.5 * (in(std::min(x + 1, w - 1), y) - in(std::max(x - 1, 0), y)));
      gy(x, y) = static_cast<T>(0.5 * (in(x, std::min(y + 1, h - 1)) - in(x, std::max(y - 1, 0))));
    }
}

/// Bilinear sample at continuous (u, v); caller guarantees 0 <= u <= w-1, 0 <= v <= h-1.
template <typename T>
double sample_bilinear(const Image<T>& img, double u, double v) noexcept {
  const int w = img.width(), h = img.height();
  int x0 = static_cast<int>(u);
  int y0 = static_cast<int>(v);
  x0 = std::min(x0, w - 2);
  y0 = std::min(y0, h - 2);
  const double ax = u - x0, ay = v - y0;
  const T* r0 = img.row(y0);
  const T* r1 = img.row(y0 + 1);
  const double top = r0[x0] + ax * (r0[x0 + 1] - r0[x0]);
  const double bot = r1[x0] + ax * (r1[x0 + 1] - r1[x0]);
  return top + ay * (bot - top);
}

}  // namespace mf
