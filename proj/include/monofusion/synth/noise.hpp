#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace mf::synth {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform value in [0, 1) attached to an integer lattice point.
inline double lattice_value(std::int64_t ix, std::int64_t iy, std::int64_t iz, std::uint64_t seed) noexcept {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iz));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double quintic(double t) noexcept { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

/// Solid value noise: lattice values blended with a C2 quintic fade, summed over octaves.
struct ValueNoise {
  std::uint64_t seed = 1;
  double base_frequency = 6.0;  // lattice cells per unit length for the first octave
  int octaves = 4;
  double persistence = 0.55;

  [[nodiscard]] double single(const Eigen::Vector3d& p, std::uint64_t octave_seed) const noexcept {
    const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
               iz = static_cast<std::int64_t>(fz);
    const double tx = quintic(p.x() - fx), ty = quintic(p.y() - fy), tz = quintic(p.z() - fz);
    auto v = [&](int a, int b, int c) { return lattice_value(ix + a, iy + b, iz + c, octave_seed); };
    const double x00 = v(0, 0, 0) + tx * (v(1, 0, 0) - v(0, 0, 0));
    const double x10 = v(0, 1, 0) + tx * (v(1, 1, 0) - v(0, 1, 0));
    const double x01 = v(0, 0, 1) + tx * (v(1, 0, 1) - v(0, 0, 1));
    const double x11 = v(0, 1, 1) + tx * (v(1, 1, 1) - v(0, 1, 1));
    const double y0 = x00 + ty * (x10 - x00);
    const double y1 = x01 + ty * (x11 - x01);
    return y0 + tz * (y1 - y0);
  }

  /// Value in [0, 1].
  [[nodiscard]] double operator()(const Eigen::Vector3d& p) const noexcept {
    double sum = 0.0, norm = 0.0, amp = 1.0, freq = base_frequency;
    for (int o = 0; o < octaves; ++o) {
      sum += amp * single(p * freq, seed * 131 + static_cast<std::uint64_t>(o));
      norm += amp;
      amp *= persistence;
      freq *= 2.0;
    }
    return sum / norm;
  }
};

}  // namespace mf::synth
