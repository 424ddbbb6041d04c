#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "monofusion/common/error.hpp"
#include "monofusion/common/image.hpp"
#include "monofusion/common/keyvalue.hpp"
#include "monofusion/synth/noise.hpp"

namespace mf::synth {

/// Rectangle through `center` spanned by `u_axis` and normal x u_axis. Infinite half extents
/// give an unbounded plane.
struct PlaneShape {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d u_axis = Eigen::Vector3d::UnitX();
  double half_u = std::numeric_limits<double>::infinity();
  double half_v = std::numeric_limits<double>::infinity();
};

struct SphereShape {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

/// Box with its own orientation (columns of `rotation` are the box axes in world frame).
struct BoxShape {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Constant(0.5);
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
};

struct Material {
  std::uint64_t texture_seed = 1;
  double texture_frequency = 6.0;
  int texture_octaves = 4;
  double contrast = 2.0;  // albedo = 0.5 + contrast * (noise - 0.5), clamped
  Rgb tint{1.f, 1.f, 1.f};
};

struct Primitive {
  std::variant<PlaneShape, SphereShape, BoxShape> shape;
  Material material;
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();  // ray parameter
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  int primitive = -1;
};

struct SyntheticScene {
  std::vector<Primitive> primitives;
  double ambient = 0.35;
  Eigen::Vector3d light_direction = Eigen::Vector3d(0.3, 0.4, 1.0).normalized();  // towards the light
  Eigen::Vector3d focus = Eigen::Vector3d::Zero();                                  // orbit target
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();

  void validate() const {
    require(!primitives.empty(), ErrorCode::InvalidArgument, "scene needs at least one primitive");
    require(ambient >= 0.0 && ambient <= 1.0, ErrorCode::InvalidArgument, "ambient must lie in [0, 1]");
  }
};

namespace detail {

inline bool intersect(const PlaneShape& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& hit) {
  const double denom = d.dot(s.normal);
  if (std::abs(denom) < 1e-14) return false;
  const double t = (s.center - o).dot(s.normal) / denom;
  if (!(t > 0.0) || t >= hit.t) return false;
  if (std::isfinite(s.half_u) || std::isfinite(s.half_v)) {
    const Eigen::Vector3d local = o + t * d - s.center;
    const Eigen::Vector3d v_axis = s.normal.cross(s.u_axis);
    if (std::abs(local.dot(s.u_axis)) > s.half_u || std::abs(local.dot(v_axis)) > s.half_v) return false;
  }
  hit.t = t;
  hit.normal = denom < 0.0 ? s.normal : Eigen::Vector3d(-s.normal);
  return true;
}

inline bool intersect(const SphereShape& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& hit) {
  const Eigen::Vector3d oc = s.center - o;
  const double a = d.squaredNorm();
  const double b = d.dot(oc);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - a * c;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  // Near root without cancellation: t = (b - sq) / a = c / (b + sq).
  double t = b > 0.0 ? c / (b + sq) : (b - sq) / a;
  if (!(t > 0.0)) t = (b + sq) / a;  // origin inside the sphere
  if (!(t > 0.0) || t >= hit.t) return false;
  hit.t = t;
  hit.normal = (o + t * d - s.center).normalized();
  if (hit.normal.dot(d) > 0.0) hit.normal = -hit.normal;
  return true;
}

inline bool intersect(const BoxShape& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& hit) {
  const Eigen::Vector3d lo = s.rotation.transpose() * (o - s.center);
  const Eigen::Vector3d ld = s.rotation.transpose() * d;
  double t_near = -std::numeric_limits<double>::infinity(), t_far = std::numeric_limits<double>::infinity();
  int axis_near = -1, axis_far = -1;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(ld[k]) < 1e-300) {
      if (std::abs(lo[k]) > s.half_extents[k]) return false;
      continue;
    }
    double t0 = (-s.half_extents[k] - lo[k]) / ld[k];
    double t1 = (s.half_extents[k] - lo[k]) / ld[k];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) { t_near = t0; axis_near = k; }
    if (t1 < t_far) { t_far = t1; axis_far = k; }
  }
  if (t_near > t_far) return false;
  double t = t_near;
  int axis = axis_near;
  if (!(t > 0.0)) { t = t_far; axis = axis_far; }
  if (!(t > 0.0) || t >= hit.t || axis < 0) return false;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[axis] = 1.0;
  n = s.rotation * n;
  if (n.dot(d) > 0.0) n = -n;
  hit.t = t;
  hit.normal = n;
  return true;
}

}  // namespace detail

/// Nearest intersection of o + t d (t > 0) with the scene.
inline Hit intersect_scene(const SyntheticScene& scene, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  Hit hit;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const bool found = std::visit([&](const auto& s) { return detail::intersect(s, o, d, hit); },
                                  scene.primitives[i].shape);
    if (found) hit.primitive = static_cast<int>(i);
  }
  return hit;
}

/// Lambertian shading of a textured surface point; the texture is a solid noise in world space.
inline Rgb shade(const SyntheticScene& scene, const Primitive& prim, const Eigen::Vector3d& p,
                 const Eigen::Vector3d& normal) {
  const ValueNoise noise{prim.material.texture_seed, prim.material.texture_frequency, prim.material.texture_octaves};
  const double albedo = std::clamp(0.5 + prim.material.contrast * (noise(p) - 0.5), 0.02, 0.98);
  const double lambert = std::max(0.0, normal.dot(scene.light_direction));
  const double shading = scene.ambient + (1.0 - scene.ambient) * lambert;
  const double v = albedo * shading;
  auto channel = [&](float tint) { return static_cast<float>(std::clamp(v * tint, 0.0, 1.0)); };
  return {channel(prim.material.tint.r), channel(prim.material.tint.g), channel(prim.material.tint.b)};
}

// ---------------------------------------------------------------------------------------------
// Scene description files
//
//   ambient = 0.35
//   light = 0.3 0.4 1.0           direction towards the light
//   focus = 0 0 0.5               orbit target
//   up = 0 0 1
//
//   [plane]                       center, normal, u_axis, half_u, half_v (omit for unbounded)
//   [sphere]                      center, radius
//   [box]                         center, half_extents, yaw_deg (rotation about `up`)
//
//   every primitive block also accepts: seed, frequency, octaves, contrast, tint (r g b)

inline Eigen::Vector3d to_vec3(const std::array<double, 3>& a) { return {a[0], a[1], a[2]}; }

inline SyntheticScene parse_scene(const KeyValueConfig& cfg) {
  SyntheticScene scene;
  scene.ambient = cfg.get<double>("ambient", scene.ambient);
  if (cfg.has("light")) scene.light_direction = to_vec3(cfg.get<std::array<double, 3>>("light", {})).normalized();
  if (cfg.has("focus")) scene.focus = to_vec3(cfg.get<std::array<double, 3>>("focus", {}));
  if (cfg.has("up")) scene.up = to_vec3(cfg.get<std::array<double, 3>>("up", {})).normalized();

  for (const auto& block : cfg.blocks()) {
    Primitive prim;
    Material& m = prim.material;
    m.texture_seed = cfg.block_get<std::uint64_t>(block, "seed", m.texture_seed);
    m.texture_frequency = cfg.block_get<double>(block, "frequency", m.texture_frequency);
    m.texture_octaves = cfg.block_get<int>(block, "octaves", m.texture_octaves);
    m.contrast = cfg.block_get<double>(block, "contrast", m.contrast);
    const auto tint = cfg.block_get<std::array<double, 3>>(block, "tint", {1.0, 1.0, 1.0});
    m.tint = {static_cast<float>(tint[0]), static_cast<float>(tint[1]), static_cast<float>(tint[2])};
    const auto vec = [&](const char* key, const Eigen::Vector3d& fallback) {
      return to_vec3(cfg.block_get<std::array<double, 3>>(block, key, {fallback.x(), fallback.y(), fallback.z()}));
    };

    if (block.type == "plane") {
      PlaneShape s;
      s.center = vec("center", s.center);
      s.normal = vec("normal", s.normal).normalized();
      s.u_axis = vec("u_axis", s.u_axis);
      s.u_axis = (s.u_axis - s.u_axis.dot(s.normal) * s.normal).normalized();
      s.half_u = cfg.block_get<double>(block, "half_u", s.half_u);
      s.half_v = cfg.block_get<double>(block, "half_v", s.half_v);
      prim.shape = s;
    } else if (block.type == "sphere") {
      SphereShape s;
      s.center = vec("center", s.center);
      s.radius = cfg.block_get<double>(block, "radius", s.radius);
      require(s.radius > 0.0, ErrorCode::FormatError, "sphere radius must be positive");
      prim.shape = s;
    } else if (block.type == "box") {
      BoxShape s;
      s.center = vec("center", s.center);
      s.half_extents = vec("half_extents", s.half_extents);
      const double yaw = cfg.block_get<double>(block, "yaw_deg", 0.0) * M_PI / 180.0;
      s.rotation = Eigen::AngleAxisd(yaw, scene.up).toRotationMatrix();
      prim.shape = s;
    } else {
      fail(ErrorCode::FormatError, cfg.origin() + ":" + std::to_string(block.line) + ": unknown primitive '" +
                                       block.type + "'");
    }
    scene.primitives.push_back(prim);
  }
  scene.validate();
  return scene;
}

inline SyntheticScene load_scene(const std::string& path) { return parse_scene(KeyValueConfig::load(path)); }

/// Desk-scale test scene: textured floor and back wall with a textured ball on the floor.
inline SyntheticScene two_plane_sphere_scene() {
  SyntheticScene scene;
  scene.focus = Eigen::Vector3d(0.0, 0.0, 0.25);
  Primitive floor{PlaneShape{Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(), 3.0, 3.0},
                  Material{11, 16.0, 4, 2.2, {1.f, 0.95f, 0.9f}}};
  Primitive wall{PlaneShape{Eigen::Vector3d(-0.9, 0.0, 1.0), Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(), 3.0,
                            1.0},
                 Material{23, 16.0, 4, 2.2, {0.9f, 0.95f, 1.f}}};
  Primitive ball{SphereShape{Eigen::Vector3d(0.0, 0.0, 0.3), 0.3}, Material{37, 24.0, 4, 2.2, {1.f, 0.9f, 0.85f}}};
  scene.primitives = {floor, wall, ball};
  return scene;
}

/// A single textured sphere around the origin.
inline SyntheticScene sphere_scene(double radius = 1.0) {
  SyntheticScene scene;
  scene.focus = Eigen::Vector3d::Zero();
  scene.primitives = {Primitive{SphereShape{Eigen::Vector3d::Zero(), radius}, Material{5, 4.0, 5, 2.0, {1.f, 1.f, 1.f}}}};
  return scene;
}

}  // namespace mf::synth
