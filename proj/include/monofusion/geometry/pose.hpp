#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

#include "monofusion/common/error.hpp"

namespace mf {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Closest rotation in the Frobenius sense (polar decomposition via SVD).
inline Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) s(2, 2) = -1.0;
  return svd.matrixU() * s * svd.matrixV().transpose();
}

/// Rigid transform x -> R x + t. Poses are camera-to-world unless stated otherwise.
///
/// Every product records how many multiplies fed into it; once a chain exceeds
/// kReorthonormalizeAfter the rotation is projected back onto SO(3).
class PoseSE3 {
 public:
  static constexpr int kReorthonormalizeAfter = 64;

  PoseSE3() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  PoseSE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static PoseSE3 identity() { return {}; }

  static PoseSE3 from_quaternion(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) {
    return {q.normalized().toRotationMatrix(), t};
  }

  [[nodiscard]] const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  [[nodiscard]] const Eigen::Vector3d& translation() const noexcept { return translation_; }
  [[nodiscard]] int chain_length() const noexcept { return chain_; }

  [[nodiscard]] Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_).normalized(); }

  [[nodiscard]] PoseSE3 inverse() const {
    PoseSE3 out(rotation_.transpose(), -(rotation_.transpose() * translation_));
    out.chain_ = chain_;
    return out;
  }

  PoseSE3 operator*(const PoseSE3& rhs) const {
    PoseSE3 out(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
    out.chain_ = chain_ + rhs.chain_ + 1;
    if (out.chain_ > kReorthonormalizeAfter) {
      out.rotation_ = nearest_rotation(out.rotation_);
      out.chain_ = 0;
    }
    return out;
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation_ * p + translation_; }

  [[nodiscard]] Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  [[nodiscard]] bool is_identity() const noexcept {
    return rotation_ == Eigen::Matrix3d::Identity() && translation_ == Eigen::Vector3d::Zero();
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
  int chain_ = 0;
};

/// Ti^-1 * Tj: maps points expressed in frame j into frame i.
inline PoseSE3 relative_pose(const PoseSE3& ti, const PoseSE3& tj) { return ti.inverse() * tj; }

/// x -> s R x + t
struct Sim3 {
  double scale = 1.0;
  PoseSE3 rigid;

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return scale * (rigid.rotation() * p) + rigid.translation();
  }

  /// Applies the similarity to a camera pose (camera-to-world): the rotation is carried over
  /// and the camera center is mapped as a point.
  [[nodiscard]] PoseSE3 transform_pose(const PoseSE3& pose) const {
    return {rigid.rotation() * pose.rotation(), (*this) * pose.translation()};
  }
};

inline Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

inline Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return {0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1))};
}

/// Rotation angle of R in [0, pi].
inline double rotation_angle(const Eigen::Matrix3d& r) {
  const double s = vee(r).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

/// twist = (omega, upsilon): rotation vector first, then translational part.
inline PoseSE3 se3_exp(const Vector6d& twist) {
  const Eigen::Vector3d w = twist.head<3>();
  const Eigen::Vector3d v = twist.tail<3>();
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  const Eigen::Matrix3d wx = hat(w);
  const Eigen::Matrix3d wx2 = wx * wx;

  double a, b, c;  // sin(t)/t, (1-cos t)/t^2, (t - sin t)/t^3
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
    c = 1.0 / 6.0 - theta2 / 120.0 + theta2 * theta2 / 5040.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
    c = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Eigen::Matrix3d r = Eigen::Matrix3d::Identity() + a * wx + b * wx2;
  const Eigen::Matrix3d jl = Eigen::Matrix3d::Identity() + b * wx + c * wx2;
  return {r, jl * v};
}

inline Vector6d se3_log(const PoseSE3& pose) {
  const Eigen::Matrix3d& r = pose.rotation();
  const double theta = rotation_angle(r);
  if (theta > std::numbers::pi - 1e-6)
    fail(ErrorCode::NearSingularRotation, "rotation angle too close to pi for a unique logarithm");

  const Eigen::Vector3d axis_sin = vee(r);  // sin(theta) * axis
  Eigen::Vector3d w;
  if (theta < 1e-4) {
    w = axis_sin * (1.0 + theta * theta / 6.0);
  } else {
    w = axis_sin * (theta / std::sin(theta));
  }

  const Eigen::Matrix3d wx = hat(w);
  double k;  // coefficient of wx^2 in the inverse left Jacobian
  if (theta < 1e-4) {
    k = 1.0 / 12.0 + theta * theta / 720.0;
  } else {
    k = (1.0 - theta * std::sin(theta) / (2.0 * (1.0 - std::cos(theta)))) / (theta * theta);
  }
  const Eigen::Matrix3d jl_inv = Eigen::Matrix3d::Identity() - 0.5 * wx + k * wx * wx;

  Vector6d out;
  out.head<3>() = w;
  out.tail<3>() = jl_inv * pose.translation();
  return out;
}

}  // namespace mf
