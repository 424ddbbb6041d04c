#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <span>
#include <vector>

#include "monofusion/common/error.hpp"
#include "monofusion/geometry/pose.hpp"

namespace mf {

enum class AlignmentMode { Sim3, SE3 };

namespace detail {

inline void require_spread(const Eigen::Matrix3d& scatter, const char* which) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(scatter);
  const auto s = svd.singularValues();
  if (!(s(0) > 1e-20) || s(1) <= 1e-12 * s(0))
    fail(ErrorCode::DegenerateConfiguration, std::string(which) + " points are coincident or collinear");
}

}  // namespace detail

/// Closed-form least-squares similarity minimizing sum |dst_i - (s R src_i + t)|^2.
/// With AlignmentMode::SE3 the scale is fixed to 1.
inline Sim3 align_umeyama(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst,
                          AlignmentMode mode = AlignmentMode::Sim3) {
  require(src.size() == dst.size(), ErrorCode::InvalidArgument, "point lists differ in length");
  if (src.size() < 3) fail(ErrorCode::DegenerateConfiguration, "need at least 3 point pairs");

  const double n = static_cast<double>(src.size());
  Eigen::Vector3d mu_s = Eigen::Vector3d::Zero();
  Eigen::Vector3d mu_d = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= n;
  mu_d /= n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d scatter_s = Eigen::Matrix3d::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector3d a = src[i] - mu_s;
    const Eigen::Vector3d b = dst[i] - mu_d;
    cov += b * a.transpose();
    scatter_s += a * a.transpose();
    var_s += a.squaredNorm();
  }
  cov /= n;
  var_s /= n;
  detail::require_spread(scatter_s, "source");
  detail::require_spread(cov * cov.transpose(), "target");

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixU() * s * svd.matrixV().transpose();

  double scale = 1.0;
  if (mode == AlignmentMode::Sim3) scale = (svd.singularValues().asDiagonal() * s).trace() / var_s;

  const Eigen::Vector3d t = mu_d - scale * r * mu_s;
  return Sim3{scale, PoseSE3(r, t)};
}

inline Sim3 align_umeyama_sim3(std::span<const Eigen::Vector3d> src, std::span<const Eigen::Vector3d> dst) {
  return align_umeyama(src, dst, AlignmentMode::Sim3);
}

/// Sum of squared residuals of dst against the aligned src.
inline double alignment_residual(const Sim3& s, std::span<const Eigen::Vector3d> src,
                                 std::span<const Eigen::Vector3d> dst) {
  double sum = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) sum += (dst[i] - s * src[i]).squaredNorm();
  return sum;
}

}  // namespace mf
