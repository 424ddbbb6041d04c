#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "monofusion/common/error.hpp"
#include "monofusion/common/parallel.hpp"
#include "monofusion/tsdf/mesh.hpp"

namespace mf::eval {

/// Static 3-d tree over a point set for nearest-neighbour distance queries.
class KdTree {
 public:
  explicit KdTree(std::vector<Eigen::Vector3d> points) : points_(std::move(points)) {
    index_.resize(points_.size());
    std::iota(index_.begin(), index_.end(), 0u);
    nodes_.reserve(points_.size());
    if (!points_.empty()) root_ = build(0, static_cast<int>(index_.size()), 0);
  }

  [[nodiscard]] bool empty() const noexcept { return points_.empty(); }

  /// Euclidean distance to the closest stored point.
  [[nodiscard]] double nearest_distance(const Eigen::Vector3d& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (root_ >= 0) search(root_, q, best);
    return std::sqrt(best);
  }

 private:
  struct Node {
    std::uint32_t point;
    int axis;
    int left = -1;
    int right = -1;
  };

  int build(int lo, int hi, int depth) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const int mid = lo + (hi - lo) / 2;
    std::nth_element(index_.begin() + lo, index_.begin() + mid, index_.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({index_[static_cast<std::size_t>(mid)], axis});
    const int l = build(lo, mid, depth + 1);
    const int r = build(mid + 1, hi, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  void search(int id, const Eigen::Vector3d& q, double& best) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Eigen::Vector3d& p = points_[n.point];
    best = std::min(best, (p - q).squaredNorm());
    const double diff = q[n.axis] - p[n.axis];
    const int near = diff < 0.0 ? n.left : n.right;
    const int far = diff < 0.0 ? n.right : n.left;
    if (near >= 0) search(near, q, best);
    if (far >= 0 && diff * diff < best) search(far, q, best);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> index_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

inline constexpr std::size_t kDefaultSurfaceSamples = 100000;

/// Area-weighted uniform samples on the triangles of a mesh.
inline std::vector<Eigen::Vector3d> sample_surface(const tsdf::TriangleMesh& mesh,
                                                   std::size_t count = kDefaultSurfaceSamples,
                                                   std::uint64_t seed = 1) {
  if (mesh.faces.empty()) fail(ErrorCode::EmptyInput, "mesh has no faces");
  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    const auto& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const auto& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const auto& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) fail(ErrorCode::EmptyInput, "mesh has zero surface area");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<Eigen::Vector3d> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double pick = uni(rng) * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const auto fi = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), mesh.faces.size() - 1);
    const auto& f = mesh.faces[fi];
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const auto& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const auto& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const auto& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    out.push_back(a + u * (b - a) + v * (c - a));
  }
  return out;
}

struct MeshQuality {
  double accuracy_cm = 0.0;      // mean distance from prediction samples to ground truth
  double completion_cm = 0.0;    // mean distance from ground-truth samples to the prediction
  double completion_ratio = 0.0; // percent of ground-truth samples closer than the threshold
};

inline MeshQuality point_accuracy_completeness(const std::vector<Eigen::Vector3d>& pred,
                                               const std::vector<Eigen::Vector3d>& gt, double threshold_cm) {
  if (pred.empty() || gt.empty()) fail(ErrorCode::EmptyInput, "accuracy needs non-empty point sets");
  require(threshold_cm > 0.0, ErrorCode::InvalidArgument, "threshold must be positive");
  const KdTree gt_tree(gt), pred_tree(pred);
  auto mean_distance = [](const KdTree& tree, const std::vector<Eigen::Vector3d>& queries,
                          std::vector<double>& dist) {
    dist.assign(queries.size(), 0.0);
    parallel_for(0, static_cast<int>(queries.size()),
                 [&](int i) { dist[static_cast<std::size_t>(i)] = tree.nearest_distance(queries[static_cast<std::size_t>(i)]); });
    double sum = 0.0;
    for (double d : dist) sum += d;
    return sum / static_cast<double>(queries.size());
  };
  std::vector<double> d_pred, d_gt;
  MeshQuality q;
  q.accuracy_cm = 100.0 * mean_distance(gt_tree, pred, d_pred);
  q.completion_cm = 100.0 * mean_distance(pred_tree, gt, d_gt);
  const double thr = threshold_cm / 100.0;
  const auto close = std::count_if(d_gt.begin(), d_gt.end(), [&](double d) { return d < thr; });
  q.completion_ratio = 100.0 * static_cast<double>(close) / static_cast<double>(gt.size());
  return q;
}

/// Accuracy, completion and completion ratio of a reconstructed mesh against ground-truth
/// surface samples (model units taken as meters).
inline MeshQuality mesh_accuracy_completeness(const tsdf::TriangleMesh& pred, const std::vector<Eigen::Vector3d>& gt,
                                              double threshold_cm, std::size_t samples = kDefaultSurfaceSamples,
                                              std::uint64_t seed = 1) {
  if (pred.faces.empty() || gt.empty()) fail(ErrorCode::EmptyInput, "mesh or ground-truth samples are empty");
  return point_accuracy_completeness(sample_surface(pred, samples, seed), gt, threshold_cm);
}

}  // namespace mf::eval
