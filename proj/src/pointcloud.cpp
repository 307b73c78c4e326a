#include "dextok/pointcloud.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "dextok/common.hpp"

namespace dextok::cloud {

namespace {
constexpr std::int32_t kLeafSize = 8;

bool finite(const Eigen::Vector3d& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}
}  // namespace

void OrientedPointCloud::validate() const {
  if (points.empty()) throw DataError("cloud: empty point cloud");
  if (normals.size() != points.size())
    throw DataError("cloud: normal count (" + std::to_string(normals.size()) +
                    ") does not match point count (" + std::to_string(points.size()) + ")");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!finite(points[i])) throw DataError("cloud: non-finite point at index " + std::to_string(i));
    if (std::abs(normals[i].norm() - 1.0) > 1e-6)
      throw DataError("cloud: non-unit normal at index " + std::to_string(i));
  }
}

NeighborIndex::NeighborIndex(const OrientedPointCloud& cloud) : cloud_(cloud) {
  if (cloud_.points.empty()) throw DataError("cloud: cannot index an empty cloud");
  if (!cloud_.normals.empty() && cloud_.normals.size() != cloud_.points.size())
    throw DataError("cloud: normal count does not match point count");
  order_.resize(cloud_.points.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::int32_t>(i);
  nodes_.reserve(2 * order_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<std::int32_t>(order_.size()));
}

std::int32_t NeighborIndex::build(std::int32_t begin, std::int32_t end) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  Eigen::Vector3d lo = cloud_.points[order_[begin]];
  Eigen::Vector3d hi = lo;
  for (std::int32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(cloud_.points[order_[i]]);
    hi = hi.cwiseMax(cloud_.points[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);

  // Full sort by (coordinate, index) keeps the structure deterministic for a
  // fixed input order.
  std::sort(order_.begin() + begin, order_.begin() + end,
            [&](std::int32_t a, std::int32_t b) {
              const double ca = cloud_.points[a][axis];
              const double cb = cloud_.points[b][axis];
              if (ca != cb) return ca < cb;
              return a < b;
            });
  const std::int32_t mid = begin + (end - begin) / 2;

  node.axis = axis;
  node.split = cloud_.points[order_[mid]][axis];
  nodes_.push_back(node);
  const std::int32_t self = static_cast<std::int32_t>(nodes_.size() - 1);
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

NearestHit NeighborIndex::nearest(const Eigen::Vector3d& query) const {
  double best_d = std::numeric_limits<double>::infinity();
  std::int32_t best = -1;

  // Explicit stack; nodes pruned with <= so an equal-distance point with a
  // lower index on the far side is never missed.
  std::vector<std::int32_t> stack;
  stack.push_back(root_);
  while (!stack.empty()) {
    const std::int32_t ni = stack.back();
    stack.pop_back();
    const Node& node = nodes_[ni];
    if (node.axis < 0) {
      for (std::int32_t i = node.begin; i < node.end; ++i) {
        const std::int32_t idx = order_[i];
        const double d = (cloud_.points[idx] - query).squaredNorm();
        if (d < best_d || (d == best_d && idx < best)) {
          best_d = d;
          best = idx;
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near_child = diff < 0.0 ? node.left : node.right;
    const std::int32_t far_child = diff < 0.0 ? node.right : node.left;
    if (diff * diff <= best_d) stack.push_back(far_child);
    stack.push_back(near_child);
  }

  if (best < 0) throw NumericalError("cloud: nearest query failed (non-finite query point?)");

  NearestHit hit;
  hit.index = static_cast<std::size_t>(best);
  hit.point = cloud_.points[best];
  hit.normal = cloud_.normals.empty() ? Eigen::Vector3d::Zero() : cloud_.normals[best];
  hit.squared_distance = best_d;
  return hit;
}

std::vector<std::size_t> NeighborIndex::k_nearest(const Eigen::Vector3d& query,
                                                  std::size_t k) const {
  if (k == 0) return {};
  k = std::min(k, cloud_.points.size());

  using Entry = std::pair<double, std::int32_t>;  // (squared distance, index)
  auto worse = [](const Entry& a, const Entry& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  };
  std::vector<Entry> heap;  // max-heap on (distance, index)
  heap.reserve(k + 1);

  std::vector<std::int32_t> stack;
  stack.push_back(root_);
  while (!stack.empty()) {
    const std::int32_t ni = stack.back();
    stack.pop_back();
    const Node& node = nodes_[ni];
    if (node.axis < 0) {
      for (std::int32_t i = node.begin; i < node.end; ++i) {
        const std::int32_t idx = order_[i];
        const Entry e{(cloud_.points[idx] - query).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push_back(e);
          std::push_heap(heap.begin(), heap.end(), worse);
        } else if (worse(e, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), worse);
          heap.back() = e;
          std::push_heap(heap.begin(), heap.end(), worse);
        }
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const std::int32_t near_child = diff < 0.0 ? node.left : node.right;
    const std::int32_t far_child = diff < 0.0 ? node.right : node.left;
    if (heap.size() < k || diff * diff <= heap.front().first) stack.push_back(far_child);
    stack.push_back(near_child);
  }

  std::sort(heap.begin(), heap.end(), worse);
  std::vector<std::size_t> out;
  out.reserve(heap.size());
  for (const Entry& e : heap) out.push_back(static_cast<std::size_t>(e.second));
  return out;
}

NeighborIndex build_index(const OrientedPointCloud& cloud) { return NeighborIndex(cloud); }

NormalEstimate estimate_normals(const std::vector<Eigen::Vector3d>& points,
                                std::size_t k_neighbors, const Eigen::Vector3d& orient_ref) {
  if (k_neighbors < 3) throw DataError("normals: k_neighbors must be at least 3");
  if (points.size() <= k_neighbors)
    throw DataError("normals: need more than k_neighbors points, got " +
                    std::to_string(points.size()));

  OrientedPointCloud positions_only;
  positions_only.points = points;
  NeighborIndex index(positions_only);

  NormalEstimate est;
  est.normals.resize(points.size());
  est.degenerate.assign(points.size(), false);

  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto nbrs = index.k_nearest(points[i], k_neighbors);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (std::size_t j : nbrs) mean += points[j];
    mean /= static_cast<double>(nbrs.size());

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (std::size_t j : nbrs) {
      const Eigen::Vector3d d = points[j] - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(nbrs.size());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
    Eigen::Vector3d n = eig.eigenvectors().col(0);

    // Plane fit needs two spread directions; collinear or coincident
    // neighborhoods are flagged.
    const double scale = std::max(evals[2], 1e-300);
    if (evals[1] <= 1e-9 * scale || evals[2] <= 0.0) est.degenerate[i] = true;

    if (n.dot(points[i] - orient_ref) < 0.0) n = -n;
    est.normals[i] = n;
  }
  return est;
}

double signed_distance(const Eigen::Vector3d& x_obj, const Eigen::Vector3d& p,
                       const Eigen::Vector3d& n) {
  if (std::abs(n.norm() - 1.0) > 1e-6) throw DataError("signed_distance: normal is not unit");
  return n.dot(x_obj - p);
}

}  // namespace dextok::cloud
