#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace dextok::cloud {

/// Object surface samples with outward unit normals.
struct OrientedPointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  // unit length, same size as points

  std::size_t size() const { return points.size(); }
  void validate() const;  // throws DataError on violation
};

struct NearestHit {
  Eigen::Vector3d point;
  Eigen::Vector3d normal;
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Exact nearest-neighbor index over the cloud. Results match a brute-force
/// scan including the tie rule (equal distances resolve to the lowest stored
/// index). Immutable after build; concurrent queries are safe.
class NeighborIndex {
 public:
  explicit NeighborIndex(const OrientedPointCloud& cloud);

  NearestHit nearest(const Eigen::Vector3d& query) const;
  const OrientedPointCloud& cloud() const { return cloud_; }

  /// Indices of the k nearest points (ascending by distance, ties by index).
  std::vector<std::size_t> k_nearest(const Eigen::Vector3d& query, std::size_t k) const;

 private:
  struct Node {
    int axis = -1;          // -1 marks a leaf
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t begin = 0;  // leaf range into order_
    std::int32_t end = 0;
  };

  std::int32_t build(std::int32_t begin, std::int32_t end);

  OrientedPointCloud cloud_;
  std::vector<std::int32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

NeighborIndex build_index(const OrientedPointCloud& cloud);

struct NormalEstimate {
  std::vector<Eigen::Vector3d> normals;
  std::vector<bool> degenerate;  // neighborhood rank < 2, normal unreliable
};

/// Per-point plane fit over the k nearest neighbors; normals are oriented
/// away from `orient_ref` (n . (p - orient_ref) >= 0).
NormalEstimate estimate_normals(const std::vector<Eigen::Vector3d>& points,
                                std::size_t k_neighbors, const Eigen::Vector3d& orient_ref);

/// Signed point-to-plane distance n^T (x - p); n must be unit within 1e-6.
double signed_distance(const Eigen::Vector3d& x_obj, const Eigen::Vector3d& p,
                       const Eigen::Vector3d& n);

}  // namespace dextok::cloud
