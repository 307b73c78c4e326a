#pragma once

#include <Eigen/Core>
#include <vector>

namespace dextok::geom {

/// Proper rigid transform: x -> R x + p. The rotation is kept orthonormal
/// with det +1; constructors re-project onto SO(3) when drift exceeds 1e-9.
class RigidTransform {
 public:
  RigidTransform() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static RigidTransform identity() { return RigidTransform(); }
  static RigidTransform translate(const Eigen::Vector3d& t) {
    return RigidTransform(Eigen::Matrix3d::Identity(), t);
  }
  static RigidTransform rotate_axis_angle(const Eigen::Vector3d& unit_axis, double angle);

  /// Builds from a homogeneous 4x4 matrix. Throws DataError when the upper
  /// 3x3 block is not close to a rotation or the bottom row is not (0,0,0,1).
  static RigidTransform from_matrix(const Eigen::Matrix4d& m);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Eigen::Matrix4d matrix() const;

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// a then applied after b: (a * b)(x) = a(b(x)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform inverse(const RigidTransform& t);
Eigen::Vector3d apply(const RigidTransform& t, const Eigen::Vector3d& x);

/// Per-frame rigid pose of the manipulated object.
struct TargetPoseTrajectory {
  std::vector<RigidTransform> frames;
  double frame_rate = 0.0;  // Hz, informational
};

/// Converts camera-frame object poses to world frame: out_t = extrinsics^{-1} * cam_t.
TargetPoseTrajectory to_world_trajectory(const RigidTransform& extrinsics,
                                         const TargetPoseTrajectory& camera_poses);

}  // namespace dextok::geom
