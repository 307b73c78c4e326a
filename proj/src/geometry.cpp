#include "dextok/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dextok/common.hpp"

namespace dextok::geom {

namespace {

double orthonormal_drift(const Eigen::Matrix3d& r) {
  return (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
}

// Polar projection onto SO(3); flips the weakest direction if det < 0.
Eigen::Matrix3d project_rotation(const Eigen::Matrix3d& r) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Matrix3d out = u * v.transpose();
  if (out.determinant() < 0.0) {
    u.col(2) *= -1.0;
    out = u * v.transpose();
  }
  return out;
}

}  // namespace

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (orthonormal_drift(rotation_) > 1e-9) rotation_ = project_rotation(rotation_);
}

RigidTransform RigidTransform::rotate_axis_angle(const Eigen::Vector3d& unit_axis, double angle) {
  const Eigen::Vector3d a = unit_axis;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Eigen::Matrix3d k;
  k << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity() + s * k + (1.0 - c) * (k * k);
  return RigidTransform(r, Eigen::Vector3d::Zero());
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m) {
  const Eigen::RowVector4d bottom = m.row(3);
  if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).norm() > 1e-9)
    throw DataError("transform: bottom row of homogeneous matrix must be 0 0 0 1");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if (orthonormal_drift(r) > 1e-3 || r.determinant() < 0.9)
    throw DataError("transform: upper 3x3 block is not a rotation");
  return RigidTransform(r, m.topRightCorner<3, 1>());
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return RigidTransform(a.rotation() * b.rotation(),
                        a.rotation() * b.translation() + a.translation());
}

RigidTransform inverse(const RigidTransform& t) {
  const Eigen::Matrix3d rt = t.rotation().transpose();
  return RigidTransform(rt, -(rt * t.translation()));
}

Eigen::Vector3d apply(const RigidTransform& t, const Eigen::Vector3d& x) {
  return t.rotation() * x + t.translation();
}

TargetPoseTrajectory to_world_trajectory(const RigidTransform& extrinsics,
                                         const TargetPoseTrajectory& camera_poses) {
  const RigidTransform ext_inv = inverse(extrinsics);
  TargetPoseTrajectory out;
  out.frame_rate = camera_poses.frame_rate;
  out.frames.reserve(camera_poses.frames.size());
  for (const RigidTransform& f : camera_poses.frames) out.frames.push_back(compose(ext_inv, f));
  return out;
}

}  // namespace dextok::geom
