#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dextok/codebook.hpp"
#include "dextok/geometry.hpp"
#include "dextok/handmodel.hpp"
#include "dextok/pointcloud.hpp"
#include "dextok/retarget.hpp"

namespace dextok::io {

/// %.17g formatting: round-trips doubles exactly and is byte-stable.
std::string fmt_double(double v);

// --- rigid pose trajectories: "posetraj frames N rate R" + one row-major 4x4 per line
geom::TargetPoseTrajectory load_pose_trajectory(const std::string& path);
void save_pose_trajectory(const std::string& path, const geom::TargetPoseTrajectory& traj);

// --- joint trajectories: "qtraj frames N dof D rate R" + one configuration per line
hand::HandTrajectory load_hand_trajectory(const std::string& path, double* rate = nullptr);
void save_hand_trajectory(const std::string& path, const hand::HandTrajectory& traj, double rate);

// --- point clouds: ASCII PLY with x y z [nx ny nz], or bare whitespace rows.
// Normals may be absent (empty normals vector); callers estimate them.
cloud::OrientedPointCloud load_cloud(const std::string& path);
void save_cloud_ply(const std::string& path, const cloud::OrientedPointCloud& c);

// --- keypoint trajectories: "keypoints K frames T" + "names ..." + T*K xyz rows
struct KeypointFile {
  std::vector<std::string> names;
  std::vector<retarget::KeypointFrame> frames;
};
KeypointFile load_keypoints(const std::string& path);
void save_keypoints(const std::string& path, const KeypointFile& file);

// --- retargeting correspondence spec. Unspecified weights default to 1 for
// fingertip links and 0.5 otherwise when a chain is given.
retarget::RetargetSpec load_retarget_spec(const std::string& path,
                                          const hand::KinematicChain* chain);

// --- pose datasets: "poseset sequences S dof D" + repeated "seq frames T" blocks
std::vector<std::vector<Eigen::VectorXd>> load_pose_dataset(const std::string& path, int* dof);
void save_pose_dataset(const std::string& path,
                       const std::vector<std::vector<Eigen::VectorXd>>& sequences, int dof);

// --- codebook archives: chunk spec + codebook + named coder nets, versioned text
struct Archive {
  vq::PoseChunkSpec chunk;
  vq::Codebook codebook;
  std::vector<std::pair<std::string, vq::CoderNet>> nets;

  const vq::CoderNet& net(const std::string& name) const;
  bool has_net(const std::string& name) const;
};
Archive load_archive(const std::string& path);
void save_archive(const std::string& path, const Archive& archive);

}  // namespace dextok::io
