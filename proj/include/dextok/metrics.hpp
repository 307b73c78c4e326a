#pragma once

#include <Eigen/Core>
#include <vector>

#include "dextok/codebook.hpp"
#include "dextok/handmodel.hpp"

namespace dextok::metrics {

/// Joint positions per frame (meters internally; reported values are mm).
struct JointTrajectory {
  // frames x joints, each a 3-vector
  std::vector<std::vector<Eigen::Vector3d>> frames;

  std::size_t joint_count() const { return frames.empty() ? 0 : frames.front().size(); }
  void validate() const;
};

struct FeatureSet {
  Eigen::MatrixXd features;  // M x d, one row per sequence
};

/// Mean per-joint position error of one sequence, millimeters.
double mpjpe(const JointTrajectory& pred, const JointTrajectory& gt);

/// Mean of per-sequence values over a batch, millimeters.
double mpjpe_set(const std::vector<JointTrajectory>& pred, const std::vector<JointTrajectory>& gt);

/// Final placement error, millimeters.
double fpl(const Eigen::Vector3d& pred_final_center, const Eigen::Vector3d& gt_final_center);
double fpl_set(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt);

/// Final orientation error in degrees, trace formula with clamped arccos.
double fol(const Eigen::Matrix3d& pred_final_rot, const Eigen::Matrix3d& gt_final_rot);
double fol_set(const std::vector<Eigen::Matrix3d>& pred, const std::vector<Eigen::Matrix3d>& gt);

/// Sequence embedding: mean over chunk windows of the quantized latent e_c.
Eigen::VectorXd extract_features(const hand::HandTrajectory& sequence, const vq::CoderNet& encoder,
                                 const vq::Codebook& codebook, const vq::PoseChunkSpec& spec);

/// Frechet distance between Gaussian fits of the two feature sets; unbiased
/// covariances, symmetric square root with negative eigenvalues clamped to 0.
double fid(const FeatureSet& real, const FeatureSet& generated);

/// Mean pairwise feature distance.
double diversity(const FeatureSet& features);

}  // namespace dextok::metrics
