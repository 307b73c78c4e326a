#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dextok/geometry.hpp"
#include "dextok/handmodel.hpp"
#include "dextok/refiner.hpp"

namespace dextok::retarget {

struct Correspondence {
  std::string link;    // chain link whose FK position tracks the keypoint
  int keypoint = 0;    // index into the source keypoint frame
  double weight = 1.0;
  double scale = 1.0;  // link-length scale applied about the alignment origin
};

struct RetargetSpec {
  std::vector<Correspondence> correspondences;
  geom::RigidTransform device_alignment;
  double lambda_smooth = 0.1;

  void validate(const hand::KinematicChain& chain) const;
};

/// One frame of source keypoints, already expressed in the source convention.
struct KeypointFrame {
  std::vector<Eigen::Vector3d> positions;
};

/// Maps source keypoints into the device frame: alignment transform followed
/// by the per-correspondence scale about the alignment origin. Output order
/// follows spec.correspondences.
std::vector<Eigen::Vector3d> align_targets(const KeypointFrame& frame, const RetargetSpec& spec);

hand::HandConfiguration retarget_frame(const std::vector<Eigen::Vector3d>& targets,
                                       const hand::HandConfiguration& q_prev,
                                       const hand::KinematicChain& chain,
                                       const RetargetSpec& spec,
                                       const refine::RefinementConfig& solver_config);

hand::HandTrajectory retarget_sequence(const std::vector<KeypointFrame>& keypoint_traj,
                                       const hand::KinematicChain& chain,
                                       const RetargetSpec& spec,
                                       const refine::RefinementConfig& solver_config,
                                       const hand::HandConfiguration& q_init);

/// Value of the retargeting objective at q (for tests and traces).
double retarget_objective(const Eigen::VectorXd& q, const std::vector<Eigen::Vector3d>& targets,
                          const hand::HandConfiguration& q_prev,
                          const hand::KinematicChain& chain, const RetargetSpec& spec);

}  // namespace dextok::retarget
