#include "dextok/retarget.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "dextok/common.hpp"

namespace dextok::retarget {

void RetargetSpec::validate(const hand::KinematicChain& chain) const {
  if (correspondences.empty()) throw DataError("retarget: no correspondences");
  for (const Correspondence& c : correspondences) {
    chain.link_index(c.link);  // throws on unknown link
    if (c.keypoint < 0) throw DataError("retarget: negative keypoint index");
    if (!std::isfinite(c.weight) || c.weight < 0.0)
      throw DataError("retarget: weight for link '" + c.link + "' must be finite and >= 0");
    if (!std::isfinite(c.scale)) throw DataError("retarget: non-finite scale");
  }
  if (lambda_smooth < 0.0) throw ConfigError("retarget: lambda_smooth must be >= 0");
}

std::vector<Eigen::Vector3d> align_targets(const KeypointFrame& frame, const RetargetSpec& spec) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(spec.correspondences.size());
  const Eigen::Vector3d origin = spec.device_alignment.translation();
  for (const Correspondence& c : spec.correspondences) {
    if (c.keypoint >= static_cast<int>(frame.positions.size()))
      throw DataError("retarget: keypoint index " + std::to_string(c.keypoint) +
                      " out of range for a frame with " + std::to_string(frame.positions.size()) +
                      " keypoints");
    const Eigen::Vector3d aligned = geom::apply(spec.device_alignment, frame.positions[c.keypoint]);
    out.push_back(origin + c.scale * (aligned - origin));
  }
  return out;
}

namespace {

// Residual stack: sqrt(2 w_k) (f_k(q) - target_k) per correspondence, so
// 1/2 ||r||^2 equals sum_k w_k ||f_k - target_k||^2. The smoothness term
// lambda ||q - q_prev||^2 enters as a diagonal prior with weight 2 lambda.
void keypoint_residuals(const Eigen::VectorXd& q, const std::vector<Eigen::Vector3d>& targets,
                        const hand::KinematicChain& chain, const RetargetSpec& spec,
                        const std::vector<int>& links, Eigen::VectorXd& r, Eigen::MatrixXd& jac) {
  const int n = static_cast<int>(spec.correspondences.size());
  const int dof = chain.dof();
  r.resize(3 * n);
  jac.resize(3 * n, dof);

  const auto world = hand::forward_kinematics(chain, q);
  for (int k = 0; k < n; ++k) {
    const double sw = std::sqrt(2.0 * spec.correspondences[k].weight);
    const Eigen::Vector3d pos = world[links[k]].translation();
    r.segment<3>(3 * k) = sw * (pos - targets[k]);

    Eigen::MatrixXd jk = Eigen::MatrixXd::Zero(3, dof);
    for (int ji : chain.ancestor_joints(links[k])) {
      const hand::Joint& j = chain.joints()[ji];
      if (j.q_index < 0) continue;
      const geom::RigidTransform frame = geom::compose(world[j.parent_link], j.origin);
      const Eigen::Vector3d axis_w = frame.rotation() * j.axis;
      if (j.type == hand::JointType::revolute)
        jk.col(j.q_index) = axis_w.cross(pos - frame.translation());
      else
        jk.col(j.q_index) = axis_w;
    }
    jac.middleRows(3 * k, 3) = sw * jk;
  }
}

}  // namespace

double retarget_objective(const Eigen::VectorXd& q, const std::vector<Eigen::Vector3d>& targets,
                          const hand::HandConfiguration& q_prev,
                          const hand::KinematicChain& chain, const RetargetSpec& spec) {
  const auto world = hand::forward_kinematics(chain, q);
  double obj = 0.0;
  for (std::size_t k = 0; k < spec.correspondences.size(); ++k) {
    const int link = chain.link_index(spec.correspondences[k].link);
    obj += spec.correspondences[k].weight * (world[link].translation() - targets[k]).squaredNorm();
  }
  obj += spec.lambda_smooth * (q - q_prev).squaredNorm();
  return obj;
}

hand::HandConfiguration retarget_frame(const std::vector<Eigen::Vector3d>& targets,
                                       const hand::HandConfiguration& q_prev,
                                       const hand::KinematicChain& chain,
                                       const RetargetSpec& spec,
                                       const refine::RefinementConfig& solver_config) {
  spec.validate(chain);
  if (targets.size() != spec.correspondences.size())
    throw DataError("retarget: target count does not match correspondences");
  if (q_prev.size() != chain.dof()) throw DataError("retarget: q_prev dof mismatch");

  std::vector<int> links;
  links.reserve(spec.correspondences.size());
  for (const Correspondence& c : spec.correspondences) links.push_back(chain.link_index(c.link));

  energy::PriorWeights weights =
      energy::PriorWeights::uniform(chain.dof(), 0.0, 2.0 * spec.lambda_smooth, 0.0);

  refine::LmCallbacks cb;
  cb.linearize = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd& jac,
                     Eigen::VectorXd& prior_grad) {
    keypoint_residuals(q, targets, chain, spec, links, r, jac);
    prior_grad = 2.0 * spec.lambda_smooth * (q - q_prev);
  };
  cb.objective = [&](const Eigen::VectorXd& q) {
    return retarget_objective(q, targets, q_prev, chain, spec);
  };
  cb.project = [&](const Eigen::VectorXd& q) { return hand::clamp_to_limits(chain, q); };

  const hand::HandConfiguration start = hand::clamp_to_limits(chain, q_prev);
  return refine::lm_minimize(start, cb, weights, solver_config).q;
}

hand::HandTrajectory retarget_sequence(const std::vector<KeypointFrame>& keypoint_traj,
                                       const hand::KinematicChain& chain,
                                       const RetargetSpec& spec,
                                       const refine::RefinementConfig& solver_config,
                                       const hand::HandConfiguration& q_init) {
  if (keypoint_traj.empty()) throw DataError("retarget: empty keypoint trajectory");
  hand::HandTrajectory out;
  out.frames.reserve(keypoint_traj.size());
  hand::HandConfiguration q_prev = q_init;
  for (const KeypointFrame& frame : keypoint_traj) {
    const auto targets = align_targets(frame, spec);
    hand::HandConfiguration q = retarget_frame(targets, q_prev, chain, spec, solver_config);
    q_prev = q;
    out.frames.push_back(std::move(q));
  }
  return out;
}

}  // namespace dextok::retarget
