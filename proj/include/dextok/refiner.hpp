#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dextok/common.hpp"
#include "dextok/energy.hpp"
#include "dextok/geometry.hpp"
#include "dextok/handmodel.hpp"
#include "dextok/pointcloud.hpp"

namespace dextok::refine {

struct RefinementConfig {
  energy::ContactKernelParams kernel;
  double w_gen = 1.0;
  double w_vel = 0.5;
  double w_acc = 0.25;
  double lambda_init = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 0.5;
  int max_inner_iters = 50;
  double step_tol = 1e-6;
  double energy_tol = 1e-9;
  bool clamp_to_limits = true;

  void validate() const;
  energy::PriorWeights weights_for(int dof) const;
};

struct StepRecord {
  int iteration = 0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double lambda = 0.0;
  double step_norm = 0.0;
  bool accepted = false;
};

struct FrameTrace {
  std::vector<StepRecord> steps;
  Eigen::VectorXd final_distances;  // per-fingertip signed distances (contact runs)
};

using RefinementTrace = std::vector<FrameTrace>;

/// Thrown when a frame produces a non-finite energy; carries everything
/// refined before the failure.
struct RefineAbort : NumericalError {
  RefineAbort(const std::string& msg, int frame, hand::HandTrajectory partial,
              RefinementTrace trace)
      : NumericalError(msg), frame(frame), partial(std::move(partial)), trace(std::move(trace)) {}
  int frame;
  hand::HandTrajectory partial;
  RefinementTrace trace;
};

/// Solves (J^T J + diag(w_gen + w_vel + w_acc) + lambda I) dq = -J^T r - prior_grad.
/// Throws NumericalError when the system is singular or the factorization
/// cannot reach residual <= 1e-10 * ||rhs||.
Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& jacobian,
                                       const Eigen::VectorXd& residual,
                                       const energy::PriorWeights& weights, double lambda,
                                       const Eigen::VectorXd& prior_grad);

double lm_update(double lambda, bool accepted, const RefinementConfig& config);

// Generic damped Gauss-Newton loop. `linearize` fills residuals, Jacobian and
// the prior gradient at q (correspondences are re-queried every call);
// `objective` evaluates the true energy; `project` maps candidates back to
// the feasible box.
struct LmCallbacks {
  std::function<void(const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd& jac,
                     Eigen::VectorXd& prior_grad)>
      linearize;
  std::function<double(const Eigen::VectorXd& q)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& q)> project;
};

struct LmResult {
  Eigen::VectorXd q;
  std::vector<StepRecord> steps;
};

LmResult lm_minimize(const Eigen::VectorXd& q0, const LmCallbacks& callbacks,
                     const energy::PriorWeights& weights, const RefinementConfig& config);

struct FrameResult {
  hand::HandConfiguration q;
  FrameTrace trace;
};

FrameResult refine_frame(const hand::HandConfiguration& q_gen_t,
                         const hand::HandConfiguration& q_prev_opt,
                         const hand::HandConfiguration& q_prev2_opt,
                         const hand::KinematicChain& chain, const cloud::NeighborIndex& index,
                         const geom::RigidTransform& t_tar, const RefinementConfig& config);

struct SequenceResult {
  hand::HandTrajectory refined;
  RefinementTrace trace;
};

SequenceResult refine_sequence(const hand::HandTrajectory& gen_traj,
                               const cloud::OrientedPointCloud& object_cloud,
                               const geom::TargetPoseTrajectory& t_tar_traj,
                               const hand::KinematicChain& chain,
                               const RefinementConfig& config);

struct NoiseStudyRow {
  std::string kernel;  // "quad_exp" or "smoothed_abs"
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double deviation = 0.0;  // mean fingertip distance to the clean-cloud optimum, meters
};

struct NoiseStudyReport {
  std::vector<NoiseStudyRow> rows;
};

/// Perturbs the cloud with isotropic Gaussian noise and refines the canonical
/// grasp under both the asymmetric kernel and the smoothed-|d| baseline,
/// measuring each arm against its own clean-cloud optimum.
NoiseStudyReport noise_study(const cloud::OrientedPointCloud& clean_cloud,
                             const std::vector<double>& sigma_levels, int seeds,
                             const hand::KinematicChain& chain,
                             const hand::HandConfiguration& q_gen,
                             const geom::RigidTransform& t_tar, const RefinementConfig& config,
                             std::uint64_t base_seed);

}  // namespace dextok::refine
