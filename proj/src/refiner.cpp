#include "dextok/refiner.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dextok/common.hpp"

namespace dextok::refine {

void RefinementConfig::validate() const {
  kernel.validate();
  if (w_gen < 0 || w_vel < 0 || w_acc < 0) throw ConfigError("refine: prior weights must be >= 0");
  if (lambda_init < 0) throw ConfigError("refine: lambda_init must be >= 0");
  if (!(lambda_up > 1.0)) throw ConfigError("refine: lambda_up must be > 1");
  if (!(lambda_down > 0.0 && lambda_down < 1.0))
    throw ConfigError("refine: lambda_down must be in (0,1)");
  if (max_inner_iters < 1) throw ConfigError("refine: max_inner_iters must be >= 1");
  if (!(step_tol > 0.0)) throw ConfigError("refine: step_tol must be > 0");
  if (!(energy_tol > 0.0)) throw ConfigError("refine: energy_tol must be > 0");
}

energy::PriorWeights RefinementConfig::weights_for(int dof) const {
  return energy::PriorWeights::uniform(dof, w_gen, w_vel, w_acc);
}

Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& jacobian,
                                       const Eigen::VectorXd& residual,
                                       const energy::PriorWeights& weights, double lambda,
                                       const Eigen::VectorXd& prior_grad) {
  const Eigen::Index dof = jacobian.cols();
  if (residual.size() != jacobian.rows())
    throw DataError("solve: residual length does not match Jacobian rows");
  if (prior_grad.size() != dof) throw DataError("solve: prior gradient length mismatch");
  weights.validate(static_cast<int>(dof));
  if (lambda < 0.0) throw ConfigError("solve: lambda must be >= 0");

  Eigen::MatrixXd a = jacobian.transpose() * jacobian;
  a.diagonal() += weights.w_gen + weights.w_vel + weights.w_acc;
  a.diagonal().array() += lambda;
  const Eigen::VectorXd b = -jacobian.transpose() * residual - prior_grad;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("solve: factorization of the normal-equation matrix failed");
  const Eigen::VectorXd pivots = ldlt.vectorD();
  const double pivot_max = pivots.maxCoeff();
  if (pivots.minCoeff() <= 1e-13 * std::max(pivot_max, 1e-300))
    throw NumericalError("solve: normal-equation system is singular");

  Eigen::VectorXd dq = ldlt.solve(b);
  dq += ldlt.solve(b - a * dq);  // one refinement pass

  const double rhs_norm = b.norm();
  if ((a * dq - b).norm() > 1e-10 * std::max(rhs_norm, 1e-300))
    throw NumericalError("solve: residual exceeds 1e-10 * ||rhs||");
  return dq;
}

double lm_update(double lambda, bool accepted, const RefinementConfig& config) {
  if (lambda < 0.0) throw ConfigError("lm_update: lambda must be >= 0");
  if (accepted) return std::max(lambda * config.lambda_down, 1e-12);
  return lambda * config.lambda_up;
}

LmResult lm_minimize(const Eigen::VectorXd& q0, const LmCallbacks& callbacks,
                     const energy::PriorWeights& weights, const RefinementConfig& config) {
  config.validate();

  LmResult result;
  result.q = q0;
  double energy = callbacks.objective(result.q);
  if (!std::isfinite(energy)) throw NumericalError("lm: non-finite energy at the initial point");

  double lambda = config.lambda_init;
  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  Eigen::VectorXd prior_grad;

  for (int it = 1; it <= config.max_inner_iters; ++it) {
    callbacks.linearize(result.q, r, jac, prior_grad);
    const Eigen::VectorXd dq = solve_normal_equations(jac, r, weights, lambda, prior_grad);
    Eigen::VectorXd candidate = result.q + dq;
    if (callbacks.project) candidate = callbacks.project(candidate);

    const double candidate_energy = callbacks.objective(candidate);
    if (!std::isfinite(candidate_energy))
      throw NumericalError("lm: non-finite energy at iteration " + std::to_string(it));

    StepRecord rec;
    rec.iteration = it;
    rec.energy_before = energy;
    rec.energy_after = candidate_energy;
    rec.lambda = lambda;
    rec.step_norm = dq.norm();
    rec.accepted = candidate_energy < energy;
    result.steps.push_back(rec);

    lambda = lm_update(lambda, rec.accepted, config);
    if (rec.accepted) {
      const double decrease = energy - candidate_energy;
      result.q = candidate;
      energy = candidate_energy;
      if (rec.step_norm < config.step_tol) break;
      if (decrease < config.energy_tol * std::max(rec.energy_before, 1e-30)) break;
    } else if (rec.step_norm < config.step_tol) {
      // Proposal is vanishing; no smaller step can be accepted.
      break;
    }
  }
  return result;
}

namespace {

double total_energy(const Eigen::VectorXd& q, const hand::HandConfiguration& q_gen,
                    const hand::HandConfiguration& q_prev, const hand::HandConfiguration& q_prev2,
                    const hand::KinematicChain& chain, const cloud::NeighborIndex& index,
                    const geom::RigidTransform& t_tar, const RefinementConfig& config,
                    const energy::PriorWeights& weights) {
  const geom::RigidTransform obj_from_world = geom::inverse(t_tar);
  const auto tips = hand::fingertip_positions(chain, q);
  double contact = 0.0;
  for (const Eigen::Vector3d& tip : tips) {
    const Eigen::Vector3d x_obj = geom::apply(obj_from_world, tip);
    const cloud::NearestHit hit = index.nearest(x_obj);
    contact += energy::kernel(hit.normal.dot(x_obj - hit.point), config.kernel);
  }
  contact *= config.kernel.lambda_c;
  return contact + energy::generative_energy(q, q_gen, weights.w_gen) +
         energy::temporal_energy(q, q_prev, q_prev2, weights.w_vel, weights.w_acc);
}

}  // namespace

FrameResult refine_frame(const hand::HandConfiguration& q_gen_t,
                         const hand::HandConfiguration& q_prev_opt,
                         const hand::HandConfiguration& q_prev2_opt,
                         const hand::KinematicChain& chain, const cloud::NeighborIndex& index,
                         const geom::RigidTransform& t_tar, const RefinementConfig& config) {
  if (q_gen_t.size() != chain.dof() || q_prev_opt.size() != chain.dof() ||
      q_prev2_opt.size() != chain.dof())
    throw DataError("refine: configuration length does not match chain dof");

  const energy::PriorWeights weights = config.weights_for(chain.dof());

  LmCallbacks cb;
  cb.linearize = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd& jac,
                     Eigen::VectorXd& prior_grad) {
    const energy::ContactResidual cr =
        energy::contact_residual(q, chain, index, t_tar, config.kernel);
    r = cr.residuals;
    jac = cr.jacobian;
    prior_grad = energy::prior_gradient(q, q_gen_t, q_prev_opt, q_prev2_opt, weights);
  };
  cb.objective = [&](const Eigen::VectorXd& q) {
    return total_energy(q, q_gen_t, q_prev_opt, q_prev2_opt, chain, index, t_tar, config, weights);
  };
  if (config.clamp_to_limits)
    cb.project = [&](const Eigen::VectorXd& q) { return hand::clamp_to_limits(chain, q); };

  const LmResult lm = lm_minimize(q_gen_t, cb, weights, config);

  FrameResult out;
  out.q = lm.q;
  out.trace.steps = lm.steps;
  out.trace.final_distances =
      energy::contact_residual(lm.q, chain, index, t_tar, config.kernel).distances;
  return out;
}

SequenceResult refine_sequence(const hand::HandTrajectory& gen_traj,
                               const cloud::OrientedPointCloud& object_cloud,
                               const geom::TargetPoseTrajectory& t_tar_traj,
                               const hand::KinematicChain& chain,
                               const RefinementConfig& config) {
  if (gen_traj.frames.empty()) throw DataError("refine: empty generated trajectory");
  if (gen_traj.frames.size() != t_tar_traj.frames.size())
    throw DataError("refine: trajectory has " + std::to_string(gen_traj.frames.size()) +
                    " frames but target poses have " + std::to_string(t_tar_traj.frames.size()));
  for (const auto& f : gen_traj.frames)
    if (f.size() != chain.dof()) throw DataError("refine: frame dof does not match chain");

  object_cloud.validate();
  const cloud::NeighborIndex index(object_cloud);

  SequenceResult out;
  out.refined.frames.reserve(gen_traj.frames.size());

  // Boundary priors: the history before t=0 is pinned to the first generated
  // configuration, so the temporal term vanishes there at initialization.
  hand::HandConfiguration q_prev = gen_traj.frames.front();
  hand::HandConfiguration q_prev2 = gen_traj.frames.front();

  for (std::size_t t = 0; t < gen_traj.frames.size(); ++t) {
    try {
      FrameResult fr =
          refine_frame(gen_traj.frames[t], q_prev, q_prev2, chain, index, t_tar_traj.frames[t], config);
      out.trace.push_back(std::move(fr.trace));
      q_prev2 = q_prev;
      q_prev = fr.q;
      out.refined.frames.push_back(std::move(fr.q));
    } catch (const NumericalError& e) {
      throw RefineAbort("refine: frame " + std::to_string(t) + " failed: " + e.what(),
                        static_cast<int>(t), std::move(out.refined), std::move(out.trace));
    }
  }
  return out;
}

NoiseStudyReport noise_study(const cloud::OrientedPointCloud& clean_cloud,
                             const std::vector<double>& sigma_levels, int seeds,
                             const hand::KinematicChain& chain,
                             const hand::HandConfiguration& q_gen,
                             const geom::RigidTransform& t_tar, const RefinementConfig& config,
                             std::uint64_t base_seed) {
  clean_cloud.validate();
  if (seeds < 1) throw ConfigError("noise_study: seeds must be >= 1");

  const geom::TargetPoseTrajectory single_pose{{t_tar}, 0.0};
  hand::HandTrajectory single_frame;
  single_frame.frames = {q_gen};

  struct Arm {
    energy::KernelKind kind;
    const char* name;
  };
  const Arm arms[2] = {{energy::KernelKind::quad_exp, "quad_exp"},
                       {energy::KernelKind::smoothed_abs, "smoothed_abs"}};

  auto refine_on = [&](const cloud::OrientedPointCloud& c, energy::KernelKind kind) {
    RefinementConfig cfg = config;
    cfg.kernel.kind = kind;
    const SequenceResult res = refine_sequence(single_frame, c, single_pose, chain, cfg);
    return hand::fingertip_positions(chain, res.refined.frames.front());
  };

  // Clean-cloud optimum per kernel; each noisy run is measured against its
  // own kernel's optimum.
  std::vector<Eigen::Vector3d> clean_opt[2] = {refine_on(clean_cloud, arms[0].kind),
                                               refine_on(clean_cloud, arms[1].kind)};

  NoiseStudyReport report;
  for (std::size_t si = 0; si < sigma_levels.size(); ++si) {
    const double sigma = sigma_levels[si];
    for (int s = 0; s < seeds; ++s) {
      cloud::OrientedPointCloud noisy = clean_cloud;
      Rng rng(base_seed ^ (0x517cc1b727220a95ULL * (si + 1)) ^ (0x2545f4914f6cdd1dULL * (s + 1)));
      for (Eigen::Vector3d& p : noisy.points)
        p += sigma * Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());

      for (int a = 0; a < 2; ++a) {
        const auto tips = refine_on(noisy, arms[a].kind);
        double dev = 0.0;
        for (std::size_t i = 0; i < tips.size(); ++i) dev += (tips[i] - clean_opt[a][i]).norm();
        dev /= static_cast<double>(tips.size());

        NoiseStudyRow row;
        row.kernel = arms[a].name;
        row.sigma = sigma;
        row.seed = static_cast<std::uint64_t>(s);
        row.deviation = dev;
        report.rows.push_back(std::move(row));
      }
    }
  }
  return report;
}

}  // namespace dextok::refine
