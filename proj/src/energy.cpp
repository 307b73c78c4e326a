#include "dextok/energy.hpp"

#include <cmath>

#include "dextok/common.hpp"

namespace dextok::energy {

void ContactKernelParams::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("kernel: alpha must be > 0");
  if (!(k > 0.0)) throw ConfigError("kernel: k must be > 0");
  if (!(lambda_c > 0.0)) throw ConfigError("kernel: lambda_c must be > 0");
  if (!(epsilon > 0.0)) throw ConfigError("kernel: epsilon must be > 0");
  if (!(delta > 0.0)) throw ConfigError("kernel: delta must be > 0");
}

PriorWeights PriorWeights::uniform(int dof, double gen, double vel, double acc) {
  PriorWeights w;
  w.w_gen = Eigen::VectorXd::Constant(dof, gen);
  w.w_vel = Eigen::VectorXd::Constant(dof, vel);
  w.w_acc = Eigen::VectorXd::Constant(dof, acc);
  return w;
}

void PriorWeights::validate(int dof) const {
  if (w_gen.size() != dof || w_vel.size() != dof || w_acc.size() != dof)
    throw ConfigError("priors: weight vectors must have one entry per dof");
  if ((w_gen.array() < 0).any() || (w_vel.array() < 0).any() || (w_acc.array() < 0).any())
    throw ConfigError("priors: weights must be nonnegative");
}

double kernel(double d, const ContactKernelParams& params) {
  if (params.kind == KernelKind::smoothed_abs)
    return std::sqrt(d * d + params.delta * params.delta) - params.delta;
  if (d >= 0.0) return 0.5 * params.alpha * d * d;
  // expm1 keeps e^{-kd} + kd - 1 accurate near d = 0, where the direct form
  // cancels to noise and destabilizes the residual rows.
  return params.alpha / (params.k * params.k) * (std::expm1(-params.k * d) + params.k * d);
}

double kernel_derivative(double d, const ContactKernelParams& params) {
  if (params.kind == KernelKind::smoothed_abs)
    return d / std::sqrt(d * d + params.delta * params.delta);
  if (d >= 0.0) return params.alpha * d;
  return -params.alpha / params.k * std::expm1(-params.k * d);
}

ContactResidual contact_residual(const hand::HandConfiguration& q,
                                 const hand::KinematicChain& chain,
                                 const cloud::NeighborIndex& index,
                                 const geom::RigidTransform& t_tar,
                                 const ContactKernelParams& params) {
  params.validate();
  const int f_count = chain.fingertip_count();
  const int dof = chain.dof();

  ContactResidual out;
  out.residuals.resize(f_count);
  out.jacobian.resize(f_count, dof);
  out.distances.resize(f_count);

  const geom::RigidTransform obj_from_world = geom::inverse(t_tar);
  const Eigen::Matrix3d rot_t = t_tar.rotation().transpose();
  const double sqrt_2lc = std::sqrt(2.0 * params.lambda_c);

  const auto tips = hand::fingertip_positions(chain, q);
  for (int i = 0; i < f_count; ++i) {
    const Eigen::Vector3d x_obj = geom::apply(obj_from_world, tips[i]);
    const cloud::NearestHit hit = index.nearest(x_obj);
    const double d = hit.normal.dot(x_obj - hit.point);
    out.distances[i] = d;

    const double f = kernel(d, params);
    const double fp = kernel_derivative(d, params);
    out.residuals[i] = std::sqrt(2.0 * params.lambda_c * f);

    // d r_i / d q = sqrt(2 lc) f'(d) / (2 sqrt(f) + eps^2) * n^T R^T J_world
    const double gain = sqrt_2lc * fp / (2.0 * std::sqrt(f) + params.epsilon * params.epsilon);
    const Eigen::MatrixXd jac_world = hand::fingertip_jacobian(chain, q, i);
    out.jacobian.row(i) = gain * (hit.normal.transpose() * rot_t * jac_world);
  }
  return out;
}

double contact_energy(const ContactResidual& residual) {
  return 0.5 * residual.residuals.squaredNorm();
}

double generative_energy(const Eigen::VectorXd& q, const Eigen::VectorXd& q_gen,
                         const Eigen::VectorXd& w_gen) {
  if (q.size() != q_gen.size() || q.size() != w_gen.size())
    throw DataError("generative_energy: length mismatch");
  const Eigen::VectorXd d = q - q_gen;
  return 0.5 * d.dot(w_gen.cwiseProduct(d));
}

double temporal_energy(const Eigen::VectorXd& q, const Eigen::VectorXd& q_prev,
                       const Eigen::VectorXd& q_prev2, const Eigen::VectorXd& w_vel,
                       const Eigen::VectorXd& w_acc) {
  if (q.size() != q_prev.size() || q.size() != q_prev2.size() || q.size() != w_vel.size() ||
      q.size() != w_acc.size())
    throw DataError("temporal_energy: length mismatch");
  const Eigen::VectorXd vel = q - q_prev;
  const Eigen::VectorXd acc = vel - (q_prev - q_prev2);
  return 0.5 * vel.dot(w_vel.cwiseProduct(vel)) + 0.5 * acc.dot(w_acc.cwiseProduct(acc));
}

Eigen::VectorXd prior_gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& q_gen,
                               const Eigen::VectorXd& q_prev, const Eigen::VectorXd& q_prev2,
                               const PriorWeights& weights) {
  if (q.size() != q_gen.size() || q.size() != q_prev.size() || q.size() != q_prev2.size())
    throw DataError("prior_gradient: length mismatch");
  weights.validate(static_cast<int>(q.size()));
  const Eigen::VectorXd vel = q - q_prev;
  const Eigen::VectorXd acc = vel - (q_prev - q_prev2);
  return weights.w_gen.cwiseProduct(q - q_gen) + weights.w_vel.cwiseProduct(vel) +
         weights.w_acc.cwiseProduct(acc);
}

}  // namespace dextok::energy
