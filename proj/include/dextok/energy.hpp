#pragma once

#include <Eigen/Core>

#include "dextok/geometry.hpp"
#include "dextok/handmodel.hpp"
#include "dextok/pointcloud.hpp"

namespace dextok::energy {

enum class KernelKind {
  quad_exp,     // quadratic outside, exponential-linear inside, C1 at d=0
  smoothed_abs  // sqrt(d^2 + delta^2) - delta, baseline for the noise study
};

struct ContactKernelParams {
  double alpha = 1.0;     // 1/m^2 scale of the outside branch
  double k = 1.0;         // 1/m decay of the inside branch
  double lambda_c = 100.0;  // contact weight
  double epsilon = 1e-8;  // residual-row regularizer
  KernelKind kind = KernelKind::quad_exp;
  double delta = 1e-6;  // smoothing width of the baseline kernel

  void validate() const;  // throws ConfigError when not strictly positive
};

/// Diagonal weights of the generative and temporal priors.
struct PriorWeights {
  Eigen::VectorXd w_gen;
  Eigen::VectorXd w_vel;
  Eigen::VectorXd w_acc;

  static PriorWeights uniform(int dof, double gen, double vel, double acc);
  void validate(int dof) const;
};

/// Stacked per-fingertip contact residuals at one configuration.
struct ContactResidual {
  Eigen::VectorXd residuals;  // F entries, each >= 0
  Eigen::MatrixXd jacobian;   // F x D
  Eigen::VectorXd distances;  // signed point-to-plane distances, meters
};

double kernel(double d, const ContactKernelParams& params);
double kernel_derivative(double d, const ContactKernelParams& params);

/// Queries one nearest neighbor per fingertip in the object frame and builds
/// the residual vector and its Jacobian. Correspondences are computed once
/// here and treated as fixed by the caller's linearization.
ContactResidual contact_residual(const hand::HandConfiguration& q,
                                 const hand::KinematicChain& chain,
                                 const cloud::NeighborIndex& index,
                                 const geom::RigidTransform& t_tar,
                                 const ContactKernelParams& params);

double contact_energy(const ContactResidual& residual);

double generative_energy(const Eigen::VectorXd& q, const Eigen::VectorXd& q_gen,
                         const Eigen::VectorXd& w_gen);

double temporal_energy(const Eigen::VectorXd& q, const Eigen::VectorXd& q_prev,
                       const Eigen::VectorXd& q_prev2, const Eigen::VectorXd& w_vel,
                       const Eigen::VectorXd& w_acc);

/// Gradient of generative_energy + temporal_energy at q; the linear term on
/// the right-hand side of the normal equations.
Eigen::VectorXd prior_gradient(const Eigen::VectorXd& q, const Eigen::VectorXd& q_gen,
                               const Eigen::VectorXd& q_prev, const Eigen::VectorXd& q_prev2,
                               const PriorWeights& weights);

}  // namespace dextok::energy
