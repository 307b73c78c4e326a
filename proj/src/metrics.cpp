#include "dextok/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dextok/common.hpp"
#include "dextok/simd.hpp"

namespace dextok::metrics {

namespace {
constexpr double kMetersToMillimeters = 1000.0;
constexpr double kRadiansToDegrees = 57.295779513082320876798154814105;
}  // namespace

void JointTrajectory::validate() const {
  if (frames.empty()) throw DataError("metrics: empty joint trajectory");
  const std::size_t j = frames.front().size();
  if (j == 0) throw DataError("metrics: trajectory has zero joints");
  for (const auto& f : frames)
    if (f.size() != j) throw DataError("metrics: inconsistent joint count across frames");
}

double mpjpe(const JointTrajectory& pred, const JointTrajectory& gt) {
  pred.validate();
  gt.validate();
  if (pred.frames.size() != gt.frames.size() || pred.joint_count() != gt.joint_count())
    throw DataError("mpjpe: shape mismatch between prediction and ground truth");
  double sum = 0.0;
  for (std::size_t t = 0; t < pred.frames.size(); ++t)
    for (std::size_t j = 0; j < pred.joint_count(); ++j)
      sum += (pred.frames[t][j] - gt.frames[t][j]).norm();
  return kMetersToMillimeters * sum /
         static_cast<double>(pred.frames.size() * pred.joint_count());
}

double mpjpe_set(const std::vector<JointTrajectory>& pred,
                 const std::vector<JointTrajectory>& gt) {
  if (pred.empty() || pred.size() != gt.size()) throw DataError("mpjpe: batch size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += mpjpe(pred[i], gt[i]);
  return sum / static_cast<double>(pred.size());
}

double fpl(const Eigen::Vector3d& pred_final_center, const Eigen::Vector3d& gt_final_center) {
  return kMetersToMillimeters * (pred_final_center - gt_final_center).norm();
}

double fpl_set(const std::vector<Eigen::Vector3d>& pred, const std::vector<Eigen::Vector3d>& gt) {
  if (pred.empty() || pred.size() != gt.size()) throw DataError("fpl: batch size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += fpl(pred[i], gt[i]);
  return sum / static_cast<double>(pred.size());
}

double fol(const Eigen::Matrix3d& pred_final_rot, const Eigen::Matrix3d& gt_final_rot) {
  auto check = [](const Eigen::Matrix3d& r, const char* which) {
    if ((r.transpose() * r - Eigen::Matrix3d::Identity()).norm() > 1e-6)
      throw DataError(std::string("fol: ") + which + " rotation is not orthonormal");
  };
  check(pred_final_rot, "predicted");
  check(gt_final_rot, "ground-truth");
  const double t = (gt_final_rot.transpose() * pred_final_rot).trace();
  const double c = std::clamp((t - 1.0) / 2.0, -1.0, 1.0);
  return kRadiansToDegrees * std::acos(c);
}

double fol_set(const std::vector<Eigen::Matrix3d>& pred, const std::vector<Eigen::Matrix3d>& gt) {
  if (pred.empty() || pred.size() != gt.size()) throw DataError("fol: batch size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += fol(pred[i], gt[i]);
  return sum / static_cast<double>(pred.size());
}

Eigen::VectorXd extract_features(const hand::HandTrajectory& sequence, const vq::CoderNet& encoder,
                                 const vq::Codebook& codebook, const vq::PoseChunkSpec& spec) {
  const auto chunks = vq::chunk_trajectory(sequence.frames, spec);
  if (chunks.empty())
    throw DataError("features: sequence shorter than one chunk window (" +
                    std::to_string(sequence.frames.size()) + " < " +
                    std::to_string(spec.window) + ")");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(codebook.latent_dim);
  for (const auto& chunk : chunks) {
    const std::size_t c = vq::quantize(codebook, encoder.forward(chunk));
    mean += Eigen::Map<const Eigen::VectorXd>(codebook.code(c), codebook.latent_dim);
  }
  return mean / static_cast<double>(chunks.size());
}

namespace {

void validate_features(const FeatureSet& set, const char* which) {
  if (set.features.rows() < 2)
    throw DataError(std::string("fid: need at least 2 ") + which + " feature rows");
  if (!set.features.allFinite())
    throw DataError(std::string("fid: non-finite entries in ") + which + " features");
}

// Unbiased covariance (divide by M-1).
Eigen::MatrixXd covariance(const Eigen::MatrixXd& rows) {
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
}

// PSD square root via eigendecomposition; negative eigenvalues clamp to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double fid(const FeatureSet& real, const FeatureSet& generated) {
  validate_features(real, "real");
  validate_features(generated, "generated");
  if (real.features.cols() != generated.features.cols())
    throw DataError("fid: feature dimensions differ");

  const Eigen::VectorXd mu_r = real.features.colwise().mean();
  const Eigen::VectorXd mu_g = generated.features.colwise().mean();
  const Eigen::MatrixXd sigma_r = covariance(real.features);
  const Eigen::MatrixXd sigma_g = covariance(generated.features);

  // Tr((Sigma_r Sigma_g)^{1/2}) through the symmetric product
  // (Sigma_r^{1/2} Sigma_g Sigma_r^{1/2})^{1/2}.
  const Eigen::MatrixXd root_r = psd_sqrt(sigma_r);
  const Eigen::MatrixXd inner = root_r * sigma_g * root_r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()));
  const double trace_sqrt = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  // identical sets can round a hair below zero; the distance itself is >= 0
  const double value =
      (mu_r - mu_g).squaredNorm() + sigma_r.trace() + sigma_g.trace() - 2.0 * trace_sqrt;
  return std::max(0.0, value);
}

double diversity(const FeatureSet& features) {
  const Eigen::Index m = features.features.rows();
  if (m < 2) throw DataError("diversity: need at least 2 feature rows");
  const Eigen::Index d = features.features.cols();

  // Row-major copy so pair distances stream through the simd kernel.
  std::vector<double> rows(static_cast<std::size_t>(m) * d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j) rows[i * d + j] = features.features(i, j);

  double sum = 0.0;
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b)
      sum += std::sqrt(simd::squared_distance(rows.data() + a * d, rows.data() + b * d, d));
  return 2.0 * sum / (static_cast<double>(m) * static_cast<double>(m - 1));
}

}  // namespace dextok::metrics
