#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "dextok/common.hpp"

namespace dextok::vq {

/// Shared discrete latent lattice.
struct Codebook {
  int code_count = 0;  // K
  int latent_dim = 0;  // d_z
  std::vector<double> codes;  // K x d_z row-major

  static Codebook random(int code_count, int latent_dim, Rng& rng, double scale);

  double* code(int k) { return codes.data() + static_cast<std::size_t>(k) * latent_dim; }
  const double* code(int k) const {
    return codes.data() + static_cast<std::size_t>(k) * latent_dim;
  }
  void validate() const;
};

struct UsageTable {
  std::vector<std::int64_t> counts;
};

/// How trajectories are cut into flat chunks: `window` consecutive frames,
/// frame-major flattening, windows starting every `stride` frames.
struct PoseChunkSpec {
  int window = 8;
  int stride = 4;
  int dof = 0;

  int chunk_dim() const { return window * dof; }
  void validate() const;
};

std::vector<std::vector<double>> chunk_trajectory(const std::vector<Eigen::VectorXd>& frames,
                                                  const PoseChunkSpec& spec);

enum class Activation { tanh_fn, relu, identity };

Activation activation_from_name(const std::string& name);
const char* activation_name(Activation a);

struct Layer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // out x in row-major
  std::vector<double> bias;     // out
};

struct NetGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;
  void zero();
};

/// Plain MLP with activations on hidden layers and a linear output layer.
struct CoderNet {
  std::vector<Layer> layers;
  Activation activation = Activation::tanh_fn;

  static CoderNet create(const std::vector<int>& widths, Activation act);
  void init_random(Rng& rng, double scale);

  int input_dim() const { return layers.front().in; }
  int output_dim() const { return layers.back().out; }

  std::vector<double> forward(const std::vector<double>& x) const;

  /// Forward pass that keeps per-layer outputs for backprop.
  /// acts[0] is the input; acts[i] the (activated) output of layer i-1.
  void forward_trace(const std::vector<double>& x, std::vector<std::vector<double>>& acts) const;

  /// Backpropagates grad_out (dL/d output) through the trace, accumulating
  /// parameter gradients into `grads` and returning dL/d input.
  std::vector<double> backward(const std::vector<std::vector<double>>& acts,
                               const std::vector<double>& grad_out, NetGrads& grads) const;

  NetGrads make_grads() const;
  void apply_gradient(const NetGrads& grads, double learning_rate);
};

std::size_t quantize(const Codebook& codebook, const std::vector<double>& z_e);

std::vector<double> encode(const CoderNet& net, const std::vector<double>& chunk);

std::vector<double> reconstruct(const CoderNet& enc, const CoderNet& dec,
                                const Codebook& codebook, const std::vector<double>& chunk);

std::vector<double> translate(const CoderNet& enc_source, const CoderNet& dec_target,
                              const Codebook& codebook, const std::vector<double>& chunk);

/// Scalar values of the two quantizer loss terms. The stop-gradient routing
/// (codebook term moves codes only, commitment term moves the encoder only)
/// is realized in the trainer's gradient assembly.
std::pair<double, double> vq_losses(const std::vector<double>& z_e,
                                    const std::vector<double>& z_q, double beta);

double distill_loss(const std::vector<double>& z_new, const std::vector<double>& z_ref);

UsageTable usage_counts(const std::vector<std::size_t>& indices, int code_count);

std::vector<int> cold_set(const UsageTable& usage, std::int64_t tau_c);

/// K-Means (seeded k-means++ init, <= 100 Lloyd iterations) over the latent
/// buffer; the min(|cold|, |buffer|) lowest cold indices are overwritten with
/// the centroids, warm codes stay bitwise identical.
Codebook refresh_cold_codes(const Codebook& codebook, const std::vector<int>& cold,
                            const std::vector<std::vector<double>>& buffer, std::uint64_t seed);

struct TrainConfig {
  double beta = 0.25;
  double learning_rate = 1e-4;
  int epochs = 200;
  int refresh_every = 50;  // refresh after epochs 50, 100, ... (never after the last)
  std::int64_t tau_c = 1;
  double lambda_distill = 0.1;
  std::uint64_t seed = 0;
  int buffer_cap = 65536;
  double init_scale = 1.0;          // multiplier on 1/sqrt(fan_in) weight init
  double codebook_init_scale = 0.05;
  bool shuffle = true;
  int stage1_epochs = 150;  // distillation-only alignment
  int stage2_epochs = 150;  // joint fine-tune
  bool update_codebook_stage2 = true;

  void validate() const;
  std::vector<int> refresh_epochs(int total_epochs) const;
};

struct NetArch {
  std::vector<int> hidden = {128, 128};
  Activation activation = Activation::tanh_fn;
};

struct EpochRecord {
  int epoch = 0;
  double rec = 0.0;
  double vq = 0.0;
  double commit = 0.0;
  double distill = 0.0;
  double total = 0.0;
  int refreshed_cold = -1;  // cold codes replaced after this epoch, -1 = no refresh
};

/// Thrown when a training loss becomes non-finite; carries the history so far.
struct TrainAbort : NumericalError {
  TrainAbort(const std::string& msg, std::vector<EpochRecord> history)
      : NumericalError(msg), history(std::move(history)) {}
  std::vector<EpochRecord> history;
};

struct ReferenceModel {
  CoderNet encoder;
  CoderNet decoder;
  Codebook codebook;
  std::vector<EpochRecord> history;
};

ReferenceModel train_reference(const std::vector<std::vector<double>>& chunks,
                               const PoseChunkSpec& chunk_spec, int code_count, int latent_dim,
                               const NetArch& arch, const TrainConfig& config);

struct MorphologyModel {
  CoderNet encoder;
  CoderNet decoder;
  std::vector<EpochRecord> history;  // stage-1 rows then stage-2 rows
};

/// Onboards a new morphology against a frozen reference encoder: stage 1
/// aligns the new encoder by distillation alone, stage 2 fine-tunes
/// encoder+decoder with reconstruction, quantizer, and distillation terms.
MorphologyModel train_new_morphology(const std::vector<std::vector<double>>& chunks_new,
                                     const std::vector<std::vector<double>>& chunks_ref,
                                     const CoderNet& ref_encoder, Codebook& codebook,
                                     const NetArch& arch, const TrainConfig& config);

/// Token sequences use int64 values; masked positions carry kMaskToken.
constexpr std::int64_t kMaskToken = -1;

std::vector<std::int64_t> mask_sequence(const std::vector<std::int64_t>& tokens, double ratio,
                                        std::uint64_t seed);

/// Masking curriculum over normalized training progress e in [0,1]:
/// 0 before 20%, linear up to 1 between 20% and 80%, 1 afterwards.
double mask_ratio_schedule(double epoch_fraction);

}  // namespace dextok::vq
