#include "dextok/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dextok/simd.hpp"

namespace dextok::vq {

namespace {

double sum_squared_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("vq: dimension mismatch");
  return simd::squared_distance(a.data(), b.data(), a.size());
}

void fisher_yates(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);
}

/// Reservoir of encoder outputs collected between refreshes.
class LatentBuffer {
 public:
  explicit LatentBuffer(std::size_t cap) : cap_(cap) {}

  void add(const std::vector<double>& z, Rng& rng) {
    ++seen_;
    if (items_.size() < cap_) {
      items_.push_back(z);
      return;
    }
    const std::uint64_t j = rng.below(seen_);
    if (j < cap_) items_[j] = z;
  }

  void clear() {
    items_.clear();
    seen_ = 0;
  }

  const std::vector<std::vector<double>>& items() const { return items_; }

 private:
  std::size_t cap_;
  std::uint64_t seen_ = 0;
  std::vector<std::vector<double>> items_;
};

std::vector<std::vector<double>> kmeans(const std::vector<std::vector<double>>& data,
                                        std::size_t clusters, std::uint64_t seed) {
  const std::size_t n = data.size();
  const std::size_t dim = data.front().size();
  Rng rng(seed);

  // k-means++ seeding
  std::vector<std::vector<double>> centroids;
  centroids.reserve(clusters);
  centroids.push_back(data[rng.below(n)]);
  std::vector<double> d2(n);
  while (centroids.size() < clusters) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = simd::squared_distance(data[i].data(), centroids[0].data(), dim);
      for (std::size_t c = 1; c < centroids.size(); ++c)
        best = std::min(best, simd::squared_distance(data[i].data(), centroids[c].data(), dim));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);
    }
    centroids.push_back(data[pick]);
  }

  // Lloyd iterations
  std::vector<double> flat(clusters * dim);
  std::vector<std::size_t> assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    for (std::size_t c = 0; c < clusters; ++c)
      std::copy(centroids[c].begin(), centroids[c].end(), flat.begin() + c * dim);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = simd::nearest_row(flat.data(), clusters, dim, data[i].data());
      if (a != assign[i]) {
        assign[i] = a;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<std::vector<double>> sums(clusters, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      simd::axpy(1.0, data[i].data(), sums[assign[i]].data(), dim);
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < clusters; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t j = 0; j < dim; ++j) centroids[c][j] = sums[c][j] / counts[c];
    }
  }
  return centroids;
}

}  // namespace

Codebook Codebook::random(int code_count, int latent_dim, Rng& rng, double scale) {
  if (code_count < 1 || latent_dim < 1) throw ConfigError("codebook: K and d_z must be >= 1");
  Codebook cb;
  cb.code_count = code_count;
  cb.latent_dim = latent_dim;
  cb.codes.resize(static_cast<std::size_t>(code_count) * latent_dim);
  for (double& v : cb.codes) v = rng.uniform(-scale, scale);
  return cb;
}

void Codebook::validate() const {
  if (code_count < 1 || latent_dim < 1) throw DataError("codebook: empty");
  if (codes.size() != static_cast<std::size_t>(code_count) * latent_dim)
    throw DataError("codebook: storage size mismatch");
  for (double v : codes)
    if (!std::isfinite(v)) throw DataError("codebook: non-finite code entry");
}

void PoseChunkSpec::validate() const {
  if (window < 1) throw ConfigError("chunk: window must be >= 1");
  if (stride < 1) throw ConfigError("chunk: stride must be >= 1");
  if (dof < 1) throw ConfigError("chunk: dof must be >= 1");
}

std::vector<std::vector<double>> chunk_trajectory(const std::vector<Eigen::VectorXd>& frames,
                                                  const PoseChunkSpec& spec) {
  spec.validate();
  std::vector<std::vector<double>> chunks;
  const int t_count = static_cast<int>(frames.size());
  for (int start = 0; start + spec.window <= t_count; start += spec.stride) {
    std::vector<double> chunk;
    chunk.reserve(spec.chunk_dim());
    for (int t = start; t < start + spec.window; ++t) {
      if (frames[t].size() != spec.dof) throw DataError("chunk: frame dof mismatch");
      for (int d = 0; d < spec.dof; ++d) chunk.push_back(frames[t][d]);
    }
    chunks.push_back(std::move(chunk));
  }
  return chunks;
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::tanh_fn;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("net: unknown activation '" + name + "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::tanh_fn: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "tanh";
}

void NetGrads::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

CoderNet CoderNet::create(const std::vector<int>& widths, Activation act) {
  if (widths.size() < 2) throw ConfigError("net: need at least input and output widths");
  CoderNet net;
  net.activation = act;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] < 1 || widths[i + 1] < 1) throw ConfigError("net: layer widths must be >= 1");
    Layer layer;
    layer.in = widths[i];
    layer.out = widths[i + 1];
    layer.weights.assign(static_cast<std::size_t>(layer.in) * layer.out, 0.0);
    layer.bias.assign(layer.out, 0.0);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

void CoderNet::init_random(Rng& rng, double scale) {
  for (Layer& layer : layers) {
    const double s = scale / std::sqrt(static_cast<double>(layer.in));
    for (double& w : layer.weights) w = rng.uniform(-s, s);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

namespace {

inline double activate(double z, Activation a) {
  switch (a) {
    case Activation::tanh_fn: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::identity: return z;
  }
  return z;
}

// Derivative expressed through the activated value.
inline double activate_grad(double y, Activation a) {
  switch (a) {
    case Activation::tanh_fn: return 1.0 - y * y;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

}  // namespace

void CoderNet::forward_trace(const std::vector<double>& x,
                             std::vector<std::vector<double>>& acts) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw DataError("net: input has " + std::to_string(x.size()) + " entries, expected " +
                    std::to_string(input_dim()));
  acts.assign(layers.size() + 1, {});
  acts[0] = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    std::vector<double> y(layer.out);
    simd::gemv(layer.weights.data(), acts[l].data(), y.data(), layer.out, layer.in);
    const bool last = l + 1 == layers.size();
    for (int r = 0; r < layer.out; ++r) {
      y[r] += layer.bias[r];
      if (!last) y[r] = activate(y[r], activation);
    }
    acts[l + 1] = std::move(y);
  }
}

std::vector<double> CoderNet::forward(const std::vector<double>& x) const {
  std::vector<std::vector<double>> acts;
  forward_trace(x, acts);
  return acts.back();
}

std::vector<double> CoderNet::backward(const std::vector<std::vector<double>>& acts,
                                       const std::vector<double>& grad_out,
                                       NetGrads& grads) const {
  std::vector<double> delta = grad_out;  // dL/d(layer output), output layer is linear
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& layer = layers[li];
    const std::vector<double>& input = acts[li];
    // parameter gradients
    for (int r = 0; r < layer.out; ++r) {
      simd::axpy(delta[r], input.data(), grads.weights[li].data() + static_cast<std::size_t>(r) * layer.in,
                 layer.in);
      grads.bias[li][r] += delta[r];
    }
    // dL/d(input of this layer)
    std::vector<double> prev(layer.in);
    simd::gemv_t(layer.weights.data(), delta.data(), prev.data(), layer.out, layer.in);
    if (li > 0) {
      // chain through the activation of the previous layer
      for (int i = 0; i < layer.in; ++i) prev[i] *= activate_grad(input[i], activation);
    }
    delta = std::move(prev);
  }
  return delta;
}

NetGrads CoderNet::make_grads() const {
  NetGrads g;
  for (const Layer& layer : layers) {
    g.weights.emplace_back(layer.weights.size(), 0.0);
    g.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return g;
}

void CoderNet::apply_gradient(const NetGrads& grads, double learning_rate) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    simd::axpy(-learning_rate, grads.weights[l].data(), layers[l].weights.data(),
               layers[l].weights.size());
    simd::axpy(-learning_rate, grads.bias[l].data(), layers[l].bias.data(),
               layers[l].bias.size());
  }
}

std::size_t quantize(const Codebook& codebook, const std::vector<double>& z_e) {
  if (static_cast<int>(z_e.size()) != codebook.latent_dim)
    throw DataError("quantize: latent has " + std::to_string(z_e.size()) +
                    " entries, codebook width is " + std::to_string(codebook.latent_dim));
  return simd::nearest_row(codebook.codes.data(), codebook.code_count, codebook.latent_dim,
                           z_e.data());
}

std::vector<double> encode(const CoderNet& net, const std::vector<double>& chunk) {
  return net.forward(chunk);
}

std::vector<double> reconstruct(const CoderNet& enc, const CoderNet& dec,
                                const Codebook& codebook, const std::vector<double>& chunk) {
  const std::size_t c = quantize(codebook, enc.forward(chunk));
  std::vector<double> z_q(codebook.code(c), codebook.code(c) + codebook.latent_dim);
  return dec.forward(z_q);
}

std::vector<double> translate(const CoderNet& enc_source, const CoderNet& dec_target,
                              const Codebook& codebook, const std::vector<double>& chunk) {
  return reconstruct(enc_source, dec_target, codebook, chunk);
}

std::pair<double, double> vq_losses(const std::vector<double>& z_e,
                                    const std::vector<double>& z_q, double beta) {
  const double d = sum_squared_error(z_e, z_q);
  return {d, beta * d};
}

double distill_loss(const std::vector<double>& z_new, const std::vector<double>& z_ref) {
  return sum_squared_error(z_new, z_ref);
}

UsageTable usage_counts(const std::vector<std::size_t>& indices, int code_count) {
  UsageTable table;
  table.counts.assign(code_count, 0);
  for (std::size_t idx : indices) {
    if (idx >= static_cast<std::size_t>(code_count))
      throw DataError("usage: token index " + std::to_string(idx) + " >= K");
    ++table.counts[idx];
  }
  return table;
}

std::vector<int> cold_set(const UsageTable& usage, std::int64_t tau_c) {
  std::vector<int> cold;
  for (std::size_t k = 0; k < usage.counts.size(); ++k)
    if (usage.counts[k] < tau_c) cold.push_back(static_cast<int>(k));
  return cold;
}

Codebook refresh_cold_codes(const Codebook& codebook, const std::vector<int>& cold,
                            const std::vector<std::vector<double>>& buffer, std::uint64_t seed) {
  codebook.validate();
  Codebook out = codebook;
  if (cold.empty()) return out;
  if (buffer.empty()) throw DataError("refresh: cold codes present but the latent buffer is empty");
  for (int k : cold)
    if (k < 0 || k >= codebook.code_count) throw DataError("refresh: cold index out of range");
  for (const auto& z : buffer)
    if (static_cast<int>(z.size()) != codebook.latent_dim)
      throw DataError("refresh: buffered latent width mismatch");

  std::vector<int> ordered = cold;
  std::sort(ordered.begin(), ordered.end());
  const std::size_t replace = std::min(ordered.size(), buffer.size());

  const auto centroids = kmeans(buffer, replace, seed);
  for (std::size_t r = 0; r < replace; ++r)
    std::copy(centroids[r].begin(), centroids[r].end(), out.code(ordered[r]));
  return out;
}

void TrainConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("train: beta must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (refresh_every < 0) throw ConfigError("train: refresh_every must be >= 0");
  if (tau_c < 0) throw ConfigError("train: tau_c must be >= 0");
  if (lambda_distill < 0) throw ConfigError("train: lambda_distill must be >= 0");
  if (buffer_cap < 1) throw ConfigError("train: buffer_cap must be >= 1");
  if (stage1_epochs < 1 || stage2_epochs < 1)
    throw ConfigError("train: stage epochs must be >= 1");
}

std::vector<int> TrainConfig::refresh_epochs(int total_epochs) const {
  std::vector<int> out;
  if (refresh_every <= 0) return out;
  for (int e = refresh_every; e < total_epochs; e += refresh_every) out.push_back(e);
  return out;
}

namespace {

struct StepStats {
  double rec = 0.0;
  double vq = 0.0;
  double commit = 0.0;
  double distill = 0.0;
};

// One SGD step of the quantized autoencoder. The decoder-input gradient is
// copied straight through the quantizer onto z_e; the commitment gradient
// 2 beta (z_e - z_q) moves the encoder; the codebook term 2 (e_c - z_e)
// moves only the selected code.
StepStats vqvae_step(CoderNet& enc, CoderNet& dec, Codebook& cb, bool update_codebook,
                     const std::vector<double>& x, const std::vector<double>* z_ref,
                     double lambda_distill, const TrainConfig& config, NetGrads& enc_grads,
                     NetGrads& dec_grads, std::vector<std::vector<double>>& acts_e,
                     std::vector<std::vector<double>>& acts_d, std::vector<std::size_t>& tokens,
                     LatentBuffer& buffer, Rng& rng) {
  enc.forward_trace(x, acts_e);
  const std::vector<double>& z_e = acts_e.back();
  const std::size_t c = quantize(cb, z_e);
  tokens.push_back(c);
  buffer.add(z_e, rng);

  std::vector<double> z_q(cb.code(c), cb.code(c) + cb.latent_dim);
  dec.forward_trace(z_q, acts_d);
  const std::vector<double>& x_hat = acts_d.back();

  StepStats stats;
  stats.rec = simd::squared_distance(x.data(), x_hat.data(), x.size());
  stats.vq = simd::squared_distance(z_e.data(), z_q.data(), z_q.size());
  stats.commit = config.beta * stats.vq;

  std::vector<double> grad_xhat(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) grad_xhat[i] = 2.0 * (x_hat[i] - x[i]);

  dec_grads.zero();
  std::vector<double> grad_zq = dec.backward(acts_d, grad_xhat, dec_grads);

  // straight-through + commitment (+ optional distillation pull)
  std::vector<double> grad_ze = std::move(grad_zq);
  for (std::size_t j = 0; j < grad_ze.size(); ++j)
    grad_ze[j] += 2.0 * config.beta * (z_e[j] - z_q[j]);
  if (z_ref) {
    stats.distill = simd::squared_distance(z_e.data(), z_ref->data(), z_e.size());
    for (std::size_t j = 0; j < grad_ze.size(); ++j)
      grad_ze[j] += lambda_distill * 2.0 * (z_e[j] - (*z_ref)[j]);
  }

  enc_grads.zero();
  enc.backward(acts_e, grad_ze, enc_grads);

  enc.apply_gradient(enc_grads, config.learning_rate);
  dec.apply_gradient(dec_grads, config.learning_rate);
  if (update_codebook) {
    double* code = cb.code(c);
    for (int j = 0; j < cb.latent_dim; ++j)
      code[j] -= config.learning_rate * 2.0 * (code[j] - z_e[j]);
  }
  return stats;
}

void check_finite_epoch(const EpochRecord& row, std::vector<EpochRecord>& history,
                        const char* stage) {
  if (std::isfinite(row.total)) return;
  throw TrainAbort(std::string("train: non-finite loss during ") + stage + " at epoch " +
                       std::to_string(row.epoch),
                   history);
}

}  // namespace

ReferenceModel train_reference(const std::vector<std::vector<double>>& chunks,
                               const PoseChunkSpec& chunk_spec, int code_count, int latent_dim,
                               const NetArch& arch, const TrainConfig& config) {
  config.validate();
  chunk_spec.validate();
  if (chunks.empty()) throw DataError("train: empty chunk dataset");
  const int dim = chunk_spec.chunk_dim();
  for (const auto& c : chunks)
    if (static_cast<int>(c.size()) != dim) throw DataError("train: chunk width mismatch");

  Rng rng(config.seed);

  std::vector<int> enc_widths{dim};
  enc_widths.insert(enc_widths.end(), arch.hidden.begin(), arch.hidden.end());
  enc_widths.push_back(latent_dim);
  std::vector<int> dec_widths{latent_dim};
  dec_widths.insert(dec_widths.end(), arch.hidden.rbegin(), arch.hidden.rend());
  dec_widths.push_back(dim);

  ReferenceModel model;
  model.encoder = CoderNet::create(enc_widths, arch.activation);
  model.decoder = CoderNet::create(dec_widths, arch.activation);
  model.encoder.init_random(rng, config.init_scale);
  model.decoder.init_random(rng, config.init_scale);
  model.codebook = Codebook::random(code_count, latent_dim, rng, config.codebook_init_scale);

  const std::vector<int> refresh_at = config.refresh_epochs(config.epochs);
  LatentBuffer buffer(config.buffer_cap);
  NetGrads enc_grads = model.encoder.make_grads();
  NetGrads dec_grads = model.decoder.make_grads();
  std::vector<std::vector<double>> acts_e, acts_d;

  std::vector<std::size_t> order(chunks.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) fisher_yates(order, rng);
    std::vector<std::size_t> tokens;
    tokens.reserve(chunks.size());

    StepStats sum;
    for (std::size_t idx : order) {
      const StepStats s =
          vqvae_step(model.encoder, model.decoder, model.codebook, true, chunks[idx], nullptr,
                     0.0, config, enc_grads, dec_grads, acts_e, acts_d, tokens, buffer, rng);
      sum.rec += s.rec;
      sum.vq += s.vq;
      sum.commit += s.commit;
    }

    EpochRecord row;
    row.epoch = epoch;
    const double n = static_cast<double>(chunks.size());
    row.rec = sum.rec / n;
    row.vq = sum.vq / n;
    row.commit = sum.commit / n;
    row.total = row.rec + row.vq + row.commit;
    model.history.push_back(row);
    check_finite_epoch(row, model.history, "reference training");

    if (std::binary_search(refresh_at.begin(), refresh_at.end(), epoch)) {
      const UsageTable usage = usage_counts(tokens, code_count);
      const std::vector<int> cold = cold_set(usage, config.tau_c);
      if (!cold.empty())
        model.codebook = refresh_cold_codes(model.codebook, cold, buffer.items(), rng.next_u64());
      model.history.back().refreshed_cold = static_cast<int>(cold.size());
      buffer.clear();
    }
  }
  return model;
}

MorphologyModel train_new_morphology(const std::vector<std::vector<double>>& chunks_new,
                                     const std::vector<std::vector<double>>& chunks_ref,
                                     const CoderNet& ref_encoder, Codebook& codebook,
                                     const NetArch& arch, const TrainConfig& config) {
  config.validate();
  codebook.validate();
  if (chunks_new.empty()) throw DataError("train: empty paired dataset");
  if (chunks_new.size() != chunks_ref.size())
    throw DataError("train: paired datasets have different sizes");
  const int dim_new = static_cast<int>(chunks_new.front().size());
  for (const auto& c : chunks_new)
    if (static_cast<int>(c.size()) != dim_new) throw DataError("train: chunk width mismatch");
  for (const auto& c : chunks_ref)
    if (static_cast<int>(c.size()) != ref_encoder.input_dim())
      throw DataError("train: reference chunk width mismatch");
  const int latent_dim = ref_encoder.output_dim();
  if (latent_dim != codebook.latent_dim)
    throw DataError("train: reference encoder latent width does not match the codebook");

  Rng rng(config.seed);

  std::vector<int> enc_widths{dim_new};
  enc_widths.insert(enc_widths.end(), arch.hidden.begin(), arch.hidden.end());
  enc_widths.push_back(latent_dim);
  std::vector<int> dec_widths{latent_dim};
  dec_widths.insert(dec_widths.end(), arch.hidden.rbegin(), arch.hidden.rend());
  dec_widths.push_back(dim_new);

  MorphologyModel model;
  model.encoder = CoderNet::create(enc_widths, arch.activation);
  model.decoder = CoderNet::create(dec_widths, arch.activation);
  model.encoder.init_random(rng, config.init_scale);
  model.decoder.init_random(rng, config.init_scale);

  // Frozen reference latents for every pair.
  std::vector<std::vector<double>> z_ref(chunks_ref.size());
  for (std::size_t i = 0; i < chunks_ref.size(); ++i) z_ref[i] = ref_encoder.forward(chunks_ref[i]);

  NetGrads enc_grads = model.encoder.make_grads();
  NetGrads dec_grads = model.decoder.make_grads();
  std::vector<std::vector<double>> acts_e, acts_d;
  std::vector<std::size_t> order(chunks_new.size());
  std::iota(order.begin(), order.end(), 0);

  // Stage 1: latent alignment by distillation only; decoder and codebook untouched.
  for (int epoch = 1; epoch <= config.stage1_epochs; ++epoch) {
    if (config.shuffle) fisher_yates(order, rng);
    double sum_distill = 0.0;
    for (std::size_t idx : order) {
      model.encoder.forward_trace(chunks_new[idx], acts_e);
      const std::vector<double>& z = acts_e.back();
      sum_distill += simd::squared_distance(z.data(), z_ref[idx].data(), z.size());
      std::vector<double> grad(z.size());
      for (std::size_t j = 0; j < z.size(); ++j) grad[j] = 2.0 * (z[j] - z_ref[idx][j]);
      enc_grads.zero();
      model.encoder.backward(acts_e, grad, enc_grads);
      model.encoder.apply_gradient(enc_grads, config.learning_rate);
    }
    EpochRecord row;
    row.epoch = epoch;
    row.distill = sum_distill / static_cast<double>(chunks_new.size());
    row.total = row.distill;
    model.history.push_back(row);
    check_finite_epoch(row, model.history, "alignment");
  }

  // Stage 2: joint fine-tune with reconstruction + quantizer + distillation.
  const std::vector<int> refresh_at = config.refresh_epochs(config.stage2_epochs);
  LatentBuffer buffer(config.buffer_cap);
  for (int epoch = 1; epoch <= config.stage2_epochs; ++epoch) {
    if (config.shuffle) fisher_yates(order, rng);
    std::vector<std::size_t> tokens;
    tokens.reserve(chunks_new.size());
    StepStats sum;
    for (std::size_t idx : order) {
      const StepStats s = vqvae_step(model.encoder, model.decoder, codebook,
                                     config.update_codebook_stage2, chunks_new[idx], &z_ref[idx],
                                     config.lambda_distill, config, enc_grads, dec_grads, acts_e,
                                     acts_d, tokens, buffer, rng);
      sum.rec += s.rec;
      sum.vq += s.vq;
      sum.commit += s.commit;
      sum.distill += s.distill;
    }
    EpochRecord row;
    row.epoch = config.stage1_epochs + epoch;
    const double n = static_cast<double>(chunks_new.size());
    row.rec = sum.rec / n;
    row.vq = sum.vq / n;
    row.commit = sum.commit / n;
    row.distill = sum.distill / n;
    row.total = row.rec + row.vq + row.commit + config.lambda_distill * row.distill;
    model.history.push_back(row);
    check_finite_epoch(row, model.history, "fine-tune");

    if (config.update_codebook_stage2 &&
        std::binary_search(refresh_at.begin(), refresh_at.end(), epoch)) {
      const UsageTable usage = usage_counts(tokens, codebook.code_count);
      const std::vector<int> cold = cold_set(usage, config.tau_c);
      if (!cold.empty())
        codebook = refresh_cold_codes(codebook, cold, buffer.items(), rng.next_u64());
      model.history.back().refreshed_cold = static_cast<int>(cold.size());
      buffer.clear();
    }
  }
  return model;
}

std::vector<std::int64_t> mask_sequence(const std::vector<std::int64_t>& tokens, double ratio,
                                        std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("mask: ratio must be in [0,1]");
  Rng rng(seed);
  std::vector<std::int64_t> out = tokens;
  for (std::int64_t& t : out)
    if (rng.uniform() < ratio) t = kMaskToken;
  return out;
}

double mask_ratio_schedule(double epoch_fraction) {
  if (!(epoch_fraction >= 0.0 && epoch_fraction <= 1.0))
    throw ConfigError("mask: epoch fraction must be in [0,1]");
  if (epoch_fraction < 0.2) return 0.0;
  if (epoch_fraction <= 0.8) return (epoch_fraction - 0.2) / 0.6;
  return 1.0;
}

}  // namespace dextok::vq
