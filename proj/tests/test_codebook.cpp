#include <doctest.h>

#include <cmath>

#include "dextok/codebook.hpp"
#include "dextok/common.hpp"
#include "dextok/fixtures.hpp"

using namespace dextok;

namespace {

std::vector<double> random_chunk(int n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1, 1);
  return v;
}

// Brute-force argmin oracle with the lowest-index tie rule.
std::size_t brute_quantize(const vq::Codebook& cb, const std::vector<double>& z) {
  std::size_t best = 0;
  double best_d = 0.0;
  for (int k = 0; k < cb.code_count; ++k) {
    double d = 0.0;
    for (int j = 0; j < cb.latent_dim; ++j) {
      const double diff = z[j] - cb.code(k)[j];
      d += diff * diff;
    }
    if (k == 0 || d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(k);
    }
  }
  return best;
}

}  // namespace

TEST_SUITE_BEGIN("codebook");

TEST_CASE("quantize basics") {
  vq::Codebook cb;
  cb.code_count = 2;
  cb.latent_dim = 2;
  cb.codes = {0, 0, 1, 1};
  CHECK(vq::quantize(cb, {0.4, 0.4}) == 0);
  CHECK(vq::quantize(cb, {1.0, 1.0}) == 1);
  CHECK_THROWS_AS(vq::quantize(cb, {1.0}), DataError);
}

TEST_CASE("quantize matches brute force on random queries") {
  Rng rng(1001);
  vq::Codebook cb = vq::Codebook::random(512, 16, rng, 1.0);
  for (int t = 0; t < 200; ++t) {
    const auto z = random_chunk(16, rng);
    CHECK(vq::quantize(cb, z) == brute_quantize(cb, z));
  }
  // exact hit on a stored code
  std::vector<double> z(cb.code(37), cb.code(37) + 16);
  CHECK(vq::quantize(cb, z) == 37);
}

TEST_CASE("encode special nets") {
  SUBCASE("zero-weight net maps to zero") {
    vq::CoderNet net = vq::CoderNet::create({4, 6, 3}, vq::Activation::tanh_fn);
    const auto y = vq::encode(net, {1, -2, 3, 4});
    for (double v : y) CHECK(v == 0.0);
  }
  SUBCASE("single identity layer") {
    vq::CoderNet net = vq::CoderNet::create({3, 3}, vq::Activation::tanh_fn);
    for (int i = 0; i < 3; ++i) net.layers[0].weights[i * 3 + i] = 1.0;
    const std::vector<double> x = {0.5, -0.7, 2.0};
    const auto y = vq::encode(net, x);
    for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(x[i]));
  }
  SUBCASE("random net matches a hand-rolled layer-by-layer pass") {
    Rng rng(7);
    vq::CoderNet net = vq::CoderNet::create({3, 5, 2}, vq::Activation::tanh_fn);
    net.init_random(rng, 1.0);
    const auto x = random_chunk(3, rng);

    std::vector<double> h(5);
    for (int r = 0; r < 5; ++r) {
      double s = net.layers[0].bias[r];
      for (int c = 0; c < 3; ++c) s += net.layers[0].weights[r * 3 + c] * x[c];
      h[r] = std::tanh(s);
    }
    std::vector<double> out(2);
    for (int r = 0; r < 2; ++r) {
      double s = net.layers[1].bias[r];
      for (int c = 0; c < 5; ++c) s += net.layers[1].weights[r * 5 + c] * h[c];
      out[r] = s;  // linear output layer
    }
    const auto y = vq::encode(net, x);
    for (int i = 0; i < 2; ++i) CHECK(y[i] == doctest::Approx(out[i]).epsilon(1e-14));
  }
}

TEST_CASE("vq loss values and distillation loss") {
  CHECK(vq::vq_losses({1, 2}, {1, 2}, 0.25) == std::pair<double, double>{0, 0});
  const auto [cb_term, commit] = vq::vq_losses({1, 0}, {0, 0}, 0.25);
  CHECK(cb_term == doctest::Approx(1.0));
  CHECK(commit == doctest::Approx(0.25));

  CHECK(vq::distill_loss({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(vq::distill_loss({2, 2}, {1, 2}) == doctest::Approx(1.0));
  Rng rng(3);
  const auto a = random_chunk(9, rng);
  const auto b = random_chunk(9, rng);
  double expect = 0.0;
  for (int i = 0; i < 9; ++i) expect += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(vq::distill_loss(a, b) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("usage counts and cold set") {
  const auto table = vq::usage_counts({0, 0, 2}, 3);
  CHECK(table.counts == std::vector<std::int64_t>{2, 0, 1});
  CHECK(vq::usage_counts({}, 4).counts == std::vector<std::int64_t>(4, 0));
  CHECK_THROWS_AS(vq::usage_counts({5}, 3), DataError);

  Rng rng(12);
  std::vector<std::size_t> idx;
  std::vector<std::int64_t> hist(32, 0);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t k = rng.below(32);
    idx.push_back(k);
    ++hist[k];
  }
  CHECK(vq::usage_counts(idx, 32).counts == hist);

  vq::UsageTable usage;
  usage.counts = {5, 0, 3};
  CHECK(vq::cold_set(usage, 1) == std::vector<int>{1});
  CHECK(vq::cold_set(usage, 0).empty());
  CHECK(vq::cold_set(usage, 6) == std::vector<int>{0, 1, 2});
}

TEST_CASE("cold-code refresh") {
  Rng rng(88);
  vq::Codebook cb = vq::Codebook::random(8, 3, rng, 1.0);

  SUBCASE("empty cold set is the identity") {
    const vq::Codebook out = vq::refresh_cold_codes(cb, {}, {{1, 2, 3}}, 1);
    CHECK(out.codes == cb.codes);
  }

  SUBCASE("empty buffer with cold codes raises") {
    CHECK_THROWS_AS(vq::refresh_cold_codes(cb, {2}, {}, 1), DataError);
  }

  SUBCASE("two well-separated blobs land on their means; warm codes bitwise equal") {
    std::vector<std::vector<double>> buffer;
    Eigen::Vector3d mean_a = Eigen::Vector3d::Zero(), mean_b = Eigen::Vector3d::Zero();
    for (int i = 0; i < 200; ++i) {
      std::vector<double> a = {5.0 + 0.01 * rng.normal(), 0.01 * rng.normal(),
                               0.01 * rng.normal()};
      std::vector<double> b = {-5.0 + 0.01 * rng.normal(), 0.01 * rng.normal(),
                               0.01 * rng.normal()};
      mean_a += Eigen::Vector3d(a[0], a[1], a[2]);
      mean_b += Eigen::Vector3d(b[0], b[1], b[2]);
      buffer.push_back(std::move(a));
      buffer.push_back(std::move(b));
    }
    mean_a /= 200.0;
    mean_b /= 200.0;

    const std::vector<int> cold = {2, 5};
    const vq::Codebook out = vq::refresh_cold_codes(cb, cold, buffer, 99);

    for (int k = 0; k < 8; ++k) {
      if (k == 2 || k == 5) continue;
      for (int j = 0; j < 3; ++j) CHECK(out.code(k)[j] == cb.code(k)[j]);
    }
    // the two replaced codes are the two blob means in some order
    auto close_to = [&](const double* code, const Eigen::Vector3d& m) {
      return (Eigen::Vector3d(code[0], code[1], code[2]) - m).norm() < 1e-6;
    };
    const bool direct = close_to(out.code(2), mean_a) && close_to(out.code(5), mean_b);
    const bool swapped = close_to(out.code(2), mean_b) && close_to(out.code(5), mean_a);
    CHECK((direct || swapped));
  }

  SUBCASE("replaced count is min of cold and buffer sizes") {
    const std::vector<int> cold = {1, 3, 5};
    const std::vector<std::vector<double>> buffer = {{1, 1, 1}, {2, 2, 2}};
    const vq::Codebook out = vq::refresh_cold_codes(cb, cold, buffer, 7);
    int replaced = 0;
    for (int k = 0; k < 8; ++k) {
      bool same = true;
      for (int j = 0; j < 3; ++j)
        if (out.code(k)[j] != cb.code(k)[j]) same = false;
      if (!same) {
        ++replaced;
        CHECK((k == 1 || k == 3));  // ascending cold order gets the centroids
      }
    }
    CHECK(replaced == std::min(cold.size(), buffer.size()));
  }
}

TEST_CASE("straight-through gradient matches finite differences") {
  Rng rng(2718);
  const int in_dim = 4, hidden = 5, latent = 3;
  vq::CoderNet enc = vq::CoderNet::create({in_dim, hidden, latent}, vq::Activation::tanh_fn);
  vq::CoderNet dec = vq::CoderNet::create({latent, hidden, in_dim}, vq::Activation::tanh_fn);
  enc.init_random(rng, 1.0);
  dec.init_random(rng, 1.0);
  vq::Codebook cb = vq::Codebook::random(6, latent, rng, 0.5);
  const auto x = random_chunk(in_dim, rng);
  const double beta = 0.25;

  // Base point: token and offset frozen per the straight-through convention.
  const std::vector<double> z_e0 = enc.forward(x);
  const std::size_t c0 = vq::quantize(cb, z_e0);
  const std::vector<double> z_q0(cb.code(c0), cb.code(c0) + latent);
  std::vector<double> offset(latent);
  for (int j = 0; j < latent; ++j) offset[j] = z_q0[j] - z_e0[j];

  auto ste_loss = [&](const vq::CoderNet& e) {
    const std::vector<double> z = e.forward(x);
    std::vector<double> dec_in(latent);
    for (int j = 0; j < latent; ++j) dec_in[j] = z[j] + offset[j];
    const std::vector<double> x_hat = dec.forward(dec_in);
    double rec = 0.0;
    for (int i = 0; i < in_dim; ++i) rec += (x[i] - x_hat[i]) * (x[i] - x_hat[i]);
    double commit = 0.0;
    for (int j = 0; j < latent; ++j) commit += (z[j] - z_q0[j]) * (z[j] - z_q0[j]);
    return rec + beta * commit;
  };

  // Analytic gradient: decoder-input gradient copied onto z_e plus the
  // commitment pull.
  std::vector<std::vector<double>> acts_e, acts_d;
  enc.forward_trace(x, acts_e);
  dec.forward_trace(z_q0, acts_d);
  const std::vector<double>& x_hat = acts_d.back();
  std::vector<double> grad_xhat(in_dim);
  for (int i = 0; i < in_dim; ++i) grad_xhat[i] = 2.0 * (x_hat[i] - x[i]);
  vq::NetGrads dec_grads = dec.make_grads();
  const std::vector<double> grad_zq = dec.backward(acts_d, grad_xhat, dec_grads);
  std::vector<double> grad_ze = grad_zq;
  for (int j = 0; j < latent; ++j) grad_ze[j] += 2.0 * beta * (z_e0[j] - z_q0[j]);
  vq::NetGrads enc_grads = enc.make_grads();
  enc.backward(acts_e, grad_ze, enc_grads);

  const double h = 1e-6;
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    for (std::size_t wi = 0; wi < enc.layers[l].weights.size(); wi += 3) {
      vq::CoderNet ep = enc, em = enc;
      ep.layers[l].weights[wi] += h;
      em.layers[l].weights[wi] -= h;
      const double fd = (ste_loss(ep) - ste_loss(em)) / (2 * h);
      const double an = enc_grads.weights[l][wi];
      CHECK(std::abs(fd - an) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
    for (std::size_t bi = 0; bi < enc.layers[l].bias.size(); ++bi) {
      vq::CoderNet ep = enc, em = enc;
      ep.layers[l].bias[bi] += h;
      em.layers[l].bias[bi] -= h;
      const double fd = (ste_loss(ep) - ste_loss(em)) / (2 * h);
      CHECK(std::abs(fd - enc_grads.bias[l][bi]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("gradient routing: one step moves the code without the commitment weight") {
  // Single chunk, single epoch: exactly one SGD step, so the selected code
  // sees only the codebook term (beta-independent) while the encoder sees the
  // commitment term (beta-dependent).
  const auto data = fixtures::sinusoid_dataset(1, 4, 2, 5);
  vq::PoseChunkSpec chunk;
  chunk.window = 4;
  chunk.stride = 4;
  chunk.dof = 2;
  vq::NetArch arch;
  arch.hidden = {8};

  vq::TrainConfig base;
  base.epochs = 1;
  base.learning_rate = 0.01;
  base.refresh_every = 0;
  base.seed = 9;

  std::vector<std::vector<double>> chunks = vq::chunk_trajectory(data[0], chunk);
  REQUIRE(chunks.size() == 1);

  vq::TrainConfig beta_small = base, beta_large = base;
  beta_small.beta = 0.1;
  beta_large.beta = 0.9;
  const auto a = vq::train_reference(chunks, chunk, 4, 3, arch, beta_small);
  const auto b = vq::train_reference(chunks, chunk, 4, 3, arch, beta_large);

  CHECK(a.codebook.codes == b.codebook.codes);
  CHECK(a.encoder.layers[0].weights != b.encoder.layers[0].weights);
}

TEST_CASE("reference training converges and is seed-deterministic") {
  const auto data = fixtures::sinusoid_dataset(6, 24, 3, 31);
  vq::PoseChunkSpec chunk;
  chunk.window = 6;
  chunk.stride = 3;
  chunk.dof = 3;
  std::vector<std::vector<double>> chunks;
  for (const auto& seq : data) {
    auto c = vq::chunk_trajectory(seq, chunk);
    chunks.insert(chunks.end(), c.begin(), c.end());
  }

  vq::NetArch arch;
  arch.hidden = {32};
  vq::TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 0.02;
  cfg.refresh_every = 15;
  cfg.seed = 77;

  const auto model = vq::train_reference(chunks, chunk, 16, 6, arch, cfg);
  CHECK(model.history.size() == static_cast<std::size_t>(cfg.epochs));
  CHECK(model.history.back().rec < model.history.front().rec);
  for (const auto& row : model.history) {
    CHECK(row.rec >= 0);
    CHECK(row.vq >= 0);
    CHECK(std::isfinite(row.total));
  }
  // refresh epochs recorded
  bool saw_refresh = false;
  for (const auto& row : model.history)
    if (row.refreshed_cold >= 0) saw_refresh = true;
  CHECK(saw_refresh);

  const auto rerun = vq::train_reference(chunks, chunk, 16, 6, arch, cfg);
  CHECK(model.codebook.codes == rerun.codebook.codes);
  for (std::size_t l = 0; l < model.encoder.layers.size(); ++l) {
    CHECK(model.encoder.layers[l].weights == rerun.encoder.layers[l].weights);
    CHECK(model.decoder.layers[l].weights == rerun.decoder.layers[l].weights);
  }
}

TEST_CASE("divergent training aborts and hands back the history so far") {
  const auto data = fixtures::sinusoid_dataset(2, 12, 2, 5);
  vq::PoseChunkSpec chunk;
  chunk.window = 4;
  chunk.stride = 4;
  chunk.dof = 2;
  std::vector<std::vector<double>> chunks;
  for (const auto& seq : data) {
    auto c = vq::chunk_trajectory(seq, chunk);
    chunks.insert(chunks.end(), c.begin(), c.end());
  }
  vq::NetArch arch;
  arch.hidden = {8};
  vq::TrainConfig cfg;
  cfg.learning_rate = 1e6;  // guaranteed blow-up
  cfg.epochs = 50;
  cfg.refresh_every = 0;
  cfg.seed = 3;

  bool caught = false;
  try {
    vq::train_reference(chunks, chunk, 4, 3, arch, cfg);
  } catch (const vq::TrainAbort& e) {
    caught = true;
    CHECK(!e.history.empty());
    CHECK(!std::isfinite(e.history.back().total));
  }
  CHECK(caught);
}

TEST_CASE("reconstruct equals the explicit encode-quantize-decode chain") {
  Rng rng(6);
  vq::CoderNet enc = vq::CoderNet::create({6, 8, 3}, vq::Activation::tanh_fn);
  vq::CoderNet dec = vq::CoderNet::create({3, 8, 6}, vq::Activation::tanh_fn);
  enc.init_random(rng, 1.0);
  dec.init_random(rng, 1.0);
  const vq::Codebook cb = vq::Codebook::random(5, 3, rng, 0.3);

  const auto x = random_chunk(6, rng);
  const std::size_t c = vq::quantize(cb, enc.forward(x));
  const std::vector<double> z_q(cb.code(c), cb.code(c) + 3);
  const auto direct = dec.forward(z_q);
  const auto via = vq::reconstruct(enc, dec, cb, x);
  CHECK(via == direct);

  // one-code codebook: output constant across inputs
  const vq::Codebook one{1, 3, {0.1, 0.2, 0.3}};
  const auto y1 = vq::reconstruct(enc, dec, one, random_chunk(6, rng));
  const auto y2 = vq::reconstruct(enc, dec, one, random_chunk(6, rng));
  CHECK(y1 == y2);

  // translate with identical source and target nets is reconstruction
  CHECK(vq::translate(enc, dec, cb, x) == via);
}

TEST_CASE("stage-1 alignment leaves decoder and codebook untouched") {
  const auto ref_data = fixtures::sinusoid_dataset(4, 16, 2, 19);
  vq::PoseChunkSpec chunk;
  chunk.window = 4;
  chunk.stride = 2;
  chunk.dof = 2;
  std::vector<std::vector<double>> chunks_ref;
  for (const auto& seq : ref_data) {
    auto c = vq::chunk_trajectory(seq, chunk);
    chunks_ref.insert(chunks_ref.end(), c.begin(), c.end());
  }
  // new morphology = scaled copy
  std::vector<std::vector<double>> chunks_new = chunks_ref;
  for (auto& c : chunks_new)
    for (double& v : c) v *= 1.5;

  Rng rng(40);
  vq::CoderNet ref_enc = vq::CoderNet::create({8, 16, 4}, vq::Activation::tanh_fn);
  ref_enc.init_random(rng, 1.0);
  vq::Codebook cb = vq::Codebook::random(8, 4, rng, 0.2);
  const std::vector<double> codebook_before = cb.codes;

  vq::NetArch arch;
  arch.hidden = {16};
  vq::TrainConfig cfg;
  cfg.stage1_epochs = 30;
  cfg.stage2_epochs = 1;
  cfg.learning_rate = 0.01;
  cfg.update_codebook_stage2 = false;
  cfg.refresh_every = 0;
  cfg.seed = 4;

  const auto model = vq::train_new_morphology(chunks_new, chunks_ref, ref_enc, cb, arch, cfg);
  CHECK(cb.codes == codebook_before);  // frozen throughout here
  CHECK(model.history.size() == static_cast<std::size_t>(cfg.stage1_epochs + cfg.stage2_epochs));
  // distillation decreased over stage 1
  CHECK(model.history[cfg.stage1_epochs - 1].distill < model.history.front().distill);
}

TEST_CASE("chunking") {
  const auto data = fixtures::sinusoid_dataset(1, 36, 4, 3);
  vq::PoseChunkSpec spec;
  spec.window = 8;
  spec.stride = 4;
  spec.dof = 4;
  const auto chunks = vq::chunk_trajectory(data[0], spec);
  CHECK(chunks.size() == (36 - 8) / 4 + 1);
  for (const auto& c : chunks) CHECK(c.size() == 32);
  // frame-major flattening: chunk 1 starts at frame `stride`
  for (int d = 0; d < 4; ++d) CHECK(chunks[1][d] == data[0][4][d]);

  // too-short sequence gives no chunks
  std::vector<Eigen::VectorXd> tiny(3, Eigen::VectorXd::Zero(4));
  CHECK(vq::chunk_trajectory(tiny, spec).empty());
}

TEST_CASE("mask_sequence") {
  std::vector<std::int64_t> tokens(10000);
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<std::int64_t>(i % 97);

  CHECK(vq::mask_sequence(tokens, 0.0, 5) == tokens);

  const auto all = vq::mask_sequence(tokens, 1.0, 5);
  for (std::int64_t t : all) CHECK(t == vq::kMaskToken);

  const auto half = vq::mask_sequence(tokens, 0.5, 5);
  int masked = 0;
  for (std::size_t i = 0; i < half.size(); ++i) {
    if (half[i] == vq::kMaskToken) ++masked;
    else CHECK(half[i] == tokens[i]);
  }
  CHECK(masked >= 4800);
  CHECK(masked <= 5200);

  CHECK(vq::mask_sequence(tokens, 0.5, 5) == half);  // seeded reproducibility
  CHECK_THROWS_AS(vq::mask_sequence(tokens, 1.5, 5), ConfigError);
}

TEST_CASE("mask ratio schedule") {
  CHECK(vq::mask_ratio_schedule(0.0) == 0.0);
  CHECK(vq::mask_ratio_schedule(0.1) == 0.0);
  CHECK(vq::mask_ratio_schedule(0.5) == doctest::Approx(0.5));
  CHECK(vq::mask_ratio_schedule(0.9) == 1.0);
  CHECK(vq::mask_ratio_schedule(1.0) == 1.0);

  double prev = 0.0;
  for (double e = 0.0; e <= 1.0; e += 0.001) {
    const double p = vq::mask_ratio_schedule(std::min(e, 1.0));
    CHECK(p >= prev);                    // monotone
    CHECK(p - prev <= 0.002 + 1e-12);    // continuous (bounded increments)
    prev = p;
  }
}

TEST_SUITE_END();
