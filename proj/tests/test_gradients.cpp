#include <doctest.h>

#include <cmath>

#include "cmbert/encoder.hpp"
#include "cmbert/mlm.hpp"
#include "support/test_util.hpp"

using namespace cmbert;

namespace {

ModelConfig grad_config() {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_layers = 2;
  cfg.d_ff = 16;
  cfg.vocab_size = 50;
  cfg.max_seq_len = 32;
  cfg.attention_block_size = 8;
  return cfg;
}

// Hand-built batch: two rows, padding tail on the second, mask positions
// covering the masked, random-replacement and kept corruption branches.
MLMBatch grad_batch() {
  MLMBatch b;
  b.batch = 2;
  b.seq = 10;
  b.input_ids = {
      2, 4,  17, 23, 4, 30, 9,  41, 12, 3,  // row 0: MASK at 1 and 4
      2, 33, 4,  25, 7, 18, 3,  0,  0,  0,  // row 1: padded tail
  };
  b.valid = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0};
  b.labels.assign(20, kIgnoreLabel);
  b.labels[1] = 28;   // [MASK]
  b.labels[4] = 35;   // [MASK]
  b.labels[6] = 9;    // kept original
  b.labels[8] = 44;   // random replacement (input 12, label 44)
  b.labels[12] = 11;  // [MASK] in row 1
  b.labels[15] = 18;  // kept original in row 1
  b.mask_positions = {{0, 1}, {0, 4}, {0, 6}, {0, 8}, {1, 2}, {1, 5}};
  return b;
}

double loss_of(const ParameterStore<double>& params, const MLMBatch& batch) {
  return mlm_objective<double>(params, batch, ForwardOptions{}, nullptr).loss;
}

}  // namespace

TEST_CASE("finite differences confirm every parameter tensor's gradient") {
  const ModelConfig cfg = grad_config();
  auto params = ParameterStore<double>::init(cfg, 99);
  const MLMBatch batch = grad_batch();

  auto grads = clone_zeroed(params);
  const auto result = mlm_objective<double>(params, batch, ForwardOptions{}, &grads);
  CHECK(result.n_masked == 6);
  CHECK(std::isfinite(result.loss));

  const double eps = 1e-4;
  auto p_tensors = params.named_tensors();
  auto g_tensors = grads.named_tensors();
  for (std::size_t t = 0; t < p_tensors.size(); ++t) {
    auto& pt = p_tensors[t];
    const auto& gt = g_tensors[t];
    double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
    for (std::size_t i = 0; i < pt.size(); ++i) {
      const double keep = pt.data[i];
      pt.data[i] = keep + eps;
      const double up = loss_of(params, batch);
      pt.data[i] = keep - eps;
      const double down = loss_of(params, batch);
      pt.data[i] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = gt.data[i];
      diff_sq += (numeric - analytic) * (numeric - analytic);
      analytic_sq += analytic * analytic;
      numeric_sq += numeric * numeric;
    }
    const double rel = std::sqrt(diff_sq) /
                       std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), 1e-12});
    INFO("tensor ", pt.name);
    CHECK(rel < 1e-4);
  }
}

TEST_CASE("gradient store is congruent and norm scales receive gradient") {
  const ModelConfig cfg = grad_config();
  auto params = ParameterStore<double>::init(cfg, 7);
  const MLMBatch batch = grad_batch();
  auto grads = clone_zeroed(params);
  mlm_objective<double>(params, batch, ForwardOptions{}, &grads);

  auto p_tensors = params.named_tensors();
  auto g_tensors = grads.named_tensors();
  REQUIRE(p_tensors.size() == g_tensors.size());
  for (std::size_t t = 0; t < p_tensors.size(); ++t) {
    CHECK(p_tensors[t].name == g_tensors[t].name);
    CHECK(p_tensors[t].rows == g_tensors[t].rows);
    CHECK(p_tensors[t].cols == g_tensors[t].cols);
    if (p_tensors[t].name.find("norm.scale") != std::string::npos) {
      double norm = 0;
      for (std::size_t i = 0; i < g_tensors[t].size(); ++i)
        norm += std::abs(g_tensors[t].data[i]);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("doubling the upstream gradient doubles every parameter gradient") {
  const ModelConfig cfg = grad_config();
  auto params = ParameterStore<double>::init(cfg, 21);
  Rng rng(4);
  std::vector<std::int32_t> ids{2, 8, 15, 22, 3};
  const std::vector<std::uint8_t> valid(5, 1);
  std::vector<std::int32_t> positions{1, 3};

  auto run = [&](double scale) {
    SeqCache<double> cache;
    const auto hidden = encoder_forward_seq(params, std::span<const std::int32_t>(ids), valid,
                                            ForwardOptions{}, &cache);
    const auto logits = mlm_logits(hidden, std::span<const std::int32_t>(positions),
                                   params.token_embedding);
    Mat<double> d_logits(logits.rows, logits.cols);
    Rng local(55);
    for (auto& v : d_logits.data) v = (local.uniform() - 0.5) * scale;
    auto grads = clone_zeroed(params);
    Mat<double> d_hidden(hidden.rows, hidden.cols);
    mlm_logits_backward(hidden, std::span<const std::int32_t>(positions), params.token_embedding,
                        d_logits, d_hidden, grads.token_embedding);
    encoder_backward_seq(params, cache, d_hidden, grads);
    return grads;
  };
  auto g1 = run(1.0);
  auto g2 = run(2.0);
  auto t1 = g1.named_tensors();
  auto t2 = g2.named_tensors();
  for (std::size_t t = 0; t < t1.size(); ++t)
    for (std::size_t i = 0; i < t1[t].size(); ++i)
      CHECK(t2[t].data[i] == doctest::Approx(2.0 * t1[t].data[i]).epsilon(1e-9));
}

TEST_CASE("batch without masked positions yields zero loss and untouched gradients") {
  const ModelConfig cfg = grad_config();
  auto params = ParameterStore<double>::init(cfg, 31);
  MLMBatch batch;
  batch.batch = 1;
  batch.seq = 4;
  batch.input_ids = {2, 10, 11, 3};
  batch.valid = {1, 1, 1, 1};
  batch.labels.assign(4, kIgnoreLabel);

  auto grads = clone_zeroed(params);
  const auto result = mlm_objective<double>(params, batch, ForwardOptions{}, &grads);
  CHECK(result.loss == 0.0);
  CHECK(result.n_masked == 0);
  for (const auto& t : grads.named_tensors())
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.data[i] == 0.0);
}
