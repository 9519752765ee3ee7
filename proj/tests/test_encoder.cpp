#include <doctest.h>

#include <cmath>

#include "cmbert/encoder.hpp"
#include "cmbert/error.hpp"
#include "cmbert/rope.hpp"
#include "support/test_util.hpp"

using namespace cmbert;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.n_layers = 4;
  cfg.d_ff = 24;
  cfg.vocab_size = 50;
  cfg.max_seq_len = 64;
  cfg.attention_block_size = 8;
  return cfg;
}

// Independent reference: plain loops, no kernel or Mat helpers.
template <typename T>
Mat<T> geglu_reference(const Mat<T>& x, const Mat<T>& wg, const Mat<T>& wl, const Mat<T>& wd) {
  const std::size_t n = x.rows, dm = x.cols, ff = wg.cols;
  Mat<T> hidden(n, ff);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < ff; ++j) {
      T gate = 0, lin = 0;
      for (std::size_t c = 0; c < dm; ++c) {
        gate += x.at(r, c) * wg.at(c, j);
        lin += x.at(r, c) * wl.at(c, j);
      }
      const T act = static_cast<T>(0.5 * gate * (1.0 + std::erf(gate / std::sqrt(2.0))));
      hidden.at(r, j) = act * lin;
    }
  }
  Mat<T> out(n, dm);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < dm; ++c) {
      T acc = 0;
      for (std::size_t j = 0; j < ff; ++j) acc += hidden.at(r, j) * wd.at(j, c);
      out.at(r, c) = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("geglu: zero input annihilates") {
  Rng rng(2);
  auto wg = testutil::random_mat<float>(6, 10, rng);
  auto wl = testutil::random_mat<float>(6, 10, rng);
  auto wd = testutil::random_mat<float>(10, 6, rng);
  Mat<float> x(3, 6);
  const auto out = geglu_forward(x, wg, wl, wd);
  for (auto v : out.data) CHECK(v == 0.0f);
}

TEST_CASE("geglu: saturated scalar case") {
  // d_model = d_ff = 1, all weights 1, x = 10: GeLU(10) ~ 10, gate * lin ~ 100.
  Mat<double> x(1, 1), w(1, 1);
  x.at(0, 0) = 10.0;
  w.at(0, 0) = 1.0;
  const auto out = geglu_forward(x, w, w, w);
  CHECK(out.at(0, 0) == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("geglu matches an independent reference on random inputs") {
  Rng rng(5);
  auto x = testutil::random_mat<double>(7, 12, rng);
  auto wg = testutil::random_mat<double>(12, 20, rng);
  auto wl = testutil::random_mat<double>(12, 20, rng);
  auto wd = testutil::random_mat<double>(20, 12, rng);
  const auto got = geglu_forward(x, wg, wl, wd);
  const auto want = geglu_reference(x, wg, wl, wd);
  CHECK(testutil::max_abs_diff(got, want) < 1e-6);
}

TEST_CASE("layer norm normalizes rows and scales") {
  Rng rng(9);
  auto x = testutil::random_mat<double>(5, 16, rng, 3.0);
  std::vector<double> scale(16, 2.0);
  Mat<double> out, hat;
  std::vector<double> inv;
  layer_norm(x, std::span<const double>(scale), 1e-5, out, &hat, &inv);
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 16; ++c) mean += hat.at(r, c);
    mean /= 16;
    for (std::size_t c = 0; c < 16; ++c) var += hat.at(r, c) * hat.at(r, c);
    var /= 16;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(std::abs(var - 1.0) < 1e-3);  // eps shifts variance slightly below 1
    for (std::size_t c = 0; c < 16; ++c)
      CHECK(out.at(r, c) == doctest::Approx(2.0 * hat.at(r, c)));
  }
}

TEST_CASE("zeroed output projections make every layer the identity") {
  const ModelConfig cfg = small_config();
  auto params = ParameterStore<float>::init(cfg, 3);
  for (auto& layer : params.layers) {
    layer.wo.fill(0.0f);
    layer.w_down.fill(0.0f);
  }
  Rng rng(8);
  const std::size_t seq = 10;
  std::vector<std::int32_t> positions(seq);
  for (std::size_t i = 0; i < seq; ++i) positions[i] = static_cast<std::int32_t>(i);
  const std::vector<std::uint8_t> valid(seq, 1);
  const auto x = testutil::random_mat<float>(seq, 16, rng);

  Mat<float> cur = x;
  for (const auto& layer : params.layers) {
    cur = encoder_layer_forward(cur, layer, cfg, std::span<const std::int32_t>(positions), valid,
                                ForwardOptions{});
  }
  CHECK(cur.data == x.data);  // residual-only path is bitwise identity
}

TEST_CASE("layer forward equals a hand-composed call sequence") {
  const ModelConfig cfg = [] {
    auto c = small_config();
    c.n_layers = 1;
    return c;
  }();
  auto params = ParameterStore<double>::init(cfg, 13);
  const auto& layer = params.layers[0];
  Rng rng(14);
  const std::size_t seq = 6, d = 16, dh = 8;
  const auto x = testutil::random_mat<double>(seq, d, rng);
  std::vector<std::int32_t> positions{0, 1, 2, 3, 4, 5};
  const std::vector<std::uint8_t> valid(seq, 1);

  // Hand composition of the published sub-operations.
  Mat<double> n1;
  layer_norm(x, std::span<const double>(layer.ln_attn_scale), 1e-5, n1);
  Mat<double> q(seq, d), k(seq, d), v(seq, d);
  matmul_nn(n1, layer.wq, q);
  matmul_nn(n1, layer.wk, k);
  matmul_nn(n1, layer.wv, v);
  Mat<double> concat(seq, d);
  for (std::size_t h = 0; h < 2; ++h) {
    Mat<double> qh(seq, dh), kh(seq, dh), vh(seq, dh);
    for (std::size_t r = 0; r < seq; ++r)
      for (std::size_t c = 0; c < dh; ++c) {
        qh.at(r, c) = q.at(r, h * dh + c);
        kh.at(r, c) = k.at(r, h * dh + c);
        vh.at(r, c) = v.at(r, h * dh + c);
      }
    rope_apply_inplace(qh, std::span<const std::int32_t>(positions), cfg);
    rope_apply_inplace(kh, std::span<const std::int32_t>(positions), cfg);
    Mat<double> oh;
    attention_dense(qh, kh, vh, valid, oh);
    for (std::size_t r = 0; r < seq; ++r)
      for (std::size_t c = 0; c < dh; ++c) concat.at(r, h * dh + c) = oh.at(r, c);
  }
  Mat<double> x_mid = x;
  matmul_nn(concat, layer.wo, x_mid, true);
  Mat<double> n2;
  layer_norm(x_mid, std::span<const double>(layer.ln_ffn_scale), 1e-5, n2);
  Mat<double> want = x_mid;
  const auto ffn = geglu_forward(n2, layer.w_gate, layer.w_lin, layer.w_down);
  for (std::size_t i = 0; i < want.data.size(); ++i) want.data[i] += ffn.data[i];

  const auto got = encoder_layer_forward(x, layer, cfg, std::span<const std::int32_t>(positions),
                                         valid, ForwardOptions{AttentionMode::dense});
  CHECK(testutil::max_abs_diff(got, want) < 1e-7);
}

TEST_CASE("encoder forward: determinism, batch independence, input validation") {
  const ModelConfig cfg = small_config();
  const auto params = ParameterStore<float>::init(cfg, 5);
  std::vector<std::int32_t> ids{2, 7, 12, 45, 3};
  const std::vector<std::uint8_t> valid(5, 1);

  const auto a = encoder_forward_seq(params, std::span<const std::int32_t>(ids), valid,
                                     ForwardOptions{});
  const auto b = encoder_forward_seq(params, std::span<const std::int32_t>(ids), valid,
                                     ForwardOptions{});
  CHECK(a.data == b.data);  // bitwise reproducible

  std::vector<std::int32_t> bad{2, 50, 3};  // 50 == vocab_size
  const std::vector<std::uint8_t> valid3(3, 1);
  CHECK_THROWS_AS(
      encoder_forward_seq(params, std::span<const std::int32_t>(bad), valid3, ForwardOptions{}),
      InputError);

  std::vector<std::int32_t> too_long(cfg.max_seq_len + 1, 2);
  const std::vector<std::uint8_t> valid_long(too_long.size(), 1);
  CHECK_THROWS_AS(encoder_forward_seq(params, std::span<const std::int32_t>(too_long), valid_long,
                                      ForwardOptions{}),
                  InputError);
}

TEST_CASE("dense and blockwise modes agree through the full stack") {
  const ModelConfig cfg = small_config();
  const auto params = ParameterStore<float>::init(cfg, 11);
  std::vector<std::int32_t> ids{2, 9, 17, 25, 33, 41, 8, 3};
  std::vector<std::uint8_t> valid(8, 1);
  valid[6] = 0;
  const auto dense = encoder_forward_seq(params, std::span<const std::int32_t>(ids), valid,
                                         ForwardOptions{AttentionMode::dense});
  const auto blockwise = encoder_forward_seq(params, std::span<const std::int32_t>(ids), valid,
                                             ForwardOptions{AttentionMode::blockwise});
  CHECK(testutil::max_abs_diff(dense, blockwise) < 1e-5);
}

TEST_CASE("shifting padded content moves outputs with it (relative positions only)") {
  const ModelConfig cfg = small_config();
  const auto params = ParameterStore<double>::init(cfg, 23);
  Rng rng(6);
  const std::size_t content = 7, seq = 16, shift = 4;
  std::vector<std::int32_t> tokens(content);
  for (auto& t : tokens) t = 5 + static_cast<std::int32_t>(rng.uniform_below(40));

  std::vector<std::int32_t> front(seq, 0), shifted(seq, 0);
  std::vector<std::uint8_t> valid_front(seq, 0), valid_shifted(seq, 0);
  for (std::size_t i = 0; i < content; ++i) {
    front[i] = tokens[i];
    valid_front[i] = 1;
    shifted[i + shift] = tokens[i];
    valid_shifted[i + shift] = 1;
  }
  const auto a = encoder_forward_seq(params, std::span<const std::int32_t>(front), valid_front,
                                     ForwardOptions{AttentionMode::dense});
  const auto b = encoder_forward_seq(params, std::span<const std::int32_t>(shifted),
                                     valid_shifted, ForwardOptions{AttentionMode::dense});
  for (std::size_t i = 0; i < content; ++i)
    for (std::size_t c = 0; c < a.cols; ++c)
      CHECK(a.at(i, c) == doctest::Approx(b.at(i + shift, c)).epsilon(1e-9));
}

TEST_CASE("mlm logits: tied head, shapes, trivial cases") {
  const ModelConfig cfg = small_config();
  Rng rng(19);
  // Orthogonal embedding rows: hidden equal to row t puts the argmax at t.
  Mat<float> emb(8, 8);
  for (std::size_t i = 0; i < 8; ++i) emb.at(i, i) = 1.0f + 0.1f * static_cast<float>(i);
  Mat<float> hidden(3, 8);
  hidden.at(0, 5) = 1.0f;   // matches embedding row 5
  hidden.at(2, 1) = -4.0f;  // row 1, negative: argmax elsewhere, still defined
  std::vector<std::int32_t> positions{0, 1, 2};
  const auto logits = mlm_logits(hidden, std::span<const std::int32_t>(positions), emb);
  CHECK(logits.rows == 3);
  CHECK(logits.cols == 8);
  std::size_t argmax = 0;
  for (std::size_t j = 1; j < 8; ++j)
    if (logits.at(0, j) > logits.at(0, argmax)) argmax = j;
  CHECK(argmax == 5);
  for (std::size_t j = 0; j < 8; ++j) CHECK(logits.at(1, j) == 0.0f);  // zero hidden row

  const std::vector<std::int32_t> empty;
  const auto none = mlm_logits(hidden, std::span<const std::int32_t>(empty), emb);
  CHECK(none.rows == 0);
  (void)cfg;
  (void)rng;
}

TEST_CASE("parameter census holds exactly the bias-free tensor set") {
  const ModelConfig cfg = small_config();
  auto params = ParameterStore<float>::init(cfg, 1);
  const auto tensors = params.named_tensors();
  CHECK(tensors.size() == 1 + 9 * 4 + 1);  // embedding + 9 per layer + final norm
  std::size_t norms = 0;
  for (const auto& t : tensors) {
    CHECK(t.name.find("bias") == std::string::npos);
    if (t.name.find("norm.scale") != std::string::npos) {
      ++norms;
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.data[i] == 1.0f);
    }
  }
  CHECK(norms == 2 * 4 + 1);
  CHECK(params.all_finite());

  // init is truncated at 2 sigma with stddev 0.02
  for (const auto& t : tensors) {
    if (t.name == "token_embedding")
      for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(t.data[i]) <= 0.04f);
  }
}
