#include "cmbert/encoder.hpp"

#include <cmath>

#include "cmbert/error.hpp"
#include "cmbert/rope.hpp"

namespace cmbert {

namespace {

template <typename T>
void copy_head_out(const Mat<T>& full, std::size_t head, std::size_t d_head, Mat<T>& slice) {
  slice.rows = full.rows;
  slice.cols = d_head;
  slice.data.resize(full.rows * d_head);
  for (std::size_t r = 0; r < full.rows; ++r) {
    const T* src = full.row(r) + head * d_head;
    std::copy(src, src + d_head, slice.row(r));
  }
}

template <typename T>
void add_head_back(const Mat<T>& slice, std::size_t head, std::size_t d_head, Mat<T>& full) {
  for (std::size_t r = 0; r < slice.rows; ++r) {
    T* dst = full.row(r) + head * d_head;
    const T* src = slice.row(r);
    for (std::size_t c = 0; c < d_head; ++c) dst[c] += src[c];
  }
}

}  // namespace

template <typename T>
void layer_norm(const Mat<T>& x, std::span<const T> scale, T eps, Mat<T>& out, Mat<T>* x_hat_out,
                std::vector<T>* inv_std_out) {
  const std::size_t d = x.cols;
  out.rows = x.rows;
  out.cols = d;
  out.data.resize(x.size());
  if (x_hat_out) {
    x_hat_out->rows = x.rows;
    x_hat_out->cols = d;
    x_hat_out->data.resize(x.size());
  }
  if (inv_std_out) inv_std_out->resize(x.rows);
  const T inv_d = T(1) / static_cast<T>(d);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const T* row = x.row(r);
    const T mean = kern::reduce_sum(row, d) * inv_d;
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) {
      const T diff = row[c] - mean;
      var += diff * diff;
    }
    var *= inv_d;
    const T inv = T(1) / static_cast<T>(std::sqrt(static_cast<double>(var) +
                                                  static_cast<double>(eps)));
    if (inv_std_out) (*inv_std_out)[r] = inv;
    T* orow = out.row(r);
    T* hrow = x_hat_out ? x_hat_out->row(r) : nullptr;
    for (std::size_t c = 0; c < d; ++c) {
      const T hat = (row[c] - mean) * inv;
      if (hrow) hrow[c] = hat;
      orow[c] = hat * scale[c];
    }
  }
}

namespace {

// dx (+)= inv_std * (dhat - mean(dhat) - x_hat * mean(dhat .* x_hat)), row-wise.
template <typename T>
void layer_norm_backward_rows(const Mat<T>& d_hat, const Mat<T>& x_hat,
                              const std::vector<T>& inv_std, Mat<T>& dx) {
  const std::size_t d = x_hat.cols;
  const T inv_d = T(1) / static_cast<T>(d);
  for (std::size_t r = 0; r < x_hat.rows; ++r) {
    const T* dh = d_hat.row(r);
    const T* xh = x_hat.row(r);
    T* out = dx.row(r);
    const T m1 = kern::reduce_sum(dh, d) * inv_d;
    const T m2 = kern::dot(dh, xh, d) * inv_d;
    const T inv = inv_std[r];
    for (std::size_t c = 0; c < d; ++c) out[c] += inv * (dh[c] - m1 - xh[c] * m2);
  }
}

template <typename T>
void accumulate_scale_grad(const Mat<T>& d_out, const Mat<T>& x_hat, T* d_scale) {
  for (std::size_t r = 0; r < x_hat.rows; ++r) {
    const T* d = d_out.row(r);
    const T* h = x_hat.row(r);
    for (std::size_t c = 0; c < x_hat.cols; ++c) d_scale[c] += d[c] * h[c];
  }
}

}  // namespace

template <typename T>
Mat<T> geglu_forward(const Mat<T>& x, const Mat<T>& w_gate, const Mat<T>& w_lin,
                     const Mat<T>& w_down) {
  if (x.cols != w_gate.rows || w_gate.rows != w_lin.rows || w_gate.cols != w_lin.cols ||
      w_down.rows != w_gate.cols || w_down.cols != x.cols)
    throw InputError("geglu: weight shapes do not conform");
  Mat<T> gate(x.rows, w_gate.cols);
  Mat<T> lin(x.rows, w_lin.cols);
  matmul_nn(x, w_gate, gate);
  matmul_nn(x, w_lin, lin);
  for (std::size_t i = 0; i < gate.data.size(); ++i)
    gate.data[i] = gelu(gate.data[i]) * lin.data[i];
  Mat<T> out(x.rows, w_down.cols);
  matmul_nn(gate, w_down, out);
  return out;
}

template <typename T>
Mat<T> encoder_layer_forward(const Mat<T>& x, const LayerParams<T>& layer,
                             const ModelConfig& cfg, std::span<const std::int32_t> positions,
                             const std::vector<std::uint8_t>& valid, const ForwardOptions& opts,
                             LayerCache<T>* cache) {
  const std::size_t seq = x.rows;
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t dh = static_cast<std::size_t>(cfg.d_head());
  const std::size_t heads = static_cast<std::size_t>(cfg.n_heads);
  const T eps = static_cast<T>(cfg.layer_norm_eps);

  // Attention branch.
  Mat<T> n1, n1_hat;
  std::vector<T> inv1;
  layer_norm(x, std::span<const T>(layer.ln_attn_scale), eps, n1, cache ? &n1_hat : nullptr,
             cache ? &inv1 : nullptr);

  Mat<T> q(seq, d), k(seq, d), v(seq, d);
  matmul_nn(n1, layer.wq, q);
  matmul_nn(n1, layer.wk, k);
  matmul_nn(n1, layer.wv, v);

  Mat<T> concat(seq, d);
  if (cache) {
    cache->q_rot.resize(heads);
    cache->k_rot.resize(heads);
    cache->v_head.resize(heads);
    cache->probs.resize(heads);
  }
  Mat<T> qh, kh, vh, oh, probs;
  for (std::size_t h = 0; h < heads; ++h) {
    copy_head_out(q, h, dh, qh);
    copy_head_out(k, h, dh, kh);
    copy_head_out(v, h, dh, vh);
    rope_apply_inplace(qh, positions, cfg);
    rope_apply_inplace(kh, positions, cfg);
    if (cache) {
      // Backward consumes the saved attention weights, so take the dense path.
      attention_dense(qh, kh, vh, valid, oh, &probs);
      cache->q_rot[h] = qh;
      cache->k_rot[h] = kh;
      cache->v_head[h] = vh;
      cache->probs[h] = probs;
    } else if (opts.mode == AttentionMode::dense) {
      attention_dense(qh, kh, vh, valid, oh);
    } else {
      attention_blockwise(qh, kh, vh, valid,
                          static_cast<std::size_t>(cfg.attention_block_size), oh);
    }
    for (std::size_t r = 0; r < seq; ++r)
      std::copy(oh.row(r), oh.row(r) + dh, concat.row(r) + h * dh);
  }

  Mat<T> x_mid = x;
  matmul_nn(concat, layer.wo, x_mid, /*accumulate=*/true);

  // Feed-forward branch.
  Mat<T> n2, n2_hat;
  std::vector<T> inv2;
  layer_norm(x_mid, std::span<const T>(layer.ln_ffn_scale), eps, n2, cache ? &n2_hat : nullptr,
             cache ? &inv2 : nullptr);

  const std::size_t ff = static_cast<std::size_t>(cfg.d_ff);
  Mat<T> gate_pre(seq, ff), lin(seq, ff);
  matmul_nn(n2, layer.w_gate, gate_pre);
  matmul_nn(n2, layer.w_lin, lin);
  Mat<T> gate_act(seq, ff), hidden(seq, ff);
  for (std::size_t i = 0; i < gate_pre.data.size(); ++i) {
    gate_act.data[i] = gelu(gate_pre.data[i]);
    hidden.data[i] = gate_act.data[i] * lin.data[i];
  }
  Mat<T> out = x_mid;
  matmul_nn(hidden, layer.w_down, out, /*accumulate=*/true);

  if (cache) {
    cache->x_in = x;
    cache->n1_hat = std::move(n1_hat);
    cache->n1 = std::move(n1);
    cache->inv1 = std::move(inv1);
    cache->attn_concat = std::move(concat);
    cache->x_mid = std::move(x_mid);
    cache->n2_hat = std::move(n2_hat);
    cache->n2 = std::move(n2);
    cache->inv2 = std::move(inv2);
    cache->gate_pre = std::move(gate_pre);
    cache->gate_act = std::move(gate_act);
    cache->lin = std::move(lin);
    cache->hidden = std::move(hidden);
  }
  return out;
}

template <typename T>
Mat<T> encoder_forward_seq(const ParameterStore<T>& params, std::span<const std::int32_t> ids,
                           const std::vector<std::uint8_t>& valid, const ForwardOptions& opts,
                           SeqCache<T>* cache) {
  const ModelConfig& cfg = params.config;
  const std::size_t seq = ids.size();
  if (seq == 0) throw InputError("encoder: empty sequence");
  if (seq > static_cast<std::size_t>(cfg.max_seq_len))
    throw InputError("encoder: sequence length " + std::to_string(seq) + " exceeds max_seq_len " +
                     std::to_string(cfg.max_seq_len));
  if (valid.size() != seq) throw InputError("encoder: padding mask length mismatch");
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);

  Mat<T> x(seq, d);
  for (std::size_t r = 0; r < seq; ++r) {
    if (ids[r] < 0 || ids[r] >= cfg.vocab_size)
      throw InputError("encoder: token id " + std::to_string(ids[r]) + " out of range");
    std::copy(params.token_embedding.row(static_cast<std::size_t>(ids[r])),
              params.token_embedding.row(static_cast<std::size_t>(ids[r])) + d, x.row(r));
  }

  std::vector<std::int32_t> positions(seq);
  for (std::size_t r = 0; r < seq; ++r) positions[r] = static_cast<std::int32_t>(r);

  if (cache) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->valid = valid;
    cache->positions = positions;
    cache->layers.resize(params.layers.size());
  }

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    x = encoder_layer_forward(x, params.layers[l], cfg, positions, valid, opts,
                              cache ? &cache->layers[l] : nullptr);
  }

  Mat<T> normed;
  if (cache) {
    cache->final_in = x;
    layer_norm(x, std::span<const T>(params.final_ln_scale), static_cast<T>(cfg.layer_norm_eps),
               normed, &cache->final_hat, &cache->final_inv);
    cache->hidden_out = normed;
  } else {
    layer_norm(x, std::span<const T>(params.final_ln_scale), static_cast<T>(cfg.layer_norm_eps),
               normed);
  }
  return normed;
}

template <typename T>
Mat<T> mlm_logits(const Mat<T>& hidden, std::span<const std::int32_t> positions,
                  const Mat<T>& token_embedding) {
  Mat<T> gathered(positions.size(), hidden.cols);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] < 0 || static_cast<std::size_t>(positions[i]) >= hidden.rows)
      throw InputError("mlm_logits: position out of range");
    std::copy(hidden.row(static_cast<std::size_t>(positions[i])),
              hidden.row(static_cast<std::size_t>(positions[i])) + hidden.cols, gathered.row(i));
  }
  Mat<T> logits(positions.size(), token_embedding.rows);
  matmul_nt(gathered, token_embedding, logits);
  return logits;
}

template <typename T>
void mlm_logits_backward(const Mat<T>& hidden, std::span<const std::int32_t> positions,
                         const Mat<T>& token_embedding, const Mat<T>& d_logits, Mat<T>& d_hidden,
                         Mat<T>& d_token_embedding) {
  Mat<T> gathered(positions.size(), hidden.cols);
  for (std::size_t i = 0; i < positions.size(); ++i)
    std::copy(hidden.row(static_cast<std::size_t>(positions[i])),
              hidden.row(static_cast<std::size_t>(positions[i])) + hidden.cols, gathered.row(i));

  // d_embedding += d_logits^T * H
  matmul_tn(d_logits, gathered, d_token_embedding, /*accumulate=*/true);

  // d_hidden[pos] += d_logits_row * E
  Mat<T> d_rows(positions.size(), hidden.cols);
  matmul_nn(d_logits, token_embedding, d_rows);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    T* dst = d_hidden.row(static_cast<std::size_t>(positions[i]));
    const T* src = d_rows.row(i);
    for (std::size_t c = 0; c < hidden.cols; ++c) dst[c] += src[c];
  }
}

template <typename T>
void encoder_backward_seq(const ParameterStore<T>& params, const SeqCache<T>& cache,
                          const Mat<T>& d_hidden, ParameterStore<T>& grads) {
  const ModelConfig& cfg = params.config;
  const std::size_t seq = cache.final_in.rows;
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t dh = static_cast<std::size_t>(cfg.d_head());
  const std::size_t heads = static_cast<std::size_t>(cfg.n_heads);
  const std::size_t ff = static_cast<std::size_t>(cfg.d_ff);

  // Final layer norm.
  Mat<T> d_hat(seq, d);
  accumulate_scale_grad(d_hidden, cache.final_hat, grads.final_ln_scale.data());
  for (std::size_t r = 0; r < seq; ++r)
    for (std::size_t c = 0; c < d; ++c)
      d_hat.at(r, c) = d_hidden.at(r, c) * params.final_ln_scale[c];
  Mat<T> dx(seq, d);
  layer_norm_backward_rows(d_hat, cache.final_hat, cache.final_inv, dx);

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const LayerParams<T>& layer = params.layers[l];
    LayerParams<T>& g = grads.layers[l];
    const LayerCache<T>& lc = cache.layers[l];

    // FFN branch: out = x_mid + hidden * W_down
    Mat<T> d_hidden_ff(seq, ff);
    matmul_nt(dx, layer.w_down, d_hidden_ff);
    matmul_tn(lc.hidden, dx, g.w_down, /*accumulate=*/true);

    Mat<T> d_gate_pre(seq, ff), d_lin(seq, ff);
    for (std::size_t i = 0; i < d_hidden_ff.data.size(); ++i) {
      d_lin.data[i] = d_hidden_ff.data[i] * lc.gate_act.data[i];
      d_gate_pre.data[i] =
          d_hidden_ff.data[i] * lc.lin.data[i] * gelu_grad(lc.gate_pre.data[i]);
    }
    matmul_tn(lc.n2, d_gate_pre, g.w_gate, /*accumulate=*/true);
    matmul_tn(lc.n2, d_lin, g.w_lin, /*accumulate=*/true);

    Mat<T> d_n2(seq, d);
    matmul_nt(d_gate_pre, layer.w_gate, d_n2);
    matmul_nt(d_lin, layer.w_lin, d_n2, /*accumulate=*/true);

    accumulate_scale_grad(d_n2, lc.n2_hat, g.ln_ffn_scale.data());
    Mat<T> d_n2_hat(seq, d);
    for (std::size_t r = 0; r < seq; ++r)
      for (std::size_t c = 0; c < d; ++c)
        d_n2_hat.at(r, c) = d_n2.at(r, c) * layer.ln_ffn_scale[c];
    // dx now carries d(x_mid): residual passthrough plus the norm path.
    layer_norm_backward_rows(d_n2_hat, lc.n2_hat, lc.inv2, dx);

    // Attention branch: x_mid = x_in + concat * W_O
    Mat<T> d_concat(seq, d);
    matmul_nt(dx, layer.wo, d_concat);
    matmul_tn(lc.attn_concat, dx, g.wo, /*accumulate=*/true);

    Mat<T> d_q(seq, d), d_k(seq, d), d_v(seq, d);
    Mat<T> d_oh, d_qh, d_kh, d_vh;
    for (std::size_t h = 0; h < heads; ++h) {
      copy_head_out(d_concat, h, dh, d_oh);
      d_qh = Mat<T>(seq, dh);
      d_kh = Mat<T>(seq, dh);
      d_vh = Mat<T>(seq, dh);
      attention_backward(lc.probs[h], lc.q_rot[h], lc.k_rot[h], lc.v_head[h], d_oh, d_qh, d_kh,
                         d_vh);
      rope_apply_inverse_inplace(d_qh, std::span<const std::int32_t>(cache.positions), cfg);
      rope_apply_inverse_inplace(d_kh, std::span<const std::int32_t>(cache.positions), cfg);
      add_head_back(d_qh, h, dh, d_q);
      add_head_back(d_kh, h, dh, d_k);
      add_head_back(d_vh, h, dh, d_v);
    }

    matmul_tn(lc.n1, d_q, g.wq, /*accumulate=*/true);
    matmul_tn(lc.n1, d_k, g.wk, /*accumulate=*/true);
    matmul_tn(lc.n1, d_v, g.wv, /*accumulate=*/true);

    Mat<T> d_n1(seq, d);
    matmul_nt(d_q, layer.wq, d_n1);
    matmul_nt(d_k, layer.wk, d_n1, /*accumulate=*/true);
    matmul_nt(d_v, layer.wv, d_n1, /*accumulate=*/true);

    accumulate_scale_grad(d_n1, lc.n1_hat, g.ln_attn_scale.data());
    Mat<T> d_n1_hat(seq, d);
    for (std::size_t r = 0; r < seq; ++r)
      for (std::size_t c = 0; c < d; ++c)
        d_n1_hat.at(r, c) = d_n1.at(r, c) * layer.ln_attn_scale[c];
    layer_norm_backward_rows(d_n1_hat, lc.n1_hat, lc.inv1, dx);
  }

  // Embedding lookup: scatter-add per input position.
  for (std::size_t r = 0; r < seq; ++r) {
    T* dst = grads.token_embedding.row(static_cast<std::size_t>(cache.ids[r]));
    const T* src = dx.row(r);
    for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
  }
}

template Mat<float> geglu_forward(const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                  const Mat<float>&);
template Mat<double> geglu_forward(const Mat<double>&, const Mat<double>&, const Mat<double>&,
                                   const Mat<double>&);
template void layer_norm(const Mat<float>&, std::span<const float>, float, Mat<float>&,
                         Mat<float>*, std::vector<float>*);
template void layer_norm(const Mat<double>&, std::span<const double>, double, Mat<double>&,
                         Mat<double>*, std::vector<double>*);
template Mat<float> encoder_layer_forward(const Mat<float>&, const LayerParams<float>&,
                                          const ModelConfig&, std::span<const std::int32_t>,
                                          const std::vector<std::uint8_t>&, const ForwardOptions&,
                                          LayerCache<float>*);
template Mat<double> encoder_layer_forward(const Mat<double>&, const LayerParams<double>&,
                                           const ModelConfig&, std::span<const std::int32_t>,
                                           const std::vector<std::uint8_t>&,
                                           const ForwardOptions&, LayerCache<double>*);
template Mat<float> encoder_forward_seq(const ParameterStore<float>&,
                                        std::span<const std::int32_t>,
                                        const std::vector<std::uint8_t>&, const ForwardOptions&,
                                        SeqCache<float>*);
template Mat<double> encoder_forward_seq(const ParameterStore<double>&,
                                         std::span<const std::int32_t>,
                                         const std::vector<std::uint8_t>&, const ForwardOptions&,
                                         SeqCache<double>*);
template Mat<float> mlm_logits(const Mat<float>&, std::span<const std::int32_t>,
                               const Mat<float>&);
template Mat<double> mlm_logits(const Mat<double>&, std::span<const std::int32_t>,
                                const Mat<double>&);
template void mlm_logits_backward(const Mat<float>&, std::span<const std::int32_t>,
                                  const Mat<float>&, const Mat<float>&, Mat<float>&, Mat<float>&);
template void mlm_logits_backward(const Mat<double>&, std::span<const std::int32_t>,
                                  const Mat<double>&, const Mat<double>&, Mat<double>&,
                                  Mat<double>&);
template void encoder_backward_seq(const ParameterStore<float>&, const SeqCache<float>&,
                                   const Mat<float>&, ParameterStore<float>&);
template void encoder_backward_seq(const ParameterStore<double>&, const SeqCache<double>&,
                                   const Mat<double>&, ParameterStore<double>&);

}  // namespace cmbert
