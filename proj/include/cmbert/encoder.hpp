#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cmbert/attention.hpp"
#include "cmbert/params.hpp"

namespace cmbert {

enum class AttentionMode { dense, blockwise };

struct ForwardOptions {
  AttentionMode mode = AttentionMode::blockwise;
};

// Exact (erf-form) GeLU: z * Phi(z).
template <typename T>
inline T gelu(T z) {
  return static_cast<T>(0.5) * z * (T(1) + static_cast<T>(std::erf(static_cast<double>(z) * M_SQRT1_2)));
}

// d/dz [z * Phi(z)] = Phi(z) + z * phi(z)
template <typename T>
inline T gelu_grad(T z) {
  const double zd = static_cast<double>(z);
  const double phi = std::exp(-0.5 * zd * zd) / std::sqrt(2.0 * M_PI);
  const double cdf = 0.5 * (1.0 + std::erf(zd * M_SQRT1_2));
  return static_cast<T>(cdf + zd * phi);
}

// Gated feed-forward: (GeLU(x W_gate) .* (x W_lin)) W_down. Bias-free.
template <typename T>
Mat<T> geglu_forward(const Mat<T>& x, const Mat<T>& w_gate, const Mat<T>& w_lin,
                     const Mat<T>& w_down);

// Scale-only layer norm. out = scale .* (x - mean) / sqrt(var + eps), row-wise.
// x_hat_out (pre-scale normalized rows) and inv_std_out feed the backward pass.
template <typename T>
void layer_norm(const Mat<T>& x, std::span<const T> scale, T eps, Mat<T>& out,
                Mat<T>* x_hat_out = nullptr, std::vector<T>* inv_std_out = nullptr);

// Everything the backward pass needs from one layer's forward.
template <typename T>
struct LayerCache {
  Mat<T> x_in;
  Mat<T> n1_hat, n1;  // attention-branch norm: pre-scale and post-scale
  std::vector<T> inv1;
  std::vector<Mat<T>> q_rot, k_rot, v_head;  // per head, [seq x d_head]
  std::vector<Mat<T>> probs;                 // per head, [seq x seq]
  Mat<T> attn_concat;                        // head outputs, concatenated
  Mat<T> x_mid;                              // x_in + attn_concat * W_O
  Mat<T> n2_hat, n2;
  std::vector<T> inv2;
  Mat<T> gate_pre, gate_act, lin, hidden;    // [seq x d_ff]
};

template <typename T>
struct SeqCache {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> valid;
  std::vector<std::int32_t> positions;
  std::vector<LayerCache<T>> layers;
  Mat<T> final_in, final_hat;
  std::vector<T> final_inv;
  Mat<T> hidden_out;
};

// One pre-norm residual block:
//   x <- x + MHA(LN(x));  x <- x + GeGLU(LN(x))
// Q and K are rotation-encoded per head before scores are taken. A non-null
// cache forces the dense attention path (the backward pass consumes the
// saved attention weights).
template <typename T>
Mat<T> encoder_layer_forward(const Mat<T>& x, const LayerParams<T>& layer,
                             const ModelConfig& cfg, std::span<const std::int32_t> positions,
                             const std::vector<std::uint8_t>& valid, const ForwardOptions& opts,
                             LayerCache<T>* cache = nullptr);

// Embedding lookup -> n_layers blocks -> final layer norm. Position enters
// only through the rotations; there is no additive position embedding.
// Throws InputError for out-of-range ids or seq > max_seq_len.
template <typename T>
Mat<T> encoder_forward_seq(const ParameterStore<T>& params, std::span<const std::int32_t> ids,
                           const std::vector<std::uint8_t>& valid, const ForwardOptions& opts,
                           SeqCache<T>* cache = nullptr);

// logits = hidden[positions] * token_embedding^T (tied MLM head).
template <typename T>
Mat<T> mlm_logits(const Mat<T>& hidden, std::span<const std::int32_t> positions,
                  const Mat<T>& token_embedding);

// Adjoint of mlm_logits: scatters d_logits into d_hidden rows and accumulates
// the tied-embedding gradient.
template <typename T>
void mlm_logits_backward(const Mat<T>& hidden, std::span<const std::int32_t> positions,
                         const Mat<T>& token_embedding, const Mat<T>& d_logits,
                         Mat<T>& d_hidden, Mat<T>& d_token_embedding);

// Reverse-mode pass for one sequence: d_hidden is the gradient at the final
// (post-norm) hidden states; gradients accumulate into grads, which must be
// shape-congruent with params.
template <typename T>
void encoder_backward_seq(const ParameterStore<T>& params, const SeqCache<T>& cache,
                          const Mat<T>& d_hidden, ParameterStore<T>& grads);

extern template Mat<float> geglu_forward(const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                         const Mat<float>&);
extern template Mat<double> geglu_forward(const Mat<double>&, const Mat<double>&,
                                          const Mat<double>&, const Mat<double>&);

}  // namespace cmbert
