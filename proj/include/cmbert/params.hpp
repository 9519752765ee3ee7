#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmbert/config.hpp"
#include "cmbert/tensor.hpp"

namespace cmbert {

// One encoder layer's weights. No bias tensors exist anywhere in the model;
// layer norms carry a scale vector only.
template <typename T>
struct LayerParams {
  Mat<T> wq, wk, wv, wo;        // [d_model x d_model]
  Mat<T> w_gate, w_lin;         // [d_model x d_ff]
  Mat<T> w_down;                // [d_ff x d_model]
  std::vector<T> ln_attn_scale; // [d_model]
  std::vector<T> ln_ffn_scale;  // [d_model]
};

template <typename T>
struct NamedTensor {
  std::string name;
  std::size_t rows, cols;  // rank-1 tensors report rows=1
  T* data;
  std::size_t size() const { return rows * cols; }
};

// Encoder weights plus the tied MLM head (the head is token_embedding
// transposed; no extra tensor exists for it).
template <typename T>
struct ParameterStore {
  ModelConfig config;
  Mat<T> token_embedding;  // [vocab_size x d_model]
  std::vector<LayerParams<T>> layers;
  std::vector<T> final_ln_scale;  // [d_model]

  static ParameterStore zeros(const ModelConfig& cfg);
  // Truncated normal (stddev 0.02, clipped at 2 sigma) for projections and
  // embeddings; unit layer-norm scales. Each tensor draws from its own
  // derived stream so initialization is order-independent.
  static ParameterStore init(const ModelConfig& cfg, std::uint64_t seed);

  // Canonical tensor enumeration: fixed order, fixed names. Used for the
  // parameter census, optimizer state, gradient congruence and checkpoints.
  std::vector<NamedTensor<T>> named_tensors();
  std::vector<NamedTensor<const T>> named_tensors() const;

  std::size_t parameter_count() const;
  bool all_finite() const;
  void fill(T v);

  // Grows the embedding table to new_vocab_size rows (vocabulary
  // augmentation); fresh rows use the init policy, existing rows are kept.
  void resize_vocab(std::int64_t new_vocab_size, std::uint64_t seed);
};

template <typename T>
ParameterStore<T> clone_zeroed(const ParameterStore<T>& like);

extern template struct ParameterStore<float>;
extern template struct ParameterStore<double>;
extern template ParameterStore<float> clone_zeroed(const ParameterStore<float>&);
extern template ParameterStore<double> clone_zeroed(const ParameterStore<double>&);

}  // namespace cmbert
