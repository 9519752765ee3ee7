#include "cmbert/params.hpp"

#include <cmath>

#include "cmbert/error.hpp"
#include "cmbert/rng.hpp"

namespace cmbert {

void ModelConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0 || n_layers <= 0 || d_ff <= 0 || vocab_size <= 0)
    throw ConfigError("model config: all dimensions must be positive");
  if (d_model % n_heads != 0)
    throw ConfigError("model config: d_model must be divisible by n_heads");
  if (d_head() % 2 != 0)
    throw ConfigError("model config: d_head must be even (rotations act on dimension pairs)");
  if (max_seq_len <= 0 || max_seq_len > 8192)
    throw ConfigError("model config: max_seq_len must be in [1, 8192]");
  if (attention_block_size < 1 || attention_block_size > max_seq_len)
    throw ConfigError("model config: attention_block_size must be in [1, max_seq_len]");
  if (!(rope_base > 0.0)) throw ConfigError("model config: rope_base must be positive");
  if (!(layer_norm_eps > 0.0)) throw ConfigError("model config: layer_norm_eps must be positive");
}

namespace {

template <typename T>
void init_matrix(Mat<T>& m, Rng rng) {
  for (auto& v : m.data) v = static_cast<T>(rng.truncated_normal(0.02));
}

}  // namespace

template <typename T>
ParameterStore<T> ParameterStore<T>::zeros(const ModelConfig& cfg) {
  cfg.validate();
  ParameterStore<T> p;
  p.config = cfg;
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto ff = static_cast<std::size_t>(cfg.d_ff);
  p.token_embedding = Mat<T>(static_cast<std::size_t>(cfg.vocab_size), d);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& layer : p.layers) {
    layer.wq = Mat<T>(d, d);
    layer.wk = Mat<T>(d, d);
    layer.wv = Mat<T>(d, d);
    layer.wo = Mat<T>(d, d);
    layer.w_gate = Mat<T>(d, ff);
    layer.w_lin = Mat<T>(d, ff);
    layer.w_down = Mat<T>(ff, d);
    layer.ln_attn_scale.assign(d, T(0));
    layer.ln_ffn_scale.assign(d, T(0));
  }
  p.final_ln_scale.assign(d, T(0));
  return p;
}

template <typename T>
ParameterStore<T> ParameterStore<T>::init(const ModelConfig& cfg, std::uint64_t seed) {
  ParameterStore<T> p = zeros(cfg);
  std::uint64_t index = 0;
  for (auto& t : p.named_tensors()) {
    const bool is_scale = t.name.find("norm.scale") != std::string::npos;
    if (is_scale) {
      for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = T(1);
    } else {
      Rng rng = Rng::stream(seed, "param-init", index);
      for (std::size_t i = 0; i < t.size(); ++i)
        t.data[i] = static_cast<T>(rng.truncated_normal(0.02));
    }
    ++index;
  }
  return p;
}

namespace {

template <typename T, typename Store, typename Ptr>
std::vector<NamedTensor<Ptr>> enumerate_tensors(Store& p) {
  std::vector<NamedTensor<Ptr>> out;
  out.push_back({"token_embedding", p.token_embedding.rows, p.token_embedding.cols,
                 p.token_embedding.data.data()});
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& layer = p.layers[i];
    const std::string prefix = "layers." + std::to_string(i) + ".";
    out.push_back({prefix + "attn.wq", layer.wq.rows, layer.wq.cols, layer.wq.data.data()});
    out.push_back({prefix + "attn.wk", layer.wk.rows, layer.wk.cols, layer.wk.data.data()});
    out.push_back({prefix + "attn.wv", layer.wv.rows, layer.wv.cols, layer.wv.data.data()});
    out.push_back({prefix + "attn.wo", layer.wo.rows, layer.wo.cols, layer.wo.data.data()});
    out.push_back({prefix + "attn_norm.scale", 1, layer.ln_attn_scale.size(),
                   layer.ln_attn_scale.data()});
    out.push_back({prefix + "ffn.w_gate", layer.w_gate.rows, layer.w_gate.cols,
                   layer.w_gate.data.data()});
    out.push_back({prefix + "ffn.w_lin", layer.w_lin.rows, layer.w_lin.cols,
                   layer.w_lin.data.data()});
    out.push_back({prefix + "ffn.w_down", layer.w_down.rows, layer.w_down.cols,
                   layer.w_down.data.data()});
    out.push_back({prefix + "ffn_norm.scale", 1, layer.ln_ffn_scale.size(),
                   layer.ln_ffn_scale.data()});
  }
  out.push_back({"final_norm.scale", 1, p.final_ln_scale.size(), p.final_ln_scale.data()});
  return out;
}

}  // namespace

template <typename T>
std::vector<NamedTensor<T>> ParameterStore<T>::named_tensors() {
  return enumerate_tensors<T, ParameterStore<T>, T>(*this);
}

template <typename T>
std::vector<NamedTensor<const T>> ParameterStore<T>::named_tensors() const {
  return enumerate_tensors<T, const ParameterStore<T>, const T>(*this);
}

template <typename T>
std::size_t ParameterStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : named_tensors()) n += t.size();
  return n;
}

template <typename T>
bool ParameterStore<T>::all_finite() const {
  for (const auto& t : named_tensors()) {
    if (!cmbert::all_finite(std::span<const T>(t.data, t.size()))) return false;
  }
  return true;
}

template <typename T>
void ParameterStore<T>::fill(T v) {
  for (auto& t : named_tensors()) {
    for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = v;
  }
}

template <typename T>
void ParameterStore<T>::resize_vocab(std::int64_t new_vocab_size, std::uint64_t seed) {
  const auto old_rows = token_embedding.rows;
  const auto rows = static_cast<std::size_t>(new_vocab_size);
  if (rows < old_rows) throw ConfigError("resize_vocab: vocabulary cannot shrink");
  if (rows == old_rows) return;
  Mat<T> grown(rows, token_embedding.cols);
  std::copy(token_embedding.data.begin(), token_embedding.data.end(), grown.data.begin());
  Rng rng = Rng::stream(seed, "vocab-extend", old_rows);
  for (std::size_t i = old_rows * grown.cols; i < grown.data.size(); ++i)
    grown.data[i] = static_cast<T>(rng.truncated_normal(0.02));
  token_embedding = std::move(grown);
  config.vocab_size = new_vocab_size;
}

template <typename T>
ParameterStore<T> clone_zeroed(const ParameterStore<T>& like) {
  return ParameterStore<T>::zeros(like.config);
}

template struct ParameterStore<float>;
template struct ParameterStore<double>;
template ParameterStore<float> clone_zeroed(const ParameterStore<float>&);
template ParameterStore<double> clone_zeroed(const ParameterStore<double>&);

}  // namespace cmbert
