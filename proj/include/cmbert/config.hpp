#pragma once

#include <cstdint>

namespace cmbert {

// Architectural hyperparameters of the encoder. Everything downstream
// (parameter shapes, attention tiling, rotation pairing) derives from this.
struct ModelConfig {
  std::int64_t d_model = 128;
  std::int64_t n_heads = 4;
  std::int64_t n_layers = 2;
  std::int64_t d_ff = 384;
  std::int64_t vocab_size = 0;
  std::int64_t max_seq_len = 512;  // hard cap 8192
  double rope_base = 10000.0;
  std::int64_t attention_block_size = 128;
  double layer_norm_eps = 1e-5;

  std::int64_t d_head() const { return d_model / n_heads; }

  // Throws ConfigError when any invariant fails:
  //   d_model % n_heads == 0, d_head even (rotations act on dimension pairs),
  //   1 <= attention_block_size <= max_seq_len, max_seq_len <= 8192,
  //   all sizes positive, rope_base and layer_norm_eps positive.
  void validate() const;
};

}  // namespace cmbert
