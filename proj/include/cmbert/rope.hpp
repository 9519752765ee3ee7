#pragma once

#include <cstdint>
#include <span>

#include "cmbert/config.hpp"
#include "cmbert/tensor.hpp"

namespace cmbert {

// Rotation phases: angles[p][i] = positions[p] * rope_base^(-2i / d_head)
// for i in [0, d_head/2). Positions must be non-negative.
template <typename T>
Mat<T> rope_angles(const ModelConfig& cfg, std::span<const std::int32_t> positions);

// Rotates each dimension pair (x[2i], x[2i+1]) of every row by its phase:
// (x cos - y sin, x sin + y cos). x is [seq x d_head] with seq ==
// positions.size(); per-pair norms are preserved.
template <typename T>
void rope_apply_inplace(Mat<T>& x, std::span<const std::int32_t> positions, const ModelConfig& cfg);

// Inverse rotation (by -theta); the adjoint used in backward passes.
template <typename T>
void rope_apply_inverse_inplace(Mat<T>& x, std::span<const std::int32_t> positions,
                                const ModelConfig& cfg);

template <typename T>
Mat<T> rope_apply(const Mat<T>& x, std::span<const std::int32_t> positions,
                  const ModelConfig& cfg) {
  Mat<T> out = x;
  rope_apply_inplace(out, positions, cfg);
  return out;
}

}  // namespace cmbert
