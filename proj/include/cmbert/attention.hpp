#pragma once

#include <cstdint>
#include <vector>

#include "cmbert/tensor.hpp"

namespace cmbert {

// Bidirectional scaled-dot-product attention over one head. Q, K, V are
// [seq x d_head]; Q and K are expected to be rotation-encoded by the caller.
// valid[j] == 1 marks a real key position, 0 a padding position that no
// query may attend to. Throws InputError if every position is padded.
//
// Dense path: materializes the full score matrix (scratch, metered).
// probs_out, when non-null, receives the row-stochastic attention weights —
// the debug accessor for row-sum checks and the buffer the backward pass
// consumes.
template <typename T>
void attention_dense(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                     const std::vector<std::uint8_t>& valid, Mat<T>& out,
                     Mat<T>* probs_out = nullptr);

// Streaming (online-softmax) path: walks key/value tiles of block_size
// columns keeping a running row maximum and normalizer, accumulating
// unnormalized outputs in place. The seq x seq score matrix never exists;
// auxiliary memory is one seq x block_size tile plus two seq-length vectors,
// all metered. Must agree with attention_dense to floating-point tolerance.
template <typename T>
void attention_blockwise(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                         const std::vector<std::uint8_t>& valid, std::size_t block_size,
                         Mat<T>& out);

// Backward through the dense formulation given the saved attention weights.
// Accumulates (+=) into d_q, d_k, d_v, which must be pre-shaped like q, k, v.
template <typename T>
void attention_backward(const Mat<T>& probs, const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                        const Mat<T>& d_out, Mat<T>& d_q, Mat<T>& d_k, Mat<T>& d_v);

// Auxiliary-buffer byte counts implied by the two paths at a given geometry;
// the same quantities the WorkspaceMeter observes at runtime.
std::size_t dense_scratch_bytes(std::size_t seq, std::size_t elem_size);
std::size_t blockwise_scratch_bytes(std::size_t seq, std::size_t block_size,
                                    std::size_t elem_size);

}  // namespace cmbert
