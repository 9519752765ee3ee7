#include "cmbert/attention.hpp"

#include <cmath>
#include <limits>

#include "cmbert/error.hpp"
#include "cmbert/workspace.hpp"

namespace cmbert {

namespace {

template <typename T>
void check_shapes(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                  const std::vector<std::uint8_t>& valid) {
  if (q.cols != k.cols || k.rows != v.rows || q.cols != v.cols || k.rows != q.rows)
    throw InputError("attention: Q, K, V must share shape [seq x d_head]");
  if (valid.size() != k.rows)
    throw InputError("attention: padding mask length must equal seq");
  bool any_valid = false;
  for (auto f : valid) any_valid |= (f != 0);
  if (!any_valid) throw InputError("attention: all positions padded (empty softmax)");
}

}  // namespace

template <typename T>
void attention_dense(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                     const std::vector<std::uint8_t>& valid, Mat<T>& out, Mat<T>* probs_out) {
  check_shapes(q, k, v, valid);
  const std::size_t seq = q.rows;
  const std::size_t d = q.cols;
  const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

  out.rows = seq;
  out.cols = d;
  out.data.assign(seq * d, T(0));
  if (probs_out) {
    probs_out->rows = seq;
    probs_out->cols = seq;
    probs_out->data.assign(seq * seq, T(0));
  }

  ScratchVec<T> scores(seq * seq);
  for (std::size_t i = 0; i < seq; ++i) {
    T* srow = scores.data() + i * seq;
    T row_max = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < seq; ++j) {
      if (!valid[j]) continue;
      srow[j] = kern::dot(q.row(i), k.row(j), d) * inv_sqrt_d;
      if (srow[j] > row_max) row_max = srow[j];
    }
    T z = 0;
    for (std::size_t j = 0; j < seq; ++j) {
      if (!valid[j]) {
        srow[j] = 0;
        continue;
      }
      srow[j] = std::exp(srow[j] - row_max);
      z += srow[j];
    }
    const T inv_z = T(1) / z;
    T* orow = out.row(i);
    for (std::size_t j = 0; j < seq; ++j) {
      if (!valid[j]) continue;
      const T w = srow[j] * inv_z;
      if (probs_out) probs_out->at(i, j) = w;
      kern::axpy(w, v.row(j), orow, d);
    }
  }
}

template <typename T>
void attention_blockwise(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                         const std::vector<std::uint8_t>& valid, std::size_t block_size,
                         Mat<T>& out) {
  check_shapes(q, k, v, valid);
  if (block_size < 1) throw InputError("attention: block_size must be >= 1");
  const std::size_t seq = q.rows;
  const std::size_t d = q.cols;
  const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

  out.rows = seq;
  out.cols = d;
  out.data.assign(seq * d, T(0));

  // Running state per query row: max seen so far and normalizer so far;
  // out accumulates the unnormalized weighted sum and is rescaled whenever
  // the running max moves.
  ScratchVec<T> run_max(seq);
  ScratchVec<T> run_norm(seq);
  ScratchVec<T> tile(seq * block_size);
  for (std::size_t i = 0; i < seq; ++i) run_max[i] = -std::numeric_limits<T>::infinity();

  for (std::size_t tile_begin = 0; tile_begin < seq; tile_begin += block_size) {
    const std::size_t tile_end = std::min(seq, tile_begin + block_size);
    for (std::size_t i = 0; i < seq; ++i) {
      T* trow = tile.data() + i * block_size;
      T tile_max = -std::numeric_limits<T>::infinity();
      for (std::size_t j = tile_begin; j < tile_end; ++j) {
        if (!valid[j]) continue;
        const T s = kern::dot(q.row(i), k.row(j), d) * inv_sqrt_d;
        trow[j - tile_begin] = s;
        if (s > tile_max) tile_max = s;
      }
      if (tile_max == -std::numeric_limits<T>::infinity()) continue;  // tile fully padded

      const T new_max = tile_max > run_max[i] ? tile_max : run_max[i];
      if (run_max[i] != -std::numeric_limits<T>::infinity() && new_max > run_max[i]) {
        const T rescale = std::exp(run_max[i] - new_max);
        run_norm[i] *= rescale;
        kern::scal(out.row(i), rescale, d);
      }
      run_max[i] = new_max;

      T* orow = out.row(i);
      for (std::size_t j = tile_begin; j < tile_end; ++j) {
        if (!valid[j]) continue;
        const T w = std::exp(trow[j - tile_begin] - new_max);
        run_norm[i] += w;
        kern::axpy(w, v.row(j), orow, d);
      }
    }
  }

  for (std::size_t i = 0; i < seq; ++i) {
    kern::scal(out.row(i), T(1) / run_norm[i], d);
  }
}

template <typename T>
void attention_backward(const Mat<T>& probs, const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                        const Mat<T>& d_out, Mat<T>& d_q, Mat<T>& d_k, Mat<T>& d_v) {
  const std::size_t seq = q.rows;
  const std::size_t d = q.cols;
  const T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(d)));

  // d_v += P^T * d_out
  matmul_tn(probs, d_out, d_v, /*accumulate=*/true);

  // d_scores = P .* (d_probs - rowsum(d_probs .* P)), d_probs = d_out * V^T
  Mat<T> d_scores(seq, seq);
  matmul_nt(d_out, v, d_scores);
  for (std::size_t i = 0; i < seq; ++i) {
    T* drow = d_scores.row(i);
    const T* prow = probs.row(i);
    const T inner = kern::dot(drow, prow, seq);
    for (std::size_t j = 0; j < seq; ++j) drow[j] = prow[j] * (drow[j] - inner) * inv_sqrt_d;
  }

  // d_q += d_scores * K ; d_k += d_scores^T * Q
  matmul_nn(d_scores, k, d_q, /*accumulate=*/true);
  matmul_tn(d_scores, q, d_k, /*accumulate=*/true);
}

std::size_t dense_scratch_bytes(std::size_t seq, std::size_t elem_size) {
  return seq * seq * elem_size;
}

std::size_t blockwise_scratch_bytes(std::size_t seq, std::size_t block_size,
                                    std::size_t elem_size) {
  return (seq * block_size + 2 * seq) * elem_size;
}

template void attention_dense(const Mat<float>&, const Mat<float>&, const Mat<float>&,
                              const std::vector<std::uint8_t>&, Mat<float>&, Mat<float>*);
template void attention_dense(const Mat<double>&, const Mat<double>&, const Mat<double>&,
                              const std::vector<std::uint8_t>&, Mat<double>&, Mat<double>*);
template void attention_blockwise(const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                  const std::vector<std::uint8_t>&, std::size_t, Mat<float>&);
template void attention_blockwise(const Mat<double>&, const Mat<double>&, const Mat<double>&,
                                  const std::vector<std::uint8_t>&, std::size_t, Mat<double>&);
template void attention_backward(const Mat<float>&, const Mat<float>&, const Mat<float>&,
                                 const Mat<float>&, const Mat<float>&, Mat<float>&, Mat<float>&,
                                 Mat<float>&);
template void attention_backward(const Mat<double>&, const Mat<double>&, const Mat<double>&,
                                 const Mat<double>&, const Mat<double>&, Mat<double>&,
                                 Mat<double>&, Mat<double>&);

}  // namespace cmbert
