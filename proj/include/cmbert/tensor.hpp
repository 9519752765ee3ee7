#pragma once

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "cmbert/kernels.hpp"

namespace cmbert {

// Dense row-major matrix. Rank-1 tensors are represented as 1 x n or kept in
// plain std::vector where a matrix view adds nothing.
template <typename T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0)) {}

  static Mat zeros(std::size_t r, std::size_t c) { return Mat(r, c); }

  T* row(std::size_t i) { return data.data() + i * cols; }
  const T* row(std::size_t i) const { return data.data() + i * cols; }
  std::span<T> row_span(std::size_t i) { return {row(i), cols}; }
  std::span<const T> row_span(std::size_t i) const { return {row(i), cols}; }

  T& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
  void fill(T v) { data.assign(data.size(), v); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// C (+)= A * B, shapes [m x k] * [k x n]. Streams rows of B scaled by A's
// entries so the inner loop is a contiguous axpy.
template <typename T>
void matmul_nn(const Mat<T>& a, const Mat<T>& b, Mat<T>& c, bool accumulate = false) {
  assert(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols);
  if (!accumulate) c.fill(T(0));
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* arow = a.row(i);
    T* crow = c.row(i);
    for (std::size_t l = 0; l < a.cols; ++l) {
      if (arow[l] != T(0)) kern::axpy(arow[l], b.row(l), crow, b.cols);
    }
  }
}

// C (+)= A * B^T, shapes [m x k] * [n x k]^T; rows of both operands are
// contiguous, so each output entry is one dot.
template <typename T>
void matmul_nt(const Mat<T>& a, const Mat<T>& b, Mat<T>& c, bool accumulate = false) {
  assert(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* arow = a.row(i);
    T* crow = c.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const T d = kern::dot(arow, b.row(j), a.cols);
      crow[j] = accumulate ? crow[j] + d : d;
    }
  }
}

// C (+)= A^T * B, shapes [m x k]^T * [m x n].
template <typename T>
void matmul_tn(const Mat<T>& a, const Mat<T>& b, Mat<T>& c, bool accumulate = false) {
  assert(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols);
  if (!accumulate) c.fill(T(0));
  for (std::size_t l = 0; l < a.rows; ++l) {
    const T* arow = a.row(l);
    const T* brow = b.row(l);
    for (std::size_t i = 0; i < a.cols; ++i) {
      if (arow[i] != T(0)) kern::axpy(arow[i], brow, c.row(i), b.cols);
    }
  }
}

template <typename T>
bool all_finite(std::span<const T> xs) {
  for (T x : xs) {
    if (!(x == x) || x > std::numeric_limits<T>::max() || x < std::numeric_limits<T>::lowest())
      return false;
  }
  return true;
}

}  // namespace cmbert
