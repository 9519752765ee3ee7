#include "cmbert/kernels.hpp"

// Reference kernels. The float versions define the semantics the SIMD
// variants are tested against; the double versions are the wide-precision
// path and have no SIMD counterpart.

namespace cmbert::kern {

namespace {

template <typename T>
T dot_impl(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scal_impl(T* x, T alpha, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
void vadd_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void vmul_impl(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
T reduce_max_impl(const T* x, std::size_t n) {
  T m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

template <typename T>
T reduce_sum_impl(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T sum_sq_impl(const T* x, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

}  // namespace

namespace detail {

const FloatBackend& scalar_backend() {
  static const FloatBackend backend{
      &dot_impl<float>,  &axpy_impl<float>,       &scal_impl<float>,
      &vadd_impl<float>, &vmul_impl<float>,       &reduce_max_impl<float>,
      &reduce_sum_impl<float>, &sum_sq_impl<float>,
  };
  return backend;
}

}  // namespace detail

double dot(const double* a, const double* b, std::size_t n) { return dot_impl(a, b, n); }
void axpy(double alpha, const double* x, double* y, std::size_t n) { axpy_impl(alpha, x, y, n); }
void scal(double* x, double alpha, std::size_t n) { scal_impl(x, alpha, n); }
void vadd(const double* a, const double* b, double* out, std::size_t n) { vadd_impl(a, b, out, n); }
void vmul(const double* a, const double* b, double* out, std::size_t n) { vmul_impl(a, b, out, n); }
double reduce_max(const double* x, std::size_t n) { return reduce_max_impl(x, n); }
double reduce_sum(const double* x, std::size_t n) { return reduce_sum_impl(x, n); }
double sum_sq(const double* x, std::size_t n) { return sum_sq_impl(x, n); }

}  // namespace cmbert::kern
