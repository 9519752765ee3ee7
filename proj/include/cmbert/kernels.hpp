#pragma once

#include <cstddef>

// Data-parallel inner loops used by the encoder and optimizer. The float
// entry points dispatch at runtime between the scalar reference kernels and
// AVX2+FMA variants; the double overloads always run the scalar reference
// (wide-precision mode, used by the finite-difference oracles). Variants are
// equivalence-tested against each other in tests/test_kernels.cpp.

namespace cmbert::kern {

enum class Isa { scalar, avx2 };

// Currently selected instruction set. Detection runs once: AVX2+FMA when the
// CPU supports both, overridable via the CMBERT_SIMD env var (scalar|avx2|auto)
// or force_isa().
Isa active_isa();
void force_isa(Isa isa);
bool avx2_supported();
const char* isa_name(Isa isa);

// ---- float path (dispatched) ----
float dot(const float* a, const float* b, std::size_t n);
void axpy(float alpha, const float* x, float* y, std::size_t n);   // y += alpha * x
void scal(float* x, float alpha, std::size_t n);                   // x *= alpha
void vadd(const float* a, const float* b, float* out, std::size_t n);
void vmul(const float* a, const float* b, float* out, std::size_t n);
float reduce_max(const float* x, std::size_t n);                   // n >= 1
float reduce_sum(const float* x, std::size_t n);
float sum_sq(const float* x, std::size_t n);

// ---- double path (scalar reference only) ----
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scal(double* x, double alpha, std::size_t n);
void vadd(const double* a, const double* b, double* out, std::size_t n);
void vmul(const double* a, const double* b, double* out, std::size_t n);
double reduce_max(const double* x, std::size_t n);
double reduce_sum(const double* x, std::size_t n);
double sum_sq(const double* x, std::size_t n);

namespace detail {

struct FloatBackend {
  float (*dot)(const float*, const float*, std::size_t);
  void (*axpy)(float, const float*, float*, std::size_t);
  void (*scal)(float*, float, std::size_t);
  void (*vadd)(const float*, const float*, float*, std::size_t);
  void (*vmul)(const float*, const float*, float*, std::size_t);
  float (*reduce_max)(const float*, std::size_t);
  float (*reduce_sum)(const float*, std::size_t);
  float (*sum_sq)(const float*, std::size_t);
};

const FloatBackend& scalar_backend();
const FloatBackend& avx2_backend();  // only valid when avx2_supported()

}  // namespace detail

}  // namespace cmbert::kern
