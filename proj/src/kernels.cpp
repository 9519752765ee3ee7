#include "cmbert/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace cmbert::kern {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

Isa detect_isa() {
  if (const char* env = std::getenv("CMBERT_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Isa::avx2;
    // anything else (including "auto") falls through to detection
  }
  return avx2_supported() ? Isa::avx2 : Isa::scalar;
}

std::atomic<const detail::FloatBackend*> g_backend{nullptr};
std::atomic<Isa> g_isa{Isa::scalar};

const detail::FloatBackend* backend() {
  const detail::FloatBackend* b = g_backend.load(std::memory_order_acquire);
  if (!b) {
    const Isa isa = detect_isa();
    b = isa == Isa::avx2 ? &detail::avx2_backend() : &detail::scalar_backend();
    g_isa.store(isa, std::memory_order_relaxed);
    g_backend.store(b, std::memory_order_release);
  }
  return b;
}

}  // namespace

Isa active_isa() {
  backend();
  return g_isa.load(std::memory_order_relaxed);
}

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2_supported()) isa = Isa::scalar;
  g_isa.store(isa, std::memory_order_relaxed);
  g_backend.store(isa == Isa::avx2 ? &detail::avx2_backend() : &detail::scalar_backend(),
                  std::memory_order_release);
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

float dot(const float* a, const float* b, std::size_t n) { return backend()->dot(a, b, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { backend()->axpy(alpha, x, y, n); }
void scal(float* x, float alpha, std::size_t n) { backend()->scal(x, alpha, n); }
void vadd(const float* a, const float* b, float* out, std::size_t n) { backend()->vadd(a, b, out, n); }
void vmul(const float* a, const float* b, float* out, std::size_t n) { backend()->vmul(a, b, out, n); }
float reduce_max(const float* x, std::size_t n) { return backend()->reduce_max(x, n); }
float reduce_sum(const float* x, std::size_t n) { return backend()->reduce_sum(x, n); }
float sum_sq(const float* x, std::size_t n) { return backend()->sum_sq(x, n); }

}  // namespace cmbert::kern
