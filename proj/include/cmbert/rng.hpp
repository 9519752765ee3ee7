#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace cmbert {

// splitmix64 step: advances the state and returns the next value.
// This is the documented sub-seed derivation primitive: every random stream
// in the project is keyed as derive_seed(master_seed, tag, index).
std::uint64_t splitmix64(std::uint64_t& state);

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

// xoshiro256** with explicit, checkpointable state.
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed);
  static Rng from_state(const State& s);
  static Rng stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
    return Rng(derive_seed(seed, tag, index));
  }

  std::uint64_t next_u64();
  // Uniform in [0, 1).
  double uniform();
  // Unbiased uniform integer in [0, n); n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);
  // Standard normal via Box-Muller (cosine branch only, so the state is the
  // whole story; no cached spare).
  double gaussian();
  // Normal(0, stddev) resampled until within +/- bound_sigmas standard deviations.
  double truncated_normal(double stddev, double bound_sigmas = 2.0);

  const State& state() const { return state_; }

 private:
  Rng() = default;
  State state_{};
};

}  // namespace cmbert
