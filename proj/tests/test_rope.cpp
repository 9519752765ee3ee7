#include <doctest.h>

#include <cmath>

#include "cmbert/error.hpp"
#include "cmbert/kernels.hpp"
#include "cmbert/rope.hpp"
#include "support/test_util.hpp"

using namespace cmbert;

namespace {

ModelConfig tiny_config(std::int64_t d_head, double base = 10000.0) {
  ModelConfig cfg;
  cfg.d_model = d_head;  // single head
  cfg.n_heads = 1;
  cfg.vocab_size = 8;
  cfg.rope_base = base;
  return cfg;
}

}  // namespace

TEST_CASE("rope angles: closed forms") {
  // position 0 -> all angles 0
  {
    const std::vector<std::int32_t> pos{0};
    const auto angles = rope_angles<double>(tiny_config(8), pos);
    for (std::size_t i = 0; i < angles.cols; ++i) CHECK(angles.at(0, i) == 0.0);
  }
  // d_head=2, base=10000, position 1 -> base^0 = 1 rad
  {
    const std::vector<std::int32_t> pos{1};
    const auto angles = rope_angles<double>(tiny_config(2), pos);
    CHECK(angles.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // d_head=4, base=10000, position 2, pair 1 -> 2 * 10000^(-1/2) = 0.02
  {
    const std::vector<std::int32_t> pos{2};
    const auto angles = rope_angles<double>(tiny_config(4), pos);
    CHECK(angles.at(0, 1) == doctest::Approx(0.02).epsilon(1e-12));
  }
}

TEST_CASE("rope apply: identity at position 0 and hand rotation at position 1") {
  const ModelConfig cfg = tiny_config(2);
  Mat<double> x(2, 2);
  x.at(0, 0) = 1.0;
  x.at(0, 1) = 0.0;
  x.at(1, 0) = 1.0;
  x.at(1, 1) = 0.0;
  const std::vector<std::int32_t> pos{0, 1};
  const auto out = rope_apply(x, pos, cfg);
  CHECK(out.at(0, 0) == 1.0);  // zero phase: bitwise identity
  CHECK(out.at(0, 1) == 0.0);
  CHECK(out.at(1, 0) == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
  CHECK(out.at(1, 1) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
}

TEST_CASE("rope rotations preserve per-pair norms") {
  const ModelConfig cfg = tiny_config(16);
  Rng rng(11);
  auto x = testutil::random_mat<float>(24, 16, rng);
  std::vector<std::int32_t> pos(24);
  for (int i = 0; i < 24; ++i) pos[i] = i * 3 + 1;
  const auto out = rope_apply(x, std::span<const std::int32_t>(pos), cfg);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t i = 0; i < 8; ++i) {
      const double before = std::hypot(x.at(r, 2 * i), x.at(r, 2 * i + 1));
      const double after = std::hypot(out.at(r, 2 * i), out.at(r, 2 * i + 1));
      CHECK(after == doctest::Approx(before).epsilon(1e-6));
    }
  }
}

TEST_CASE("rope dot products depend only on the relative offset") {
  const ModelConfig cfg = tiny_config(32);
  Rng rng(17);
  for (int draw = 0; draw < 100; ++draw) {
    Mat<double> q = testutil::random_mat<double>(1, 32, rng);
    Mat<double> k = testutil::random_mat<double>(1, 32, rng);
    const auto offset = static_cast<std::int32_t>(rng.uniform_below(60));
    const auto base1 = static_cast<std::int32_t>(rng.uniform_below(100));
    const auto base2 = static_cast<std::int32_t>(rng.uniform_below(100));

    auto dot_at = [&](std::int32_t p_q, std::int32_t p_k) {
      std::vector<std::int32_t> pq{p_q}, pk{p_k};
      const auto qr = rope_apply(q, std::span<const std::int32_t>(pq), cfg);
      const auto kr = rope_apply(k, std::span<const std::int32_t>(pk), cfg);
      return kern::dot(qr.row(0), kr.row(0), 32);
    };
    CHECK(std::abs(dot_at(base1, base1 + offset) - dot_at(base2, base2 + offset)) < 1e-6);
  }
}

TEST_CASE("rope inverse undoes the rotation") {
  const ModelConfig cfg = tiny_config(8);
  Rng rng(3);
  auto x = testutil::random_mat<double>(5, 8, rng);
  const Mat<double> original = x;
  std::vector<std::int32_t> pos{0, 2, 5, 9, 31};
  rope_apply_inplace(x, std::span<const std::int32_t>(pos), cfg);
  rope_apply_inverse_inplace(x, std::span<const std::int32_t>(pos), cfg);
  CHECK(testutil::max_abs_diff(x, original) < 1e-12);
}

TEST_CASE("rope rejects bad shapes and odd head widths") {
  const ModelConfig cfg = tiny_config(4);
  Mat<double> x(3, 4);
  std::vector<std::int32_t> pos{0, 1};  // wrong length
  CHECK_THROWS_AS(rope_apply(x, std::span<const std::int32_t>(pos), cfg), InputError);

  ModelConfig odd = cfg;
  odd.d_model = 3;
  odd.n_heads = 1;
  CHECK_THROWS_AS(odd.validate(), ConfigError);
  std::vector<std::int32_t> neg{-1, 0, 1};
  CHECK_THROWS_AS(rope_apply(x, std::span<const std::int32_t>(neg), cfg), InputError);
}
