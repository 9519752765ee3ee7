#include "cmbert/rope.hpp"

#include <cmath>

#include "cmbert/error.hpp"

namespace cmbert {

namespace {

template <typename T>
void check_rope_preconditions(const Mat<T>& x, std::span<const std::int32_t> positions,
                              const ModelConfig& cfg) {
  if (cfg.d_head() % 2 != 0)
    throw ConfigError("rope: d_head must be even");
  if (x.cols != static_cast<std::size_t>(cfg.d_head()) || x.rows != positions.size())
    throw InputError("rope: tensor shape does not match positions/d_head");
  for (auto p : positions)
    if (p < 0) throw InputError("rope: positions must be non-negative");
}

// sign = +1 rotates forward, -1 applies the inverse rotation.
template <typename T>
void rotate(Mat<T>& x, std::span<const std::int32_t> positions, const ModelConfig& cfg, T sign) {
  check_rope_preconditions(x, positions, cfg);
  const std::size_t half = x.cols / 2;
  std::vector<double> freq(half);
  for (std::size_t i = 0; i < half; ++i)
    freq[i] =
        std::pow(cfg.rope_base, -2.0 * static_cast<double>(i) / static_cast<double>(x.cols));
  for (std::size_t r = 0; r < x.rows; ++r) {
    T* row = x.row(r);
    const double pos = static_cast<double>(positions[r]);
    for (std::size_t i = 0; i < half; ++i) {
      const double theta = pos * freq[i];
      const T c = static_cast<T>(std::cos(theta));
      const T s = static_cast<T>(std::sin(theta)) * sign;
      const T a = row[2 * i];
      const T b = row[2 * i + 1];
      row[2 * i] = a * c - b * s;
      row[2 * i + 1] = a * s + b * c;
    }
  }
}

}  // namespace

template <typename T>
Mat<T> rope_angles(const ModelConfig& cfg, std::span<const std::int32_t> positions) {
  if (cfg.d_head() % 2 != 0) throw ConfigError("rope_angles: d_head must be even");
  const auto half = static_cast<std::size_t>(cfg.d_head() / 2);
  Mat<T> angles(positions.size(), half);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    if (positions[r] < 0) throw InputError("rope_angles: positions must be non-negative");
    for (std::size_t i = 0; i < half; ++i) {
      angles.at(r, i) = static_cast<T>(
          static_cast<double>(positions[r]) *
          std::pow(cfg.rope_base, -2.0 * static_cast<double>(i) / static_cast<double>(cfg.d_head())));
    }
  }
  return angles;
}

template <typename T>
void rope_apply_inplace(Mat<T>& x, std::span<const std::int32_t> positions,
                        const ModelConfig& cfg) {
  rotate(x, positions, cfg, T(1));
}

template <typename T>
void rope_apply_inverse_inplace(Mat<T>& x, std::span<const std::int32_t> positions,
                                const ModelConfig& cfg) {
  rotate(x, positions, cfg, T(-1));
}

template Mat<float> rope_angles(const ModelConfig&, std::span<const std::int32_t>);
template Mat<double> rope_angles(const ModelConfig&, std::span<const std::int32_t>);
template void rope_apply_inplace(Mat<float>&, std::span<const std::int32_t>, const ModelConfig&);
template void rope_apply_inplace(Mat<double>&, std::span<const std::int32_t>, const ModelConfig&);
template void rope_apply_inverse_inplace(Mat<float>&, std::span<const std::int32_t>,
                                         const ModelConfig&);
template void rope_apply_inverse_inplace(Mat<double>&, std::span<const std::int32_t>,
                                         const ModelConfig&);

}  // namespace cmbert
