#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "tttgate/numerics/matrix.hpp"

namespace tttgate {

inline constexpr Real kLayerNormEps = 1e-6;

// Saved statistics for layer_norm_backward.
struct LayerNormCache {
  std::vector<Real> normalized;  // (x - mean) * inv_std
  std::vector<Real> gamma;
  Real mean = 0.0;
  Real inv_std = 0.0;
};

struct LayerNormResult {
  std::vector<Real> y;
  LayerNormCache cache;
};

// y = gamma * (x - mean(x)) / sqrt(var(x) + eps) + beta, population variance.
LayerNormResult layer_norm_forward(std::span<const Real> x, std::span<const Real> gamma,
                                   std::span<const Real> beta, Real eps = kLayerNormEps);

// Exact vector-Jacobian product of layer_norm_forward with respect to x.
std::vector<Real> layer_norm_backward(std::span<const Real> grad_y, const LayerNormCache& cache);

// Depthwise causal convolution with left zero-padding:
//   out[t, c] = sum_w kernel[w, c] * seq[t - w, c].
Matrix causal_conv1d(const Matrix& seq, const Matrix& kernel);

// Lower-triangular mask with diagonal offset k: entry (i, j) is active iff j <= i + k.
struct TriangularMask {
  std::size_t size = 0;
  int diagonal_offset = 0;

  TriangularMask(std::size_t n, int k);

  bool active(std::size_t i, std::size_t j) const noexcept {
    return static_cast<long long>(j) <= static_cast<long long>(i) + diagonal_offset;
  }
};

// Zeroes every entry (t, i) of `scores` that `mask` does not keep.
Matrix tril_weighted_sum(const Matrix& scores, const TriangularMask& mask);

// Nearest-rank percentile: the ceil(q * n)-th smallest value (1-based), clamped
// to [1, n]. Always returns an element of `values`.
Real nearest_rank_percentile(std::span<const Real> values, Real q);

// Overflow-safe logistic function.
inline Real sigmoid(Real x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Real e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace tttgate
