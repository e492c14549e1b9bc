#include "tttgate/numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "tttgate/error.hpp"

namespace tttgate {

LayerNormResult layer_norm_forward(std::span<const Real> x, std::span<const Real> gamma,
                                   std::span<const Real> beta, Real eps) {
  const std::size_t n = x.size();
  if (n == 0) throw ConfigError("layer_norm_forward: empty input");
  if (gamma.size() != n || beta.size() != n)
    throw ConfigError("layer_norm_forward: gamma/beta length mismatch");
  if (!(eps > 0)) throw ConfigError("layer_norm_forward: eps must be > 0");

  Real mean = 0.0;
  for (Real v : x) mean += v;
  mean /= static_cast<Real>(n);
  Real var = 0.0;
  for (Real v : x) var += (v - mean) * (v - mean);
  var /= static_cast<Real>(n);

  LayerNormResult out;
  out.cache.mean = mean;
  out.cache.inv_std = 1.0 / std::sqrt(var + eps);
  out.cache.gamma.assign(gamma.begin(), gamma.end());
  out.cache.normalized.resize(n);
  out.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real xhat = (x[i] - mean) * out.cache.inv_std;
    out.cache.normalized[i] = xhat;
    out.y[i] = gamma[i] * xhat + beta[i];
  }
  return out;
}

std::vector<Real> layer_norm_backward(std::span<const Real> grad_y, const LayerNormCache& cache) {
  const std::size_t n = cache.normalized.size();
  if (n == 0 || cache.gamma.size() != n) throw ConfigError("layer_norm_backward: missing cache");
  if (grad_y.size() != n) throw ConfigError("layer_norm_backward: grad length mismatch");

  // g = grad_y * gamma;  dx = inv_std * (g - mean(g) - xhat * mean(g * xhat))
  Real mean_g = 0.0;
  Real mean_gx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real g = grad_y[i] * cache.gamma[i];
    mean_g += g;
    mean_gx += g * cache.normalized[i];
  }
  mean_g /= static_cast<Real>(n);
  mean_gx /= static_cast<Real>(n);

  std::vector<Real> dx(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Real g = grad_y[i] * cache.gamma[i];
    dx[i] = cache.inv_std * (g - mean_g - cache.normalized[i] * mean_gx);
  }
  return dx;
}

Matrix causal_conv1d(const Matrix& seq, const Matrix& kernel) {
  if (kernel.rows() == 0) throw ConfigError("causal_conv1d: kernel width must be >= 1");
  if (kernel.cols() != seq.cols()) throw ConfigError("causal_conv1d: channel mismatch");
  const std::size_t steps = seq.rows();
  const std::size_t width = kernel.rows();
  Matrix out(steps, seq.cols());
  for (std::size_t t = 0; t < steps; ++t) {
    auto dst = out.row(t);
    const std::size_t taps = std::min(width, t + 1);
    for (std::size_t w = 0; w < taps; ++w) {
      const auto src = seq.row(t - w);
      const auto k = kernel.row(w);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += k[c] * src[c];
    }
  }
  return out;
}

TriangularMask::TriangularMask(std::size_t n, int k) : size(n), diagonal_offset(k) {
  if (k != 0 && k != -1) throw ConfigError("TriangularMask: diagonal offset must be 0 or -1");
}

Matrix tril_weighted_sum(const Matrix& scores, const TriangularMask& mask) {
  if (scores.rows() != scores.cols() || scores.rows() != mask.size)
    throw ConfigError("tril_weighted_sum: scores must be square and match the mask size");
  Matrix out = scores;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j)
      if (!mask.active(i, j)) out(i, j) = 0.0;
  return out;
}

Real nearest_rank_percentile(std::span<const Real> values, Real q) {
  if (values.empty()) throw ConfigError("nearest_rank_percentile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("nearest_rank_percentile: q outside [0, 1]");
  std::vector<Real> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<long long>(sorted.size());
  // Guard q * n against representation error (e.g. (1 - 0.7) * 10 = 3.0000000000000004).
  const Real scaled = q * static_cast<Real>(n);
  auto rank = static_cast<long long>(std::ceil(scaled - 1e-9 * std::max<Real>(1.0, scaled)));
  rank = std::clamp(rank, 1LL, n);
  return sorted[static_cast<std::size_t>(rank - 1)];
}

}  // namespace tttgate
