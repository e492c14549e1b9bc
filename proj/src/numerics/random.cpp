#include "tttgate/numerics/random.hpp"

#include <cmath>
#include <numbers>

#include "tttgate/error.hpp"

namespace tttgate {

Real Rng::uniform() { return static_cast<Real>(next() >> 11) * 0x1.0p-53; }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ConfigError("Rng::below: n must be positive");
  const std::uint64_t limit = -n % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t x = next();
    if (x >= limit) return x % n;
  }
}

Real Rng::normal() {
  const Real u1 = 1.0 - uniform();  // (0, 1]
  const Real u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + (stream + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix random_normal(Rng& rng, std::size_t rows, std::size_t cols, Real stddev) {
  Matrix m(rows, cols);
  for (Real& v : m.values()) v = rng.normal(0.0, stddev);
  return m;
}

Matrix random_orthogonal(Rng& rng, std::size_t n) {
  Matrix q = random_normal(rng, n, n, 1.0);
  // Modified Gram-Schmidt on rows.
  for (std::size_t i = 0; i < n; ++i) {
    auto ri = q.row(i);
    for (std::size_t j = 0; j < i; ++j) {
      const auto rj = q.row(j);
      Real proj = 0.0;
      for (std::size_t c = 0; c < n; ++c) proj += ri[c] * rj[c];
      for (std::size_t c = 0; c < n; ++c) ri[c] -= proj * rj[c];
    }
    Real norm = 0.0;
    for (Real v : ri) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw NumericError("random_orthogonal: degenerate draw");
    for (Real& v : ri) v /= norm;
  }
  return q;
}

}  // namespace tttgate
