#include "tttgate/numerics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tttgate/error.hpp"

namespace tttgate::stats {

Real mean(std::span<const Real> x) {
  if (x.empty()) throw NumericError("mean of empty sample");
  Real s = 0.0;
  for (Real v : x) s += v;
  return s / static_cast<Real>(x.size());
}

Real pearson(std::span<const Real> x, std::span<const Real> y) {
  if (x.size() != y.size()) throw ConfigError("pearson: length mismatch");
  if (x.size() < 3) throw NumericError("pearson: correlation needs at least 3 points");
  const Real mx = mean(x);
  const Real my = mean(y);
  Real sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Real dx = x[i] - mx;
    const Real dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson: zero-variance input");
  return sxy / std::sqrt(sxx * syy);
}

std::vector<Real> average_ranks(std::span<const Real> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<Real> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const Real avg = 0.5 * static_cast<Real>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

Real spearman(std::span<const Real> x, std::span<const Real> y) {
  if (x.size() != y.size()) throw ConfigError("spearman: length mismatch");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

Real chi_square1_upper_tail(Real x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(0.5 * x));
}

McNemarResult mcnemar(std::size_t b, std::size_t c) {
  if (b + c == 0) throw NumericError("mcnemar: no discordant pairs (b + c = 0)");
  McNemarResult r;
  r.b = b;
  r.c = c;
  const Real diff = std::abs(static_cast<Real>(b) - static_cast<Real>(c)) - 1.0;
  r.statistic = diff * diff / static_cast<Real>(b + c);
  r.p_value = chi_square1_upper_tail(r.statistic);
  return r;
}

}  // namespace tttgate::stats
