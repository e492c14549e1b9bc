#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tttgate/numerics/matrix.hpp"

namespace tttgate::stats {

Real mean(std::span<const Real> x);

// Pearson product-moment correlation. Throws NumericError for fewer than
// three points or a zero-variance input (correlation undefined).
Real pearson(std::span<const Real> x, std::span<const Real> y);

// 1-based fractional ranks; ties receive the average of their positions.
std::vector<Real> average_ranks(std::span<const Real> x);

// Pearson correlation of the average ranks.
Real spearman(std::span<const Real> x, std::span<const Real> y);

struct McNemarResult {
  std::size_t b = 0;  // A correct, B wrong
  std::size_t c = 0;  // A wrong, B correct
  Real statistic = 0.0;
  Real p_value = 1.0;  // chi-square(1) upper tail
};

// Continuity-corrected McNemar statistic (|b - c| - 1)^2 / (b + c).
// Throws NumericError when b + c = 0.
McNemarResult mcnemar(std::size_t b, std::size_t c);

// Upper tail P[X > x] for X ~ chi-square with one degree of freedom.
Real chi_square1_upper_tail(Real x);

}  // namespace tttgate::stats
