#include "tttgate/numerics/kernels.hpp"

namespace tttgate::simd::scalar {

Real dot(const Real* a, const Real* b, std::size_t n) noexcept {
  Real acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(Real alpha, const Real* x, Real* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace tttgate::simd::scalar
