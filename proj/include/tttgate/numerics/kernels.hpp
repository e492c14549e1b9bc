#pragma once

// Inner-loop kernels with a scalar reference and an AVX2/FMA variant.
// The variant is chosen once at startup from CPUID; TTTGATE_ISA=scalar in the
// environment forces the reference path. Both paths are deterministic for a
// given ISA; they agree to rounding (summation order and FMA contraction).

#include <cstddef>
#include <span>
#include <string_view>

#include "tttgate/numerics/matrix.hpp"

namespace tttgate::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa) noexcept;

// True if the AVX2 variant was compiled in and the CPU supports AVX2+FMA.
bool avx2_available() noexcept;

Isa active_isa() noexcept;

// Overrides dispatch (tests and benchmarks). Throws ConfigError if the
// requested ISA is unavailable.
void set_isa(Isa isa);

Real dot(std::span<const Real> a, std::span<const Real> b);
// y += alpha * x
void axpy(Real alpha, std::span<const Real> x, std::span<Real> y);

namespace scalar {
Real dot(const Real* a, const Real* b, std::size_t n) noexcept;
void axpy(Real alpha, const Real* x, Real* y, std::size_t n) noexcept;
}  // namespace scalar

#if defined(TTTGATE_HAVE_AVX2)
namespace avx2 {
Real dot(const Real* a, const Real* b, std::size_t n) noexcept;
void axpy(Real alpha, const Real* x, Real* y, std::size_t n) noexcept;
}  // namespace avx2
#endif

}  // namespace tttgate::simd
