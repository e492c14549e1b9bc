#include <atomic>
#include <cstdlib>
#include <string>

#include "tttgate/error.hpp"
#include "tttgate/numerics/kernels.hpp"

namespace tttgate::simd {
namespace {

using DotFn = Real (*)(const Real*, const Real*, std::size_t) noexcept;
using AxpyFn = void (*)(Real, const Real*, Real*, std::size_t) noexcept;

struct Table {
  Isa isa;
  DotFn dot;
  AxpyFn axpy;
};

constexpr Table kScalarTable{Isa::kScalar, &scalar::dot, &scalar::axpy};
#if defined(TTTGATE_HAVE_AVX2)
constexpr Table kAvx2Table{Isa::kAvx2, &avx2::dot, &avx2::axpy};
#endif

bool cpu_has_avx2() noexcept {
#if defined(TTTGATE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table* initial_table() noexcept {
  const char* forced = std::getenv("TTTGATE_ISA");
  if (forced != nullptr && std::string(forced) == "scalar") return &kScalarTable;
#if defined(TTTGATE_HAVE_AVX2)
  if (cpu_has_avx2()) return &kAvx2Table;
#endif
  return &kScalarTable;
}

std::atomic<const Table*>& table() noexcept {
  static std::atomic<const Table*> t{initial_table()};
  return t;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

bool avx2_available() noexcept { return cpu_has_avx2(); }

Isa active_isa() noexcept { return table().load(std::memory_order_relaxed)->isa; }

void set_isa(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      table().store(&kScalarTable);
      return;
    case Isa::kAvx2:
#if defined(TTTGATE_HAVE_AVX2)
      if (cpu_has_avx2()) {
        table().store(&kAvx2Table);
        return;
      }
#endif
      throw ConfigError("AVX2 kernels are not available on this build/CPU");
  }
}

Real dot(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) throw ConfigError("dot: length mismatch");
  return table().load(std::memory_order_relaxed)->dot(a.data(), b.data(), a.size());
}

void axpy(Real alpha, std::span<const Real> x, std::span<Real> y) {
  if (x.size() != y.size()) throw ConfigError("axpy: length mismatch");
  table().load(std::memory_order_relaxed)->axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace tttgate::simd
