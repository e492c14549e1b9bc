#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "tttgate/numerics/matrix.hpp"

namespace tttgate {

// Portable seeded generator. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the conversions below are spelled out
// here (the std distributions are implementation-defined):
//   uniform()      = (next() >> 11) * 2^-53                 in [0, 1)
//   below(n)       = rejection sampling on next() % n, rejecting the
//                    top 2^64 mod n values
//   normal()       = Box-Muller, cos branch only, u1 in (0, 1]
//   derive(s, k)   = splitmix64 finalizer of s + k * 0x9E3779B97F4A7C15
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  Real uniform();
  std::uint64_t below(std::uint64_t n);
  Real normal();
  Real normal(Real mean, Real stddev) { return mean + stddev * normal(); }

  // Fisher-Yates from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
};

// rows x cols of N(0, stddev^2).
Matrix random_normal(Rng& rng, std::size_t rows, std::size_t cols, Real stddev);

// Random orthogonal n x n matrix (Gram-Schmidt on a Gaussian matrix).
Matrix random_orthogonal(Rng& rng, std::size_t n);

}  // namespace tttgate
