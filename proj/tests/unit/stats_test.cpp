#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tttgate/error.hpp"
#include "tttgate/numerics/stats.hpp"

namespace tttgate {
namespace {

TEST(StatsTest, PerfectAndInverseCorrelation) {
  const std::vector<Real> x{0.3, 1.2, -0.7, 2.5, 0.0};
  std::vector<Real> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  EXPECT_NEAR(stats::pearson(x, x), 1.0, 1e-15);
  EXPECT_NEAR(stats::spearman(x, x), 1.0, 1e-15);
  EXPECT_NEAR(stats::pearson(x, neg), -1.0, 1e-15);
}

TEST(StatsTest, MatchesDefinitionalReference) {
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    auto x = testing::random_vector(rng, 50);
    auto y = testing::random_vector(rng, 50);
    for (std::size_t i = 0; i < 10; ++i) x[i + 10] = x[i];  // ties
    EXPECT_NEAR(stats::pearson(x, y), testing::ref_pearson(x, y), 1e-10);
    EXPECT_NEAR(stats::spearman(x, y), testing::ref_spearman(x, y), 1e-10);
  }
}

TEST(StatsTest, AverageRanks) {
  const auto r = stats::average_ranks(std::vector<Real>{10, 20, 10, 5});
  EXPECT_EQ(r, (std::vector<Real>{2.5, 4, 2.5, 1}));
}

TEST(StatsTest, UndefinedCorrelationThrows) {
  EXPECT_THROW(stats::pearson(std::vector<Real>{1, 2}, std::vector<Real>{1, 2}), NumericError);
  EXPECT_THROW(stats::pearson(std::vector<Real>{1, 1, 1}, std::vector<Real>{1, 2, 3}), NumericError);
  EXPECT_THROW(stats::spearman(std::vector<Real>{1, 2, 3}, std::vector<Real>{4, 4, 4}), NumericError);
}

TEST(McNemarTest, HandCases) {
  EXPECT_EQ(stats::mcnemar(10, 0).statistic, 8.1);
  EXPECT_EQ(stats::mcnemar(10, 10).statistic, 0.05);
  EXPECT_THROW(stats::mcnemar(0, 0), NumericError);
}

TEST(McNemarTest, TailProbability) {
  // P[chi2_1 > 3.841458820694124] = 0.05.
  EXPECT_NEAR(stats::chi_square1_upper_tail(3.841458820694124), 0.05, 1e-12);
  EXPECT_NEAR(stats::chi_square1_upper_tail(0.0), 1.0, 0.0);
  const auto r = stats::mcnemar(30, 5);
  EXPECT_NEAR(r.statistic, 24.0 * 24.0 / 35.0, 1e-12);
  EXPECT_NEAR(r.p_value, std::erfc(std::sqrt(r.statistic / 2)), 1e-15);
}

TEST(RngTest, DeterministicAndPortable) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  // std::mt19937_64's 10000th output is fixed by the standard.
  Rng c(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = c.next();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(RngTest, ConversionsStayInRange) {
  Rng r(7);
  Real sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Real u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(r.below(7), 7u);
    const Real z = r.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
  EXPECT_NE(Rng::derive(1, 0), Rng::derive(1, 1));
  EXPECT_EQ(Rng::derive(1, 2), Rng::derive(1, 2));
}

TEST(RngTest, OrthogonalMatrix) {
  Rng r(9);
  const auto q = random_orthogonal(r, 16);
  EXPECT_LT(max_abs_diff(matmul_nt(q, q), Matrix::identity(16)), 1e-12);
}

}  // namespace
}  // namespace tttgate
