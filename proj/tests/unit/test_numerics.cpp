#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cmim/numerics.hpp"

using namespace cmim;

TEST(Cosine, IdenticalOrthogonalAndHandComputed) {
  const std::vector<double> x{1, 0}, y{0, 1};
  EXPECT_DOUBLE_EQ(cosine_similarity(x, x), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, y), 0.0);
  const std::vector<double> a{1, 2, 3}, b{-3, 0, 1};
  EXPECT_NEAR(cosine_similarity(a, b), 0.0, 1e-15);
}

TEST(Cosine, StaysInRangeForNearlyParallelVectors) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> a(7);
    for (auto& v : a) v = n(rng);
    std::vector<double> b = a;
    for (auto& v : b) v *= 3.7;
    const double c = cosine_similarity(a, b);
    EXPECT_LE(c, 1.0);
    EXPECT_GE(c, -1.0);
  }
}

TEST(Cosine, RejectsZeroNormAndLengthMismatch) {
  const std::vector<double> z{0, 0}, x{1, 0};
  EXPECT_THROW(cosine_similarity(z, x), DomainError);
  EXPECT_THROW(cosine_similarity(x, z), DomainError);
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(cosine_similarity(x, three), ContractViolation);
}

TEST(LogMeanExp, Examples) {
  const std::vector<double> c{2.5, 2.5, 2.5}, zeros{0, 0}, big{1000, 1000};
  EXPECT_NEAR(log_mean_exp(c), 2.5, 1e-15);
  EXPECT_DOUBLE_EQ(log_mean_exp(zeros), 0.0);
  EXPECT_DOUBLE_EQ(log_mean_exp(big), 1000.0);
  EXPECT_THROW(log_mean_exp(std::vector<double>{}), DomainError);
  EXPECT_THROW(log_sum_exp(std::vector<double>{}), DomainError);
}

TEST(LogMeanExp, MatchesNaiveFormInLongDouble) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 5.0);
  std::uniform_int_distribution<int> len(1, 300);
  for (int k = 0; k < 500; ++k) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (auto& x : v) x = n(rng);
    long double acc = 0.0L;
    for (double x : v) acc += std::exp(static_cast<long double>(x));
    const auto naive = static_cast<double>(std::log(acc / v.size()));
    EXPECT_NEAR(log_mean_exp(v), naive, 1e-12);
    EXPECT_NEAR(log_sum_exp(v), naive + std::log(static_cast<double>(v.size())), 1e-12);
  }
}

TEST(Softplus, Examples) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_LT(softplus(-50.0), 1e-20);
  EXPECT_GT(softplus(-50.0), 0.0);
  const long double ref = 50.0L + std::log1p(std::exp(-50.0L));
  EXPECT_NEAR(softplus(50.0), static_cast<double>(ref), 1e-13);
  EXPECT_DOUBLE_EQ(softplus(800.0), 800.0);
  EXPECT_EQ(softplus(-800.0), 0.0);
}

TEST(Softplus, AntisymmetryIdentity) {
  for (double x = -40.0; x <= 40.0; x += 0.37) {
    EXPECT_NEAR(softplus(x) - softplus(-x), x, 1e-12) << x;
  }
}

TEST(Sigmoid, StableAndComplementary) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  for (double x = -30; x <= 30; x += 0.5) EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
}

TEST(SimilarityConfig, RejectsNonPositiveTau) {
  EXPECT_THROW(SimilarityConfig(0.0), ContractViolation);
  EXPECT_THROW(SimilarityConfig(-1.0), ContractViolation);
  EXPECT_THROW(SimilarityConfig(std::nan("")), ContractViolation);
  const SimilarityConfig s(0.1);
  EXPECT_DOUBLE_EQ(s.logit(1.0), 10.0);
  EXPECT_DOUBLE_EQ(s.logit(-1.0), -10.0);
}

TEST(Hoeffding, ReferenceValue) {
  // range e - 1/e, exponent -2 * 100 * 0.25 / range^2
  const double range = std::exp(1.0) - std::exp(-1.0);
  EXPECT_NEAR(range, 2.3504, 1e-4);
  const double expected = 2.0 * std::exp(-2.0 * 100 * 0.25 / (range * range));
  const double got = hoeffding_bound({1.0, 100, 0.5});
  EXPECT_NEAR(got, expected, 1e-18);
  EXPECT_NEAR(got, 2.35e-4, 0.01e-4);
  EXPECT_DOUBLE_EQ(exp_similarity_range(1.0), range);
}

TEST(Hoeffding, VacuousForTinyEpsilonAndInRange) {
  EXPECT_NEAR(hoeffding_bound({1.0, 100, 1e-9}), 2.0, 1e-12);
  for (double tau : {0.05, 0.5, 2.0})
    for (std::size_t n : {1u, 10u, 1000u})
      for (double e : {1e-3, 0.1, 1.0, 10.0}) {
        const double b = hoeffding_bound({tau, n, e});
        EXPECT_GE(b, 0.0);
        EXPECT_LE(b, 2.0);
      }
}

TEST(Hoeffding, DoublingNegativesSquaresExpFactor) {
  for (std::size_t n : {5u, 40u, 100u}) {
    const double b1 = hoeffding_bound({1.0, n, 0.5});
    const double b2 = hoeffding_bound({1.0, 2 * n, 0.5});
    EXPECT_NEAR(b2, b1 * b1 / 2.0, 1e-15);
  }
}

TEST(Hoeffding, Monotonicity) {
  double prev = 3.0;
  for (std::size_t n = 1; n < 2000; n *= 2) {
    const double b = hoeffding_bound({1.0, n, 0.3});
    EXPECT_LE(b, prev);
    prev = b;
  }
  prev = 3.0;
  for (double e = 0.01; e < 3.0; e *= 1.5) {
    const double b = hoeffding_bound({1.0, 50, e});
    EXPECT_LE(b, prev);
    prev = b;
  }
  // Smaller tau widens the range of exp(s) and loosens the bound.
  prev = 0.0;
  for (double tau : {4.0, 2.0, 1.0, 0.5, 0.25}) {
    const double b = hoeffding_bound({tau, 50, 0.3});
    EXPECT_GE(b, prev);
    prev = b;
  }
}

TEST(Hoeffding, RejectsInvalidQueries) {
  EXPECT_THROW(hoeffding_bound({1.0, 0, 0.1}), ContractViolation);
  EXPECT_THROW(hoeffding_bound({0.0, 10, 0.1}), ContractViolation);
  EXPECT_THROW(hoeffding_bound({1.0, 10, 0.0}), ContractViolation);
}

TEST(Hoeffding, MonteCarloNeverExceedsBound) {
  // Unit vectors in 3D: cos with a fixed anchor is uniform on [-1, 1].
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n;
  const double tau = 1.0;
  // Reference mean from 10^6 draws rather than the closed form.
  double mu = 0.0;
  const auto draw_cos = [&] {
    double x = n(rng), y = n(rng), z = n(rng);
    return z / std::sqrt(x * x + y * y + z * z);
  };
  for (int i = 0; i < 1'000'000; ++i) mu += std::exp(draw_cos() / tau);
  mu /= 1e6;
  EXPECT_NEAR(mu, (std::exp(1.0) - std::exp(-1.0)) / 2.0, 5e-3);
  for (std::size_t negs : {8u, 32u}) {
    for (double eps : {0.1, 0.2, 0.4}) {
      int hits = 0;
      const int trials = 10'000;
      for (int t = 0; t < trials; ++t) {
        double m = 0.0;
        for (std::size_t j = 0; j < negs; ++j) m += std::exp(draw_cos() / tau);
        if (std::abs(m / negs - mu) >= eps) ++hits;
      }
      EXPECT_LE(static_cast<double>(hits) / trials, hoeffding_bound({tau, negs, eps}));
    }
  }
}
