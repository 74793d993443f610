#pragma once

// Aggregation statistics for downstream evaluation: z-scores and midranks
// over a population of (model, batch size) cells, OLS slope against batch
// size, and a one-sample two-sided t-test.

#include <span>
#include <vector>

namespace cmim {

/// (a - mean) / population std; all zeros when the std is zero.
std::vector<double> zscore_table(std::span<const double> accuracies);

/// Rank 1 = highest accuracy; ties share the mean of the ranks they cover.
std::vector<double> rank_table(std::span<const double> accuracies);

struct XY {
  double x = 0.0;
  double y = 0.0;
};

/// Ordinary least squares slope of y on x.
double batch_size_slope(std::span<const XY> points);

/// Regularised incomplete beta I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// Two-sided p-value P(|T| >= |t|).
double student_t_two_sided_p(double t, double df);

struct SlopeStats {
  double mean_slope = 0.0;
  double sd = 0.0;
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// One-sample two-sided t-test of mean(slopes) != 0 with n - 1 dof.
SlopeStats slopes_ttest(std::span<const double> slopes);

}  // namespace cmim
