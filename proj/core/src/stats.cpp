#include "cmim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cmim/numerics.hpp"

namespace cmim {

namespace {

// The mean of identical values can round away from them, leaving a tiny
// nonzero spread; test for the degenerate case directly instead.
bool all_equal(std::span<const double> a) {
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  return *lo == *hi;
}

}  // namespace

std::vector<double> zscore_table(std::span<const double> a) {
  if (a.empty()) throw DomainError("zscore_table: empty population");
  const auto n = static_cast<double>(a.size());
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : a) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  std::vector<double> z(a.size(), 0.0);
  if (sd == 0.0 || all_equal(a)) return z;
  for (std::size_t i = 0; i < a.size(); ++i) z[i] = (a[i] - mean) / sd;
  return z;
}

std::vector<double> rank_table(std::span<const double> a) {
  if (a.empty()) throw DomainError("rank_table: empty population");
  std::vector<std::size_t> order(a.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a[i] > a[j]; });
  std::vector<double> ranks(a.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start + 1;
    while (end < order.size() && a[order[end]] == a[order[start]]) ++end;
    // positions start..end-1 cover ranks start+1..end
    const double mid = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) ranks[order[k]] = mid;
    start = end;
  }
  return ranks;
}

double batch_size_slope(std::span<const XY> points) {
  if (points.size() < 2) throw DomainError("batch_size_slope needs at least two points");
  const auto n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (const auto& p : points) {
    sxy += (p.x - mx) * (p.y - my);
    sxx += (p.x - mx) * (p.x - mx);
  }
  if (sxx == 0.0) throw DomainError("batch_size_slope: all batch sizes are equal");
  return sxy / sxx;
}

namespace {

// Continued fraction for I_x(a, b) (modified Lentz), valid for x < (a+1)/(a+b+2).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta needs a, b > 0");
  if (x < 0.0 || x > 1.0) throw DomainError("incomplete beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw DomainError("Student t needs df > 0");
  if (std::isnan(t)) throw DomainError("Student t of NaN");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(regularized_incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

double student_t_cdf(double t, double df) {
  const double tail = 0.5 * student_t_two_sided_p(t, df);
  return t >= 0.0 ? 1.0 - tail : tail;
}

SlopeStats slopes_ttest(std::span<const double> slopes) {
  if (slopes.size() < 2) throw DomainError("slopes_ttest needs n >= 2");
  SlopeStats s;
  s.n = slopes.size();
  const auto n = static_cast<double>(s.n);
  s.mean_slope = std::accumulate(slopes.begin(), slopes.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : slopes) ss += (v - s.mean_slope) * (v - s.mean_slope);
  s.sd = std::sqrt(ss / (n - 1.0));
  if (s.sd == 0.0 || all_equal(slopes)) throw DomainError("slopes_ttest: zero sample variance, p is undefined");
  s.t = s.mean_slope / (s.sd / std::sqrt(n));
  s.p = student_t_two_sided_p(s.t, n - 1.0);
  return s;
}

}  // namespace cmim
