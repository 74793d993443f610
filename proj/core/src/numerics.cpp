#include "cmim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cmim {

SimilarityConfig::SimilarityConfig(double tau) : tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ContractViolation("temperature must be positive and finite");
  }
}

void ConcentrationQuery::validate() const {
  if (!(tau > 0.0)) throw ContractViolation("tau must be positive");
  if (num_negatives < 1) throw ContractViolation("num_negatives must be >= 1");
  if (!(epsilon > 0.0)) throw ContractViolation("epsilon must be positive");
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ContractViolation("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw DomainError("cosine_similarity: zero-norm vector has no direction");
  }
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw DomainError("log_sum_exp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (std::isinf(m)) return m;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double log_mean_exp(std::span<const double> values) {
  if (values.empty()) throw DomainError("log_mean_exp: empty input");
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

double softplus(double x) noexcept {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double exp_similarity_range(double tau) {
  return std::exp(1.0 / tau) - std::exp(-1.0 / tau);
}

double hoeffding_bound(const ConcentrationQuery& q) {
  q.validate();
  const double range = exp_similarity_range(q.tau);
  const double n = static_cast<double>(q.num_negatives);
  const double bound =
      2.0 * std::exp(-2.0 * n * q.epsilon * q.epsilon / (range * range));
  return std::min(bound, 2.0);
}

}  // namespace cmim
