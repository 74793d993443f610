#pragma once

// Scalar and vector primitives shared by every objective. All arithmetic is
// in double precision.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace cmim {

/// Raised when an input has no meaningful value for the requested operation
/// (zero-norm vector, empty reduction, degenerate statistics).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a caller breaks a documented precondition (batch too small,
/// mismatched shapes).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Temperature for similarity logits s = sim / tau.
class SimilarityConfig {
 public:
  explicit SimilarityConfig(double tau = 1.0);
  double tau() const noexcept { return tau_; }
  double logit(double similarity) const noexcept { return similarity / tau_; }

 private:
  double tau_;
};

/// Parameters of the Hoeffding concentration bound for the in-batch mean of
/// exp(sim / tau) over `num_negatives` draws.
struct ConcentrationQuery {
  double tau = 1.0;
  std::size_t num_negatives = 1;
  double epsilon = 0.1;

  void validate() const;
};

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// log((1/n) sum exp(v)), evaluated with a max shift.
double log_mean_exp(std::span<const double> values);

/// log(sum exp(v)), evaluated with a max shift.
double log_sum_exp(std::span<const double> values);

double softplus(double x) noexcept;
double sigmoid(double x) noexcept;

/// 2 exp(-2 n eps^2 / (e^{1/tau} - e^{-1/tau})^2), clipped to 2.
double hoeffding_bound(const ConcentrationQuery& q);

/// Width of the interval that exp(cos / tau) lives in.
double exp_similarity_range(double tau);

}  // namespace cmim
