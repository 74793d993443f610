#pragma once

// Mathematical verification suite: each check runs a randomized experiment
// against an independent computation and reports the worst deviation seen.

#include <cstdint>
#include <string>
#include <vector>

#include "cmim/contrastive.hpp"
#include "cmim/toy2d.hpp"

namespace cmim {

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;      // worst observed statistic
  double tolerance = 0.0;  // pass threshold on `value`
  std::string detail;
};

/// max |-log p_{k=1} - InfoNCE(s_ii + offset, s_ij)| over random batches with
/// B in {2, 8, 64, 256} and tau in {0.1, 1}; tolerance 1e-10.
CheckResult check_offset_equivalence(int batches = 1000, std::uint64_t seed = 1,
                                     PositiveOffset offset = PositiveOffset::log_negatives);

/// Equal logits: p_{k=1} = 1/2 and InfoNCE softmax = 1/B, within 1e-12.
CheckResult check_calibration();

/// Closed-form logit gradients against central differences; worst relative
/// error over `instances` random anchors; tolerance 1e-6.
CheckResult check_contrastive_gradients(int instances = 1000, std::uint64_t seed = 2);

/// Full-objective parameter gradients of every variant against central
/// differences on a tiny model (D_x=6, D_z=2, B=4); tolerance 1e-4.
CheckResult check_objective_gradients(std::uint64_t seed = 3);

struct ConcentrationCell {
  double tau = 0.0;
  std::size_t negatives = 0;
  double epsilon = 0.0;
  double frequency = 0.0;  // Monte-Carlo P(|mean - E| >= eps)
  double bound = 0.0;
  double scaled_variance = 0.0;  // (B-1) * Var(mean), per (tau, B-1)
};

struct ConcentrationReport {
  std::vector<ConcentrationCell> cells;
  bool bound_holds = true;
  double worst_variance_ratio = 0.0;  // max / min of scaled_variance per tau
};

/// Negatives are uniform directions on the 2-sphere relative to a fixed
/// anchor, so cos is uniform on [-1, 1] and E exp(cos/tau) is closed form.
ConcentrationReport concentration_experiment(int trials = 10'000, std::uint64_t seed = 4);

/// Bound never exceeded and variance scaling within a factor of 2.
CheckResult check_hoeffding(int trials = 10'000, std::uint64_t seed = 4);

/// Toy runs on each seed: final R̄ < 0.1 and radius CV > 0.05.
CheckResult check_toy2d(const ToyConfig& config = {}, std::vector<std::uint64_t> seeds = {0, 1, 2});

struct VerifyOptions {
  bool corrupt_offset = false;  // use log B in place of log(B-1)
  ToyConfig toy;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_passed() const;
};

VerifyReport run_verification(const VerifyOptions& options = {});

/// One line per check: status, name, value, tolerance, detail.
std::string format_check(const CheckResult& check);
std::string format_report(const VerifyReport& report);

}  // namespace cmim
