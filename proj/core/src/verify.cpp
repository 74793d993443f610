#include "cmim/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "cmim/datasets.hpp"
#include "cmim/objectives.hpp"
#include "cmim/svg.hpp"

namespace cmim {
namespace {

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

double relative_error(const Vector& a, const Vector& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

CheckResult finish(std::string name, double value, double tol, std::string detail,
                   bool less_is_pass = true) {
  CheckResult r;
  r.name = std::move(name);
  r.value = value;
  r.tolerance = tol;
  r.passed = less_is_pass ? value < tol : value > tol;
  r.detail = std::move(detail);
  return r;
}

}  // namespace

CheckResult check_offset_equivalence(int batches, std::uint64_t seed, PositiveOffset offset) {
  Rng rng(seed);
  const int sizes[] = {2, 8, 64, 256};
  const double taus[] = {0.1, 1.0};
  double worst = 0.0;
  for (int k = 0; k < batches; ++k) {
    const int b = sizes[k % 4];
    const double tau = taus[(k / 4) % 2];
    ContrastiveBatch batch{gaussian_matrix(b, 8, rng), SimilarityConfig(tau)};
    worst = std::max(worst, offset_equivalence(batch, offset));
  }
  return finish("offset_equivalence", worst, 1e-10,
                std::to_string(batches) + " batches, B in {2,8,64,256}, tau in {0.1,1}" +
                    (offset == PositiveOffset::log_batch ? ", offset log B (corrupted)" : ""));
}

CheckResult check_calibration() {
  double worst = 0.0;
  for (int b : {2, 3, 8, 64, 256, 1000}) {
    for (double level : {-3.0, 0.0, 2.5}) {
      const Matrix logits = Matrix::Constant(b, b, level);
      const AnchorLossGrad lg = cmim_logit_loss_and_grad(logits);
      for (Eigen::Index i = 0; i < b; ++i) {
        worst = std::max(worst, std::abs(std::exp(-lg.loss(i)) - 0.5));
      }
      const std::vector<double> row(static_cast<std::size_t>(b), level);
      worst = std::max(worst, std::abs(std::exp(-infonce_loss(row)) - 1.0 / b));
    }
  }
  return finish("calibration", worst, 1e-12,
                "equal logits: p_k1 = 1/2 and InfoNCE softmax = 1/B, B in {2,3,8,64,256,1000}");
}

CheckResult check_contrastive_gradients(int instances, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> bdist(2, 12);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  double worst = 0.0;
  const double h = 1e-5;
  for (int k = 0; k < instances; ++k) {
    const int b = bdist(rng);
    const Matrix logits = gaussian_matrix(b, b, rng) * scale(rng);
    const auto i = static_cast<Eigen::Index>(k % b);
    const AnchorLossGrad lg = cmim_logit_loss_and_grad(logits);
    Vector analytic = lg.grad.row(i).transpose();
    Vector numeric(b);
    for (Eigen::Index j = 0; j < b; ++j) {
      Matrix up = logits, down = logits;
      up(i, j) += h;
      down(i, j) -= h;
      numeric(j) = (cmim_logit_loss_and_grad(up).loss(i) - cmim_logit_loss_and_grad(down).loss(i)) /
                   (2 * h);
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return finish("contrastive_gradients", worst, 1e-6,
                std::to_string(instances) + " anchors, d/ds_ii = p-1, d/ds_ij = (1-p) pi_ij");
}

CheckResult check_objective_gradients(std::uint64_t seed) {
  Rng rng(seed);
  const ModelDims dims{6, 2, {5, 4}};
  const int b = 4;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  std::string worst_variant;
  for (Variant v : all_variants()) {
    ModelBundle model = ModelBundle::create(v, dims, 0.5, rng);
    MinibatchInputs in;
    in.x = Matrix(b, dims.input_dim);
    in.augmented_x = Matrix(b, dims.input_dim);
    for (Eigen::Index r = 0; r < b; ++r) {
      for (Eigen::Index c = 0; c < dims.input_dim; ++c) {
        in.x(r, c) = unit(rng);
        in.augmented_x(r, c) = std::clamp(in.x(r, c) + 0.2 * (unit(rng) - 0.5), 0.0, 1.0);
      }
    }
    in.noise = gaussian_matrix(b, dims.latent_dim, rng);
    in.positive_noise = gaussian_matrix(b, dims.latent_dim, rng);

    const ObjectiveResult res = minibatch_loss(model, in);
    const double h = 1e-6;
    const auto numeric_grad = [&](Vector& params) {
      Vector g(params.size());
      for (Eigen::Index p = 0; p < params.size(); ++p) {
        const double keep = params(p);
        params(p) = keep + h;
        const double up = minibatch_loss(model, in).loss.total;
        params(p) = keep - h;
        const double down = minibatch_loss(model, in).loss.total;
        params(p) = keep;
        g(p) = (up - down) / (2 * h);
      }
      return g;
    };
    Vector analytic = res.grads.encoder;
    Vector numeric = numeric_grad(model.encoder.parameters());
    if (model.decoder) {
      analytic.conservativeResize(analytic.size() + res.grads.decoder.size());
      analytic.tail(res.grads.decoder.size()) = res.grads.decoder;
      const Vector nd = numeric_grad(model.decoder->parameters());
      numeric.conservativeResize(numeric.size() + nd.size());
      numeric.tail(nd.size()) = nd;
    }
    const double err = relative_error(analytic, numeric);
    if (err >= worst) {
      worst = err;
      worst_variant = std::string(variant_name(v));
    }
  }
  return finish("objective_gradients", worst, 1e-4,
                "all 9 variants, D_x=6 D_z=2 B=4, worst " + worst_variant);
}

ConcentrationReport concentration_experiment(int trials, std::uint64_t seed) {
  ConcentrationReport rep;
  const double taus[] = {0.5, 1.0};
  const std::size_t negs[] = {16, 64, 256};
  const double eps[] = {0.1, 0.25, 0.5};
  Rng rng(seed);
  std::uniform_real_distribution<double> cosd(-1.0, 1.0);
  for (double tau : taus) {
    // E exp(c / tau) for c ~ U(-1, 1).
    const double expect = tau * (std::exp(1.0 / tau) - std::exp(-1.0 / tau)) / 2.0;
    double vmin = INFINITY, vmax = 0.0;
    for (std::size_t n : negs) {
      std::vector<double> dev(static_cast<std::size_t>(trials));
      double sum = 0.0, sq = 0.0;
      for (int t = 0; t < trials; ++t) {
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j) m += std::exp(cosd(rng) / tau);
        m /= static_cast<double>(n);
        dev[static_cast<std::size_t>(t)] = std::abs(m - expect);
        sum += m;
        sq += m * m;
      }
      const double mean = sum / trials;
      const double var = sq / trials - mean * mean;
      const double scaled = var * static_cast<double>(n);
      vmin = std::min(vmin, scaled);
      vmax = std::max(vmax, scaled);
      for (double e : eps) {
        ConcentrationCell c;
        c.tau = tau;
        c.negatives = n;
        c.epsilon = e;
        c.frequency = static_cast<double>(std::count_if(dev.begin(), dev.end(),
                                                        [e](double d) { return d >= e; })) /
                      trials;
        c.bound = hoeffding_bound({tau, n, e});
        c.scaled_variance = scaled;
        if (c.frequency > c.bound) rep.bound_holds = false;
        rep.cells.push_back(c);
      }
    }
    rep.worst_variance_ratio = std::max(rep.worst_variance_ratio, vmax / vmin);
  }
  return rep;
}

CheckResult check_hoeffding(int trials, std::uint64_t seed) {
  const ConcentrationReport rep = concentration_experiment(trials, seed);
  double worst_excess = -INFINITY;
  for (const auto& c : rep.cells) worst_excess = std::max(worst_excess, c.frequency - c.bound);
  CheckResult r;
  r.name = "hoeffding_concentration";
  r.value = rep.worst_variance_ratio;
  r.tolerance = 2.0;
  r.passed = rep.bound_holds && rep.worst_variance_ratio < 2.0;
  r.detail = std::to_string(trials) + " trials per cell; max(freq - bound) = " +
             format_number(worst_excess) + (rep.bound_holds ? " (bound holds)" : " (BOUND VIOLATED)") +
             "; value is max/min of (B-1) Var";
  return r;
}

CheckResult check_toy2d(const ToyConfig& config, std::vector<std::uint64_t> seeds) {
  double worst_r = 0.0, worst_cv = INFINITY;
  for (std::uint64_t s : seeds) {
    const ToyTrajectory t = run_toy(make_toy2d(s), config);
    worst_r = std::max(worst_r, t.snapshots.back().resultant_length);
    worst_cv = std::min(worst_cv, t.snapshots.back().radius_cv);
  }
  CheckResult r;
  r.name = "toy2d_uniformity";
  r.value = worst_r;
  r.tolerance = 0.1;
  r.passed = worst_r < 0.1 && worst_cv > 0.05;
  r.detail = std::to_string(seeds.size()) + " seeds, " + std::to_string(config.steps) +
             " steps; min radius CV = " + format_number(worst_cv) + " (needs > 0.05)";
  return r;
}

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

VerifyReport run_verification(const VerifyOptions& options) {
  VerifyReport rep;
  rep.checks.push_back(check_offset_equivalence(
      1000, 1, options.corrupt_offset ? PositiveOffset::log_batch : PositiveOffset::log_negatives));
  rep.checks.push_back(check_calibration());
  rep.checks.push_back(check_contrastive_gradients());
  rep.checks.push_back(check_objective_gradients());
  rep.checks.push_back(check_hoeffding());
  rep.checks.push_back(check_toy2d(options.toy));
  return rep;
}

std::string format_check(const CheckResult& c) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-4s  %-24s  value=%-12.4g tol=%-8.3g  ", c.passed ? "PASS" : "FAIL",
                c.name.c_str(), c.value, c.tolerance);
  return buf + c.detail;
}

std::string format_report(const VerifyReport& report) {
  std::ostringstream o;
  for (const auto& c : report.checks) o << format_check(c) << '\n';
  o << (report.all_passed() ? "all checks passed" : "verification FAILED") << '\n';
  return o.str();
}

}  // namespace cmim
