#pragma once

// Small dense networks with hand-written reverse mode, the Gaussian and
// Bernoulli heads used by the encoders/decoders, Adam, and the WSD schedule.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cmim/numerics.hpp"

namespace cmim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

/// Training produced a non-finite value. Carries the step when known.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what, long step = -1)
      : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

enum class Activation { identity, tanh, relu };

struct LayerShape {
  int in = 0;
  int out = 0;
  Activation act = Activation::identity;
};

/// Fully connected network. All parameters live in one flat vector laid out
/// layer by layer as [weight (out x in, row-major), bias (out)].
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<LayerShape> layers);

  /// input -> hidden... (hidden_act) -> output (output_act).
  static DenseNet mlp(int input_dim, std::span<const int> hidden, int output_dim,
                      Activation hidden_act = Activation::tanh,
                      Activation output_act = Activation::identity);

  /// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero bias.
  void init_glorot(Rng& rng);

  int input_dim() const noexcept { return layers_.empty() ? 0 : layers_.front().in; }
  int output_dim() const noexcept { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t num_layers() const noexcept { return layers_.size(); }
  const LayerShape& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<LayerShape>& layers() const noexcept { return layers_; }

  Eigen::Map<const RowMatrix> weight(std::size_t i) const;
  Eigen::Map<RowMatrix> weight(std::size_t i);
  Eigen::Map<const Vector> bias(std::size_t i) const;
  Eigen::Map<Vector> bias(std::size_t i);

  const Vector& parameters() const noexcept { return params_; }
  Vector& parameters() noexcept { return params_; }
  Eigen::Index num_parameters() const noexcept { return params_.size(); }

  bool all_finite() const { return params_.allFinite(); }

 private:
  std::vector<LayerShape> layers_;
  std::vector<Eigen::Index> offsets_;
  Vector params_;
};

/// Post-activation outputs of every layer; activations[0] is the input.
struct ForwardTape {
  std::vector<Matrix> activations;
};

/// Batched forward pass: rows of `x` are samples.
Matrix forward(const DenseNet& net, const Matrix& x, ForwardTape* tape = nullptr);

/// Output of the layer before the last (the last hidden representation).
const Matrix& last_hidden(const ForwardTape& tape);

struct NetGradients {
  Vector params;  // same layout as DenseNet::parameters()
  Matrix input;   // d/dx, one row per sample
};

/// Reverse-mode gradients of sum(upstream .* forward(x)).
NetGradients backward(const DenseNet& net, const ForwardTape& tape, const Matrix& upstream);

// ---------------------------------------------------------------------------
// Distribution heads.

/// log(1e-6): floor applied to every predicted log-variance before use.
inline const double kLogVarFloor = std::log(1e-6);

struct GaussianPosterior {
  Vector mean;
  Vector log_var;  // already clamped

  /// Clamps raw log-variances at kLogVarFloor.
  static GaussianPosterior from_raw(Vector mean, const Vector& raw_log_var);
};

struct BernoulliLikelihood {
  Vector logits;
};

double gaussian_logprob(const GaussianPosterior& p, const Vector& z);
Vector reparameterized_sample(const GaussianPosterior& p, const Vector& noise);
double bernoulli_logprob(const BernoulliLikelihood& lik, const Vector& x);

/// Standard normal log density summed over dimensions.
double standard_normal_logprob(const Vector& z);

// ---------------------------------------------------------------------------
// Optimisation.

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(Eigen::Index num_params, AdamConfig config);

  /// One bias-corrected Adam update with effective lr = config.lr * lr_multiplier.
  /// Throws DivergenceError (params untouched) on a non-finite gradient.
  void step(Vector& params, const Vector& grads, double lr_multiplier);

  long steps_taken() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return config_; }
  const Vector& first_moment() const noexcept { return m_; }
  const Vector& second_moment() const noexcept { return v_; }

 private:
  AdamConfig config_;
  Vector m_;
  Vector v_;
  long step_ = 0;
};

/// Warmup-stable-decay multiplier: linear ramp up, plateau at 1, linear decay to 0.
struct WsdSchedule {
  long total_steps = 1;
  double warmup_frac = 0.10;
  double decay_frac = 0.10;

  double multiplier(long step) const;
};

}  // namespace cmim
