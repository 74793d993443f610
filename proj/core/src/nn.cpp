#include "cmim/nn.hpp"

#include <numbers>
#include <string>

namespace cmim {

DenseNet::DenseNet(std::vector<LayerShape> layers) : layers_(std::move(layers)) {
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.in <= 0 || l.out <= 0) throw ContractViolation("layer dimensions must be positive");
    if (i > 0 && layers_[i - 1].out != l.in) {
      throw ContractViolation("layer " + std::to_string(i) + " input does not chain");
    }
    offsets_.push_back(total);
    total += static_cast<Eigen::Index>(l.in) * l.out + l.out;
  }
  params_ = Vector::Zero(total);
}

DenseNet DenseNet::mlp(int input_dim, std::span<const int> hidden, int output_dim,
                       Activation hidden_act, Activation output_act) {
  std::vector<LayerShape> layers;
  int prev = input_dim;
  for (int h : hidden) {
    layers.push_back({prev, h, hidden_act});
    prev = h;
  }
  layers.push_back({prev, output_dim, output_act});
  return DenseNet(std::move(layers));
}

void DenseNet::init_glorot(Rng& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const double a = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    std::uniform_real_distribution<double> u(-a, a);
    auto w = weight(i);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = u(rng);
    }
    bias(i).setZero();
  }
}

Eigen::Map<const RowMatrix> DenseNet::weight(std::size_t i) const {
  const auto& l = layers_.at(i);
  return {params_.data() + offsets_[i], l.out, l.in};
}

Eigen::Map<RowMatrix> DenseNet::weight(std::size_t i) {
  const auto& l = layers_.at(i);
  return {params_.data() + offsets_[i], l.out, l.in};
}

Eigen::Map<const Vector> DenseNet::bias(std::size_t i) const {
  const auto& l = layers_.at(i);
  return {params_.data() + offsets_[i] + static_cast<Eigen::Index>(l.in) * l.out, l.out};
}

Eigen::Map<Vector> DenseNet::bias(std::size_t i) {
  const auto& l = layers_.at(i);
  return {params_.data() + offsets_[i] + static_cast<Eigen::Index>(l.in) * l.out, l.out};
}

namespace {

void apply_activation(Matrix& m, Activation act) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::tanh:
      m = m.array().tanh().matrix();
      break;
    case Activation::relu:
      m = m.cwiseMax(0.0);
      break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the post-activation value.
void activation_backward(Matrix& grad, const Matrix& post, Activation act) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::tanh:
      grad.array() *= 1.0 - post.array().square();
      break;
    case Activation::relu:
      grad.array() *= (post.array() > 0.0).cast<double>();
      break;
  }
}

}  // namespace

Matrix forward(const DenseNet& net, const Matrix& x, ForwardTape* tape) {
  if (x.cols() != net.input_dim()) {
    throw ContractViolation("forward: input has " + std::to_string(x.cols()) +
                            " columns, network expects " + std::to_string(net.input_dim()));
  }
  if (tape != nullptr) {
    tape->activations.clear();
    tape->activations.push_back(x);
  }
  Matrix h = x;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    Matrix z = h * net.weight(i).transpose();
    z.rowwise() += net.bias(i).transpose();
    apply_activation(z, net.layer(i).act);
    h = std::move(z);
    if (tape != nullptr) tape->activations.push_back(h);
  }
  return h;
}

const Matrix& last_hidden(const ForwardTape& tape) {
  if (tape.activations.size() < 3) {
    throw ContractViolation("network has no hidden layer to expose");
  }
  return tape.activations[tape.activations.size() - 2];
}

NetGradients backward(const DenseNet& net, const ForwardTape& tape, const Matrix& upstream) {
  const std::size_t n = net.num_layers();
  if (tape.activations.size() != n + 1) throw ContractViolation("backward: stale tape");
  const Eigen::Index batch = tape.activations.front().rows();
  for (std::size_t i = 0; i <= n; ++i) {
    const int width = i == 0 ? net.input_dim() : net.layer(i - 1).out;
    if (tape.activations[i].rows() != batch || tape.activations[i].cols() != width) {
      throw ContractViolation("backward: stale tape");
    }
  }
  if (upstream.rows() != batch || upstream.cols() != net.output_dim()) {
    throw ContractViolation("backward: upstream gradient shape mismatch");
  }

  NetGradients g{Vector::Zero(net.num_parameters()), Matrix()};
  DenseNet scratch = net;  // reuse the parameter layout for gradient views
  Matrix delta = upstream;
  for (std::size_t k = n; k-- > 0;) {
    activation_backward(delta, tape.activations[k + 1], net.layer(k).act);
    const Matrix& in = tape.activations[k];
    scratch.weight(k) = delta.transpose() * in;
    scratch.bias(k) = delta.colwise().sum().transpose();
    delta = delta * net.weight(k);
  }
  g.params = std::move(scratch.parameters());
  g.input = std::move(delta);
  return g;
}

// ---------------------------------------------------------------------------

GaussianPosterior GaussianPosterior::from_raw(Vector mean, const Vector& raw_log_var) {
  if (mean.size() != raw_log_var.size()) throw ContractViolation("posterior size mismatch");
  return {std::move(mean), raw_log_var.cwiseMax(kLogVarFloor)};
}

double gaussian_logprob(const GaussianPosterior& p, const Vector& z) {
  if (z.size() != p.mean.size() || p.log_var.size() != p.mean.size()) {
    throw ContractViolation("gaussian_logprob: dimension mismatch");
  }
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double acc = 0.0;
  for (Eigen::Index d = 0; d < z.size(); ++d) {
    const double lv = std::max(p.log_var[d], kLogVarFloor);
    const double diff = z[d] - p.mean[d];
    acc += -0.5 * log2pi - 0.5 * lv - diff * diff / (2.0 * std::exp(lv));
  }
  return acc;
}

double standard_normal_logprob(const Vector& z) {
  const double log2pi = std::log(2.0 * std::numbers::pi);
  return -0.5 * (static_cast<double>(z.size()) * log2pi + z.squaredNorm());
}

Vector reparameterized_sample(const GaussianPosterior& p, const Vector& noise) {
  if (noise.size() != p.mean.size()) throw ContractViolation("noise dimension mismatch");
  const Vector sigma = (0.5 * p.log_var.cwiseMax(kLogVarFloor)).array().exp().matrix();
  return p.mean + sigma.cwiseProduct(noise);
}

double bernoulli_logprob(const BernoulliLikelihood& lik, const Vector& x) {
  if (x.size() != lik.logits.size()) throw ContractViolation("bernoulli_logprob: dimension mismatch");
  double acc = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double l = lik.logits[d];
    if (std::isinf(l)) {
      // Saturated logit: the likelihood is 0 or -inf depending on the target.
      const double target = l > 0 ? 1.0 : 0.0;
      acc += x[d] == target ? 0.0 : -std::numeric_limits<double>::infinity();
      continue;
    }
    acc += x[d] * l - softplus(l);
  }
  return acc;
}

// ---------------------------------------------------------------------------

AdamState::AdamState(Eigen::Index num_params, AdamConfig config)
    : config_(config), m_(Vector::Zero(num_params)), v_(Vector::Zero(num_params)) {}

void AdamState::step(Vector& params, const Vector& grads, double lr_multiplier) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ContractViolation("adam: parameter/gradient shape mismatch");
  }
  if (!grads.allFinite()) {
    throw DivergenceError("adam: non-finite gradient", step_);
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grads;
  v_ = b2 * v_ + (1.0 - b2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.lr * lr_multiplier;
  if (lr == 0.0) return;
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + config_.eps);
}

double WsdSchedule::multiplier(long step) const {
  if (total_steps < 1) throw ContractViolation("WSD schedule needs total_steps >= 1");
  if (step < 0 || step > total_steps) {
    throw ContractViolation("WSD step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total_steps) + "]");
  }
  const auto total = static_cast<double>(total_steps);
  const double warmup = std::round(warmup_frac * total);
  const double decay = std::round(decay_frac * total);
  const auto s = static_cast<double>(step);
  if (warmup > 0.0 && s < warmup) return s / warmup;
  if (decay > 0.0 && s > total - decay) return (total - s) / decay;
  return 1.0;
}

}  // namespace cmim
