#include "cmim/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cmim {
namespace {

Vector row_norms(const Matrix& m) {
  Vector n = m.rowwise().norm();
  for (Eigen::Index i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0.0)) {
      throw DomainError("zero-norm latent row " + std::to_string(i) +
                        " has no direction (encoder collapse?)");
    }
  }
  return n;
}

void require_square(const Matrix& logits) {
  if (logits.rows() != logits.cols()) throw ContractViolation("logit matrix must be square");
  if (logits.rows() < 2) throw ContractViolation("contrastive batch needs B >= 2");
}

// Log-sum-exp of row i with the diagonal excluded; also returns the max used.
double negative_log_sum_exp(const Matrix& logits, Eigen::Index i, double& shift) {
  const Eigen::Index b = logits.cols();
  double m = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < b; ++j) {
    if (j != i) m = std::max(m, logits(i, j));
  }
  double acc = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    if (j != i) acc += std::exp(logits(i, j) - m);
  }
  shift = m;
  return m + std::log(acc);
}

}  // namespace

void ContrastiveBatch::validate() const {
  if (latents.rows() < 2) throw ContractViolation("contrastive batch needs B >= 2");
  row_norms(latents);
}

Matrix similarity_logits(const Matrix& a, const Matrix& b, double tau) {
  if (a.cols() != b.cols()) throw ContractViolation("similarity_logits: dimension mismatch");
  const Vector na = row_norms(a);
  const Vector nb = row_norms(b);
  const Matrix ua = na.cwiseInverse().asDiagonal() * a;
  const Matrix ub = nb.cwiseInverse().asDiagonal() * b;
  Matrix s = ua * ub.transpose();
  return s.cwiseMax(-1.0).cwiseMin(1.0) / tau;
}

void similarity_backward(const Matrix& a, const Matrix& b, double tau, const Matrix& logit_grad,
                         Matrix& a_grad, Matrix& b_grad) {
  const Vector na = row_norms(a);
  const Vector nb = row_norms(b);
  const Matrix ua = na.cwiseInverse().asDiagonal() * a;
  const Matrix ub = nb.cwiseInverse().asDiagonal() * b;
  // Gradients with respect to the unit vectors, then through normalisation:
  // d z = (I - u u^T) d u / |z|.
  Matrix dua = logit_grad * ub / tau;
  Matrix dub = logit_grad.transpose() * ua / tau;
  const Vector ra = (dua.cwiseProduct(ua)).rowwise().sum();
  const Vector rb = (dub.cwiseProduct(ub)).rowwise().sum();
  a_grad = na.cwiseInverse().asDiagonal() * (dua - ra.asDiagonal() * ua);
  b_grad = nb.cwiseInverse().asDiagonal() * (dub - rb.asDiagonal() * ub);
}

void cmim_logit_loss_and_grad_transposed(Matrix& work, Vector& loss, NegativeAggregate aggregate) {
  require_square(work);
  const Eigen::Index b = work.rows();
  const double offset =
      aggregate == NegativeAggregate::mean ? std::log(static_cast<double>(b - 1)) : 0.0;
  const double neg_inf = -std::numeric_limits<double>::infinity();
  loss.resize(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    auto col = work.col(i);
    const double positive = col[i];
    col[i] = neg_inf;
    const double shift = col.maxCoeff();
    col = (col.array() - shift).exp();  // exp(-inf) = 0 removes the positive
    const double denom = col.sum();
    const double lse = shift + std::log(denom);
    const double margin = positive - (lse - offset);
    const double p = sigmoid(margin);
    loss[i] = softplus(-margin);
    col *= (1.0 - p) / denom;
    col[i] = p - 1.0;
  }
}

AnchorLossGrad cmim_logit_loss_and_grad(const Matrix& logits, NegativeAggregate aggregate) {
  Matrix work = logits.transpose();
  AnchorLossGrad out;
  cmim_logit_loss_and_grad_transposed(work, out.loss, aggregate);
  out.grad = work.transpose();
  return out;
}

ContrastiveDiagnostics cmim_diagnostics(const ContrastiveBatch& batch) {
  batch.validate();
  const Eigen::Index b = batch.latents.rows();
  const double offset = std::log(static_cast<double>(b - 1));

  ContrastiveDiagnostics d;
  d.logits = similarity_logits(batch.latents, batch.latents, batch.config.tau());
  d.neg_log_mean.resize(b);
  d.margin.resize(b);
  d.p_match.resize(b);
  d.loss.resize(b);
  d.neg_weights = Matrix::Zero(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    double shift = 0.0;
    const double lse = negative_log_sum_exp(d.logits, i, shift);
    d.neg_log_mean[i] = lse - offset;
    d.margin[i] = d.logits(i, i) - d.neg_log_mean[i];
    d.p_match[i] = sigmoid(d.margin[i]);
    d.loss[i] = softplus(-d.margin[i]);
    const double denom = std::exp(lse - shift);
    for (Eigen::Index j = 0; j < b; ++j) {
      if (j != i) d.neg_weights(i, j) = std::exp(d.logits(i, j) - shift) / denom;
    }
  }
  return d;
}

LossAndLogitGrad cmim_loss_and_grad(const ContrastiveBatch& batch) {
  batch.validate();
  const Matrix logits = similarity_logits(batch.latents, batch.latents, batch.config.tau());
  AnchorLossGrad per_anchor = cmim_logit_loss_and_grad(logits, NegativeAggregate::mean);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  return {per_anchor.loss.mean(), per_anchor.grad * inv_b};
}

LossAndLatentGrad cmim_latent_loss_and_grad(const ContrastiveBatch& batch,
                                            NegativeAggregate aggregate) {
  batch.validate();
  const double tau = batch.config.tau();
  const Matrix logits = similarity_logits(batch.latents, batch.latents, tau);
  AnchorLossGrad per_anchor = cmim_logit_loss_and_grad(logits, aggregate);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Matrix ga, gb;
  similarity_backward(batch.latents, batch.latents, tau, per_anchor.grad * inv_b, ga, gb);
  LossAndLatentGrad out;
  out.mean_loss = per_anchor.loss.mean();
  out.anchor_loss = std::move(per_anchor.loss);
  out.latent_grad = ga + gb;
  return out;
}

Vector cmim_sum_variant(const ContrastiveBatch& batch) {
  batch.validate();
  const Matrix logits = similarity_logits(batch.latents, batch.latents, batch.config.tau());
  return cmim_logit_loss_and_grad(logits, NegativeAggregate::sum).loss;
}

double infonce_loss(std::span<const double> anchor_logits) {
  if (anchor_logits.size() < 2) throw ContractViolation("infonce_loss needs B >= 2 candidates");
  return log_sum_exp(anchor_logits) - anchor_logits[0];
}

namespace {

// Anchor i's candidate list: positive first, then the off-diagonal entries.
std::vector<double> candidates(const Matrix& logits, Eigen::Index i, double positive) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(logits.cols()));
  out.push_back(positive);
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    if (j != i) out.push_back(logits(i, j));
  }
  return out;
}

}  // namespace

double offset_equivalence(const ContrastiveBatch& batch, PositiveOffset offset) {
  const ContrastiveDiagnostics d = cmim_diagnostics(batch);
  const auto b = static_cast<double>(batch.size());
  const double shift = offset == PositiveOffset::log_negatives ? std::log(b - 1.0) : std::log(b);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < d.logits.rows(); ++i) {
    const auto l = candidates(d.logits, i, d.logits(i, i) + shift);
    worst = std::max(worst, std::abs(infonce_loss(l) - d.loss[i]));
  }
  return worst;
}

double sum_equivalence(const ContrastiveBatch& batch) {
  batch.validate();
  const Matrix logits = similarity_logits(batch.latents, batch.latents, batch.config.tau());
  const Vector sum_loss = cmim_logit_loss_and_grad(logits, NegativeAggregate::sum).loss;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto l = candidates(logits, i, logits(i, i));
    worst = std::max(worst, std::abs(infonce_loss(l) - sum_loss[i]));
  }
  return worst;
}

LossAndLatentGrad infonce_latent_loss_and_grad(const Matrix& anchors, const Matrix& positives,
                                               const SimilarityConfig& config,
                                               Matrix* positive_grad) {
  if (anchors.rows() < 2) throw ContractViolation("InfoNCE needs B >= 2");
  if (anchors.rows() != positives.rows() || anchors.cols() != positives.cols()) {
    throw ContractViolation("InfoNCE anchors/positives shape mismatch");
  }
  const double tau = config.tau();
  const Eigen::Index b = anchors.rows();
  const Matrix s_neg = similarity_logits(anchors, anchors, tau);
  const Matrix s_pos = similarity_logits(anchors, positives, tau);

  Vector loss(b);
  Matrix g_neg = Matrix::Zero(b, b);
  Matrix g_pos = Matrix::Zero(b, b);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto l = candidates(s_neg, i, s_pos(i, i));
    const double lse = log_sum_exp(l);
    loss[i] = lse - l[0];
    g_pos(i, i) = (std::exp(l[0] - lse) - 1.0) * inv_b;
    for (Eigen::Index j = 0; j < b; ++j) {
      if (j != i) g_neg(i, j) = std::exp(s_neg(i, j) - lse) * inv_b;
    }
  }

  Matrix ga, gb, pa, pb;
  similarity_backward(anchors, anchors, tau, g_neg, ga, gb);
  similarity_backward(anchors, positives, tau, g_pos, pa, pb);
  LossAndLatentGrad out;
  out.mean_loss = loss.mean();
  out.anchor_loss = std::move(loss);
  out.latent_grad = ga + gb + pa;
  if (positive_grad != nullptr) *positive_grad = std::move(pb);
  return out;
}

}  // namespace cmim
