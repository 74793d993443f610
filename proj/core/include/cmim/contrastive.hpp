#pragma once

// Matched-pair probability p_{k=1}, its loss and closed-form gradients,
// InfoNCE, and the positive-logit offset identity that connects the two.

#include <span>

#include <Eigen/Dense>

#include "cmim/numerics.hpp"

namespace cmim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// B x D latent codes (one row per sample) plus the similarity temperature.
struct ContrastiveBatch {
  Matrix latents;
  SimilarityConfig config;

  std::size_t size() const noexcept { return static_cast<std::size_t>(latents.rows()); }
  /// Throws ContractViolation for B < 2 and DomainError for a zero-norm row.
  void validate() const;
};

/// How the negatives enter the denominator of p_{k=1}: through their mean
/// (the cMIM form) or their sum (the cMIM-sum ablation, i.e. plain InfoNCE).
enum class NegativeAggregate { mean, sum };

struct ContrastiveDiagnostics {
  Matrix logits;        // s_ij = cos(z_i, z_j) / tau
  Vector neg_log_mean;  // s̄_i, log-mean-exp over j != i
  Vector margin;        // s_ii - s̄_i
  Vector p_match;       // sigmoid(margin)
  Vector loss;          // softplus(-margin) = -log p_match
  Matrix neg_weights;   // pi_ij, softmax of s_i. over j != i, zero diagonal
};

ContrastiveDiagnostics cmim_diagnostics(const ContrastiveBatch& batch);

/// Per-anchor losses and per-anchor logit gradients: row i holds dℓ_i/ds_i.
struct AnchorLossGrad {
  Vector loss;
  Matrix grad;
};

/// Logit-level form, usable on any square logit matrix. For the mean form
/// row i of the gradient is (p-1) on the diagonal and (1-p) pi_ij elsewhere.
AnchorLossGrad cmim_logit_loss_and_grad(const Matrix& logits,
                                        NegativeAggregate aggregate = NegativeAggregate::mean);

/// Buffer-reusing form: `work` holds the transposed logits on entry (column i
/// is anchor i) and the transposed per-anchor gradient on exit.
void cmim_logit_loss_and_grad_transposed(Matrix& work, Vector& loss,
                                         NegativeAggregate aggregate = NegativeAggregate::mean);

struct LossAndLogitGrad {
  double mean_loss = 0.0;
  Matrix logit_grad;  // d(mean loss)/ds
};

LossAndLogitGrad cmim_loss_and_grad(const ContrastiveBatch& batch);

struct LossAndLatentGrad {
  double mean_loss = 0.0;
  Vector anchor_loss;
  Matrix latent_grad;  // d(mean loss)/dz, B x D
};

/// Mean contrastive loss with the chain rule carried through the cosine
/// similarities to the latent codes (both arguments of every s_ij).
LossAndLatentGrad cmim_latent_loss_and_grad(const ContrastiveBatch& batch,
                                            NegativeAggregate aggregate = NegativeAggregate::mean);

/// Per-anchor losses with the sum denominator (cMIM-sum ablation).
Vector cmim_sum_variant(const ContrastiveBatch& batch);

/// -log softmax(l)[0]: the B-way cross-entropy with the positive at index 0.
double infonce_loss(std::span<const double> anchor_logits);

/// Which constant is added to the positive logit when re-expressing
/// -log p_{k=1} as an InfoNCE cross-entropy. Only `log_negatives` is correct;
/// `log_batch` exists to show that the equivalence check catches a wrong one.
enum class PositiveOffset { log_negatives, log_batch };

/// Max over anchors of |InfoNCE(s_ii + offset, s_ij) - ℓ_i|.
double offset_equivalence(const ContrastiveBatch& batch,
                          PositiveOffset offset = PositiveOffset::log_negatives);

/// Max over anchors of |cmim_sum_variant - InfoNCE(s_ii, s_ij)| (no offset).
double sum_equivalence(const ContrastiveBatch& batch);

/// InfoNCE between anchors and positives: anchor i uses cos(z_i, p_i) as the
/// positive logit and cos(z_i, z_j), j != i, as negatives.
LossAndLatentGrad infonce_latent_loss_and_grad(const Matrix& anchors, const Matrix& positives,
                                               const SimilarityConfig& config,
                                               Matrix* positive_grad);

/// cos(a_i, b_j) / tau for all rows of a and b.
Matrix similarity_logits(const Matrix& a, const Matrix& b, double tau);

/// Pulls d(loss)/d(logits) back through similarity_logits onto a and b.
void similarity_backward(const Matrix& a, const Matrix& b, double tau, const Matrix& logit_grad,
                         Matrix& a_grad, Matrix& b_grad);

}  // namespace cmim
