#pragma once

// Encoder/decoder assembly and the training objectives: cMIM and its MIM
// baseline, VAE (beta = 1/D_z), AE, InfoNCE, and the ablations (cMIM-sum,
// InfoNCE without augmented positives, cAE, cVAE).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmim/contrastive.hpp"
#include "cmim/nn.hpp"

namespace cmim {

enum class Variant { cMIM, MIM, VAE, AE, InfoNCE, cMIM_sum, InfoNCE_X, cAE, cVAE };

std::string_view variant_name(Variant v) noexcept;
/// Accepts the canonical names ("cMIM", "InfoNCE_X", ...), case-insensitively.
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();

bool has_decoder(Variant v) noexcept;
/// Variants whose loss includes an in-batch contrastive term (need B >= 2).
bool is_contrastive(Variant v) noexcept;

struct ModelDims {
  int input_dim = 0;
  int latent_dim = 0;
  std::vector<int> hidden{128, 128};
};

/// Encoder (Gaussian head: first D_z outputs are the mean, the next D_z the
/// raw log-variance), optional decoder (Bernoulli logits), variant and tau.
struct ModelBundle {
  Variant variant = Variant::cMIM;
  SimilarityConfig sim{1.0};
  ModelDims dims;
  DenseNet encoder;
  std::optional<DenseNet> decoder;

  static ModelBundle create(Variant variant, const ModelDims& dims, double tau, Rng& rng);
  /// Checks the shape invariants (encoder emits 2 D_z, decoder consumes D_z).
  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;                 // -(1/B) sum log p(x|z)
  double contrastive = 0.0;           // (1/B) sum -log p_{k=1}, or InfoNCE
  double latent_entropy_terms = 0.0;  // -(1/B) sum 1/2 (log q(z|x) + log P(z))
  double kl = 0.0;                    // (1/B) sum KL(q || P), unweighted
  double kl_weight = 0.0;             // beta; total uses kl_weight * kl
};

struct ModelGradients {
  Vector encoder;
  Vector decoder;  // empty for decoderless variants
};

struct ObjectiveResult {
  LossBreakdown loss;
  ModelGradients grads;
};

/// cMIM / MIM / cMIM_sum minibatch loss on reparameterised samples.
ObjectiveResult amim_minibatch_loss(const ModelBundle& model, const Matrix& batch_x,
                                    const Matrix& noise);

/// VAE / cVAE: reconstruction + KL / D_z (+ cMIM term for cVAE).
ObjectiveResult vae_minibatch_loss(const ModelBundle& model, const Matrix& batch_x,
                                   const Matrix& noise);

/// AE / cAE on posterior means.
ObjectiveResult ae_minibatch_loss(const ModelBundle& model, const Matrix& batch_x);

/// InfoNCE / InfoNCE_X. For InfoNCE the positive of row i is the encoding of
/// augmented_x row i (sampled with positive_noise); InfoNCE_X ignores both and
/// uses the anchor's own latent as its positive.
ObjectiveResult infonce_minibatch_loss(const ModelBundle& model, const Matrix& batch_x,
                                       const Matrix& augmented_x, const Matrix& noise,
                                       const Matrix& positive_noise);

/// Everything a minibatch of any variant may need.
struct MinibatchInputs {
  Matrix x;
  Matrix augmented_x;     // InfoNCE positives
  Matrix noise;           // B x D_z standard normals
  Matrix positive_noise;  // B x D_z, InfoNCE positives
};

ObjectiveResult minibatch_loss(const ModelBundle& model, const MinibatchInputs& in);

/// KL(N(mean, exp(log_var)) || N(0, I)) in closed form.
double kl_to_standard_normal(const Vector& mean, const Vector& log_var);

/// Posterior means and clamped log-variances for a batch.
struct EncodedBatch {
  Matrix mean;
  Matrix log_var;
};
EncodedBatch encode(const ModelBundle& model, const Matrix& x);

}  // namespace cmim
