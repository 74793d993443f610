#pragma once

// Features extracted from a trained model for downstream probes.

#include <string_view>

#include "cmim/objectives.hpp"

namespace cmim {

enum class EmbeddingKind { mean_encoding, informative };

std::string_view embedding_kind_name(EmbeddingKind k) noexcept;

/// Raised when a model cannot produce the requested embedding.
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Posterior means, one row per input row.
Matrix mean_encoding(const ModelBundle& model, const Matrix& x);
Vector mean_encoding(const ModelBundle& model, const Vector& x);

/// Decoder's last hidden activation (before the Bernoulli-logit projection),
/// with the decoder conditioned on the posterior mean of each input.
Matrix informative_embedding(const ModelBundle& model, const Matrix& x);
Vector informative_embedding(const ModelBundle& model, const Vector& x);

bool supports(const ModelBundle& model, EmbeddingKind kind) noexcept;
Matrix embed(const ModelBundle& model, const Matrix& x, EmbeddingKind kind);

}  // namespace cmim
