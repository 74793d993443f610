#include "cmim/embed.hpp"

namespace cmim {

std::string_view embedding_kind_name(EmbeddingKind k) noexcept {
  return k == EmbeddingKind::mean_encoding ? "mean_encoding" : "informative";
}

Matrix mean_encoding(const ModelBundle& model, const Matrix& x) {
  return encode(model, x).mean;
}

Vector mean_encoding(const ModelBundle& model, const Vector& x) {
  return mean_encoding(model, Matrix(x.transpose())).row(0).transpose();
}

Matrix informative_embedding(const ModelBundle& model, const Matrix& x) {
  if (!model.decoder) {
    throw UnsupportedOperation(std::string(variant_name(model.variant)) +
                               " has no decoder, so no informative embedding");
  }
  ForwardTape tape;
  forward(*model.decoder, mean_encoding(model, x), &tape);
  return last_hidden(tape);
}

Vector informative_embedding(const ModelBundle& model, const Vector& x) {
  return informative_embedding(model, Matrix(x.transpose())).row(0).transpose();
}

bool supports(const ModelBundle& model, EmbeddingKind kind) noexcept {
  return kind == EmbeddingKind::mean_encoding || model.decoder.has_value();
}

Matrix embed(const ModelBundle& model, const Matrix& x, EmbeddingKind kind) {
  return kind == EmbeddingKind::mean_encoding ? mean_encoding(model, x)
                                              : informative_embedding(model, x);
}

}  // namespace cmim
