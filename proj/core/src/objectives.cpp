#include "cmim/objectives.hpp"

#include <algorithm>
#include <cctype>
#include <numbers>

namespace cmim {

namespace {

struct VariantInfo {
  Variant variant;
  std::string_view name;
};

constexpr VariantInfo kVariants[] = {
    {Variant::cMIM, "cMIM"},         {Variant::MIM, "MIM"},
    {Variant::VAE, "VAE"},           {Variant::AE, "AE"},
    {Variant::InfoNCE, "InfoNCE"},   {Variant::cMIM_sum, "cMIM_sum"},
    {Variant::InfoNCE_X, "InfoNCE_X"}, {Variant::cAE, "cAE"},
    {Variant::cVAE, "cVAE"},
};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

std::string_view variant_name(Variant v) noexcept {
  for (const auto& info : kVariants) {
    if (info.variant == v) return info.name;
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& info : kVariants) {
    if (iequals(info.name, name)) return info.variant;
  }
  throw ContractViolation("unknown model variant '" + std::string(name) + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v = [] {
    std::vector<Variant> out;
    for (const auto& info : kVariants) out.push_back(info.variant);
    return out;
  }();
  return v;
}

bool has_decoder(Variant v) noexcept {
  return v != Variant::InfoNCE && v != Variant::InfoNCE_X;
}

bool is_contrastive(Variant v) noexcept {
  switch (v) {
    case Variant::MIM:
    case Variant::VAE:
    case Variant::AE:
      return false;
    default:
      return true;
  }
}

ModelBundle ModelBundle::create(Variant variant, const ModelDims& dims, double tau, Rng& rng) {
  if (dims.input_dim <= 0 || dims.latent_dim <= 0) {
    throw ContractViolation("model dimensions must be positive");
  }
  ModelBundle m;
  m.variant = variant;
  m.sim = SimilarityConfig(tau);
  m.dims = dims;
  m.encoder = DenseNet::mlp(dims.input_dim, dims.hidden, 2 * dims.latent_dim);
  m.encoder.init_glorot(rng);
  if (has_decoder(variant)) {
    DenseNet dec = DenseNet::mlp(dims.latent_dim, dims.hidden, dims.input_dim);
    dec.init_glorot(rng);
    m.decoder = std::move(dec);
  }
  m.validate();
  return m;
}

void ModelBundle::validate() const {
  if (encoder.input_dim() != dims.input_dim || encoder.output_dim() != 2 * dims.latent_dim) {
    throw ContractViolation("encoder shape does not match model dims");
  }
  if (has_decoder(variant) != decoder.has_value()) {
    throw ContractViolation(std::string(variant_name(variant)) +
                            (decoder ? " must not carry a decoder" : " requires a decoder"));
  }
  if (decoder && (decoder->input_dim() != dims.latent_dim ||
                  decoder->output_dim() != dims.input_dim)) {
    throw ContractViolation("decoder shape does not match model dims");
  }
}

double kl_to_standard_normal(const Vector& mean, const Vector& log_var) {
  return 0.5 * (log_var.array().exp() + mean.array().square() - 1.0 - log_var.array()).sum();
}

namespace {

struct EncoderPass {
  ForwardTape tape;
  Matrix mean;
  Matrix raw_log_var;
  Matrix log_var;  // clamped
};

EncoderPass run_encoder(const ModelBundle& m, const Matrix& x) {
  if (x.cols() != m.dims.input_dim) throw ContractViolation("batch width != model input_dim");
  EncoderPass p;
  const Matrix out = forward(m.encoder, x, &p.tape);
  const int d = m.dims.latent_dim;
  p.mean = out.leftCols(d);
  p.raw_log_var = out.rightCols(d);
  p.log_var = p.raw_log_var.cwiseMax(kLogVarFloor);
  return p;
}

// Backpropagates d/d(mean) and d/d(clamped log var) into encoder parameters.
Vector encoder_backward(const ModelBundle& m, const EncoderPass& p, const Matrix& d_mean,
                        const Matrix& d_log_var) {
  const int d = m.dims.latent_dim;
  Matrix upstream(p.mean.rows(), 2 * d);
  upstream.leftCols(d) = d_mean;
  upstream.rightCols(d) =
      d_log_var.cwiseProduct((p.raw_log_var.array() > kLogVarFloor).cast<double>().matrix());
  return backward(m.encoder, p.tape, upstream).params;
}

void check_noise(const ModelBundle& m, const Matrix& x, const Matrix& noise) {
  if (noise.rows() != x.rows() || noise.cols() != m.dims.latent_dim) {
    throw ContractViolation("noise must be B x D_z");
  }
}

void require_variant(const ModelBundle& m, std::initializer_list<Variant> allowed,
                     const char* fn) {
  for (Variant v : allowed) {
    if (m.variant == v) return;
  }
  throw ContractViolation(std::string(fn) + " does not apply to variant " +
                          std::string(variant_name(m.variant)));
}

void require_batch(const ModelBundle& m, const Matrix& x) {
  if (x.rows() < 1) throw ContractViolation("empty minibatch");
  if (is_contrastive(m.variant) && x.rows() < 2) {
    throw ContractViolation("contrastive variant " + std::string(variant_name(m.variant)) +
                            " needs B >= 2");
  }
}

struct ReconPass {
  double nll = 0.0;  // -(1/B) sum log p(x|z)
  Matrix d_z;        // d nll / dz
  Vector d_decoder;
};

ReconPass reconstruct(const ModelBundle& m, const Matrix& z, const Matrix& x) {
  ForwardTape tape;
  const Matrix logits = forward(*m.decoder, z, &tape);
  const double inv_b = 1.0 / static_cast<double>(x.rows());
  double ll = 0.0;
  Matrix d_logits(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double l = logits(i, j);
      ll += x(i, j) * l - softplus(l);
      d_logits(i, j) = -(x(i, j) - sigmoid(l)) * inv_b;
    }
  }
  NetGradients g = backward(*m.decoder, tape, d_logits);
  return {-ll * inv_b, std::move(g.input), std::move(g.params)};
}

void check_finite(const LossBreakdown& loss) {
  if (!std::isfinite(loss.total)) throw DivergenceError("objective produced a non-finite loss");
}

}  // namespace

EncodedBatch encode(const ModelBundle& model, const Matrix& x) {
  EncoderPass p = run_encoder(model, x);
  return {std::move(p.mean), std::move(p.log_var)};
}

ObjectiveResult amim_minibatch_loss(const ModelBundle& model, const Matrix& batch_x,
                                    const Matrix& noise) {
  require_variant(model, {Variant::cMIM, Variant::MIM, Variant::cMIM_sum}, "amim_minibatch_loss");
  require_batch(model, batch_x);
  check_noise(model, batch_x, noise);

  const EncoderPass enc = run_encoder(model, batch_x);
  const Matrix sigma = (0.5 * enc.log_var.array()).exp().matrix();
  const Matrix eps_scaled = sigma.cwiseProduct(noise);  // z - mean
  const Matrix z = enc.mean + eps_scaled;
  const auto b = static_cast<double>(batch_x.rows());
  const auto dz_count = static_cast<double>(z.cols());

  ObjectiveResult r;
  ReconPass recon = reconstruct(model, z, batch_x);
  r.loss.recon = recon.nll;
  r.grads.decoder = std::move(recon.d_decoder);
  Matrix d_z = std::move(recon.d_z);

  // -1/2 (log q(z|x) + log P(z)), averaged over the batch.
  const Matrix var = enc.log_var.array().exp().matrix();
  const Matrix sq = eps_scaled.array().square().matrix();
  const double log_q = (-0.5 * kLog2Pi * dz_count * b) - 0.5 * enc.log_var.sum() -
                       (sq.array() / (2.0 * var.array())).sum();
  const double log_p = -0.5 * kLog2Pi * dz_count * b - 0.5 * z.squaredNorm();
  r.loss.latent_entropy_terms = -0.5 * (log_q + log_p) / b;

  const double c = -0.5 / b;
  // d log q / dz = -(z - mu)/var,  d log q / dmu = (z - mu)/var,
  // d log q / dlogvar = -1/2 + (z - mu)^2 / (2 var),  d log P / dz = -z.
  const Matrix resid_over_var = eps_scaled.cwiseQuotient(var);
  d_z += c * (-resid_over_var - z);
  Matrix d_mean = c * resid_over_var;
  Matrix d_log_var = c * (-0.5 + (sq.array() / (2.0 * var.array()))).matrix();

  if (model.variant != Variant::MIM) {
    const auto agg = model.variant == Variant::cMIM_sum ? NegativeAggregate::sum
                                                        : NegativeAggregate::mean;
    LossAndLatentGrad con = cmim_latent_loss_and_grad({z, model.sim}, agg);
    r.loss.contrastive = con.mean_loss;
    d_z += con.latent_grad;
  }

  // z = mu + exp(logvar / 2) * noise.
  d_mean += d_z;
  d_log_var += 0.5 * d_z.cwiseProduct(eps_scaled);
  r.grads.encoder = encoder_backward(model, enc, d_mean, d_log_var);

  r.loss.total = r.loss.recon + r.loss.contrastive + r.loss.latent_entropy_terms;
  check_finite(r.loss);
  return r;
}

ObjectiveResult vae_minibatch_loss(const ModelBundle& model, const Matrix& batch_x,
                                   const Matrix& noise) {
  require_variant(model, {Variant::VAE, Variant::cVAE}, "vae_minibatch_loss");
  require_batch(model, batch_x);
  check_noise(model, batch_x, noise);

  const EncoderPass enc = run_encoder(model, batch_x);
  const Matrix sigma = (0.5 * enc.log_var.array()).exp().matrix();
  const Matrix eps_scaled = sigma.cwiseProduct(noise);
  const Matrix z = enc.mean + eps_scaled;
  const auto b = static_cast<double>(batch_x.rows());

  ObjectiveResult r;
  ReconPass recon = reconstruct(model, z, batch_x);
  r.loss.recon = recon.nll;
  r.grads.decoder = std::move(recon.d_decoder);
  Matrix d_z = std::move(recon.d_z);

  const Matrix var = enc.log_var.array().exp().matrix();
  r.loss.kl = 0.5 *
              (var.array() + enc.mean.array().square() - 1.0 - enc.log_var.array()).sum() / b;
  r.loss.kl_weight = 1.0 / static_cast<double>(model.dims.latent_dim);
  const double w = r.loss.kl_weight / b;
  Matrix d_mean = w * enc.mean;
  Matrix d_log_var = (0.5 * w) * (var.array() - 1.0).matrix();

  if (model.variant == Variant::cVAE) {
    LossAndLatentGrad con = cmim_latent_loss_and_grad({z, model.sim});
    r.loss.contrastive = con.mean_loss;
    d_z += con.latent_grad;
  }

  d_mean += d_z;
  d_log_var += 0.5 * d_z.cwiseProduct(eps_scaled);
  r.grads.encoder = encoder_backward(model, enc, d_mean, d_log_var);

  r.loss.total = r.loss.recon + r.loss.kl_weight * r.loss.kl + r.loss.contrastive;
  check_finite(r.loss);
  return r;
}

ObjectiveResult ae_minibatch_loss(const ModelBundle& model, const Matrix& batch_x) {
  require_variant(model, {Variant::AE, Variant::cAE}, "ae_minibatch_loss");
  require_batch(model, batch_x);

  const EncoderPass enc = run_encoder(model, batch_x);
  ObjectiveResult r;
  ReconPass recon = reconstruct(model, enc.mean, batch_x);
  r.loss.recon = recon.nll;
  r.grads.decoder = std::move(recon.d_decoder);
  Matrix d_mean = std::move(recon.d_z);

  if (model.variant == Variant::cAE) {
    LossAndLatentGrad con = cmim_latent_loss_and_grad({enc.mean, model.sim});
    r.loss.contrastive = con.mean_loss;
    d_mean += con.latent_grad;
  }
  const Matrix d_log_var = Matrix::Zero(enc.mean.rows(), enc.mean.cols());
  r.grads.encoder = encoder_backward(model, enc, d_mean, d_log_var);
  r.loss.total = r.loss.recon + r.loss.contrastive;
  check_finite(r.loss);
  return r;
}

ObjectiveResult infonce_minibatch_loss(const ModelBundle& model, const Matrix& batch_x,
                                       const Matrix& augmented_x, const Matrix& noise,
                                       const Matrix& positive_noise) {
  require_variant(model, {Variant::InfoNCE, Variant::InfoNCE_X}, "infonce_minibatch_loss");
  require_batch(model, batch_x);
  check_noise(model, batch_x, noise);

  const EncoderPass enc = run_encoder(model, batch_x);
  const Matrix eps_scaled = (0.5 * enc.log_var.array()).exp().matrix().cwiseProduct(noise);
  const Matrix z = enc.mean + eps_scaled;

  ObjectiveResult r;
  if (model.variant == Variant::InfoNCE_X) {
    LossAndLatentGrad con = cmim_latent_loss_and_grad({z, model.sim}, NegativeAggregate::sum);
    r.loss.contrastive = con.mean_loss;
    const Matrix d_log_var = 0.5 * con.latent_grad.cwiseProduct(eps_scaled);
    r.grads.encoder = encoder_backward(model, enc, con.latent_grad, d_log_var);
  } else {
    if (augmented_x.rows() != batch_x.rows() || augmented_x.cols() != batch_x.cols()) {
      throw ContractViolation("InfoNCE needs one augmented view per anchor");
    }
    check_noise(model, augmented_x, positive_noise);
    const EncoderPass pos = run_encoder(model, augmented_x);
    const Matrix pos_eps =
        (0.5 * pos.log_var.array()).exp().matrix().cwiseProduct(positive_noise);
    const Matrix zp = pos.mean + pos_eps;

    Matrix d_zp;
    LossAndLatentGrad con = infonce_latent_loss_and_grad(z, zp, model.sim, &d_zp);
    r.loss.contrastive = con.mean_loss;
    r.grads.encoder =
        encoder_backward(model, enc, con.latent_grad,
                         0.5 * con.latent_grad.cwiseProduct(eps_scaled)) +
        encoder_backward(model, pos, d_zp, 0.5 * d_zp.cwiseProduct(pos_eps));
  }
  r.loss.total = r.loss.contrastive;
  check_finite(r.loss);
  return r;
}

ObjectiveResult minibatch_loss(const ModelBundle& model, const MinibatchInputs& in) {
  switch (model.variant) {
    case Variant::cMIM:
    case Variant::MIM:
    case Variant::cMIM_sum:
      return amim_minibatch_loss(model, in.x, in.noise);
    case Variant::VAE:
    case Variant::cVAE:
      return vae_minibatch_loss(model, in.x, in.noise);
    case Variant::AE:
    case Variant::cAE:
      return ae_minibatch_loss(model, in.x);
    case Variant::InfoNCE:
    case Variant::InfoNCE_X:
      return infonce_minibatch_loss(model, in.x, in.augmented_x, in.noise, in.positive_noise);
  }
  throw ContractViolation("unhandled variant");
}

}  // namespace cmim
