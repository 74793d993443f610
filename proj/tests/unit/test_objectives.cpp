#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cmim/objectives.hpp"
#include "test_support.hpp"

using namespace cmim;
using cmim::testing::randn;
using cmim::testing::rel_err;

namespace {

const ModelDims kTiny{6, 2, {5, 4}};

ModelBundle make(Variant v, const ModelDims& dims = kTiny, double tau = 0.5, std::uint64_t seed = 1) {
  Rng rng(seed);
  ModelBundle m = ModelBundle::create(v, dims, tau, rng);
  // Perturb biases too so no unit sits exactly on a symmetric point.
  m.encoder.parameters() += 0.2 * randn(m.encoder.num_parameters(), 1, rng);
  if (m.decoder) m.decoder->parameters() += 0.2 * randn(m.decoder->num_parameters(), 1, rng);
  return m;
}

MinibatchInputs inputs(const ModelDims& dims, int b, std::uint64_t seed) {
  Rng rng(seed);
  MinibatchInputs in;
  in.x = cmim::testing::uniform01(b, dims.input_dim, rng);
  in.augmented_x = cmim::testing::uniform01(b, dims.input_dim, rng);
  in.noise = randn(b, dims.latent_dim, rng);
  in.positive_noise = randn(b, dims.latent_dim, rng);
  return in;
}

double total_loss(const ModelBundle& m, const MinibatchInputs& in) {
  return minibatch_loss(m, in).loss.total;
}

}  // namespace

TEST(Variants, NamesRoundTrip) {
  for (Variant v : all_variants()) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_EQ(parse_variant("cmim"), Variant::cMIM);
  EXPECT_EQ(parse_variant("infonce_x"), Variant::InfoNCE_X);
  EXPECT_THROW(parse_variant("SimCLR"), ContractViolation);
  EXPECT_EQ(all_variants().size(), 9u);
}

TEST(ModelBundle, DecoderPresenceFollowsVariant) {
  for (Variant v : all_variants()) {
    const ModelBundle m = make(v);
    EXPECT_EQ(m.decoder.has_value(), has_decoder(v));
    EXPECT_EQ(m.encoder.output_dim(), 2 * kTiny.latent_dim);
  }
  EXPECT_FALSE(has_decoder(Variant::InfoNCE));
  EXPECT_FALSE(has_decoder(Variant::InfoNCE_X));
}

TEST(AmimLoss, FixedPointValue) {
  // q = prior, z = 0, perfectly saturated decoder: only the entropy bracket remains.
  const ModelDims dims{3, 1, {4}};
  ModelBundle m = make(Variant::MIM, dims);
  m.encoder.parameters().setZero();
  m.decoder->parameters().setZero();
  Matrix x(1, 3);
  x << 1, 0, 1;
  m.decoder->bias(m.decoder->num_layers() - 1) << 1e3, -1e3, 1e3;
  const ObjectiveResult r = amim_minibatch_loss(m, x, Matrix::Zero(1, 1));
  EXPECT_EQ(r.loss.recon, 0.0);
  EXPECT_NEAR(r.loss.latent_entropy_terms, 0.9189, 1e-4);
  EXPECT_NEAR(r.loss.total, 0.5 * std::log(2 * std::acos(-1.0)), 1e-14);
}

TEST(AmimLoss, CmimMinusMimIsContrastiveTerm) {
  const auto in = inputs(kTiny, 5, 3);
  ModelBundle cm = make(Variant::cMIM);
  ModelBundle mim = make(Variant::MIM);
  const ObjectiveResult a = minibatch_loss(cm, in);
  const ObjectiveResult b = minibatch_loss(mim, in);
  const Matrix z = encode(cm, in.x).mean +
                   (0.5 * encode(cm, in.x).log_var.array()).exp().matrix().cwiseProduct(in.noise);
  const double expected = cmim_latent_loss_and_grad({z, cm.sim}).mean_loss;
  EXPECT_NEAR(a.loss.total - b.loss.total, expected, 1e-12);
  EXPECT_NEAR(a.loss.contrastive, expected, 1e-12);
  EXPECT_EQ(b.loss.contrastive, 0.0);
  EXPECT_NEAR(a.loss.total, a.loss.recon + a.loss.contrastive + a.loss.latent_entropy_terms, 1e-12);
}

TEST(AmimLoss, ContrastiveVariantsRejectSingleSample) {
  const auto in = inputs(kTiny, 1, 4);
  EXPECT_THROW(minibatch_loss(make(Variant::cMIM), in), ContractViolation);
  EXPECT_THROW(minibatch_loss(make(Variant::InfoNCE), in), ContractViolation);
  EXPECT_NO_THROW(minibatch_loss(make(Variant::MIM), in));
  EXPECT_NO_THROW(minibatch_loss(make(Variant::AE), in));
}

TEST(AmimLoss, WrongEntryPointIsRejected) {
  const auto in = inputs(kTiny, 4, 5);
  EXPECT_THROW(amim_minibatch_loss(make(Variant::VAE), in.x, in.noise), ContractViolation);
  EXPECT_THROW(ae_minibatch_loss(make(Variant::cMIM), in.x), ContractViolation);
}

TEST(Kl, ClosedFormExamples) {
  EXPECT_EQ(kl_to_standard_normal(Vector::Zero(3), Vector::Zero(3)), 0.0);
  Vector mean(2);
  mean << 1, 0;
  EXPECT_DOUBLE_EQ(kl_to_standard_normal(mean, Vector::Zero(2)), 0.5);
}

TEST(VaeLoss, BetaIsInverseLatentDim) {
  const ModelDims d2{6, 2, {5}}, d4{6, 4, {5}};
  const ObjectiveResult a = minibatch_loss(make(Variant::VAE, d2), inputs(d2, 3, 6));
  const ObjectiveResult b = minibatch_loss(make(Variant::VAE, d4), inputs(d4, 3, 6));
  EXPECT_DOUBLE_EQ(a.loss.kl_weight, 0.5);
  EXPECT_DOUBLE_EQ(b.loss.kl_weight, 0.25);
  EXPECT_NEAR(a.loss.total, a.loss.recon + 0.5 * a.loss.kl, 1e-12);
}

TEST(VaeLoss, PriorPosteriorHasZeroKl) {
  ModelBundle m = make(Variant::VAE);
  m.encoder.parameters().setZero();
  const ObjectiveResult r = minibatch_loss(m, inputs(kTiny, 3, 7));
  EXPECT_EQ(r.loss.kl, 0.0);
}

TEST(AeLoss, ZeroLogitsGiveLogTwoPerDimension) {
  ModelBundle m = make(Variant::AE);
  m.decoder->parameters().setZero();
  Rng rng(8);
  Matrix x = (cmim::testing::uniform01(4, 6, rng).array() > 0.5).cast<double>().matrix();
  const ObjectiveResult r = ae_minibatch_loss(m, x);
  EXPECT_NEAR(r.loss.recon, 6 * std::log(2.0), 1e-14);
}

TEST(AeLoss, PerfectLogitsGiveZeroRecon) {
  ModelBundle m = make(Variant::AE);
  m.decoder->parameters().setZero();
  Matrix x(1, 6);
  x << 1, 0, 0, 1, 1, 0;
  auto bias = m.decoder->bias(m.decoder->num_layers() - 1);
  for (int d = 0; d < 6; ++d) bias[d] = x(0, d) > 0 ? 1e3 : -1e3;
  EXPECT_EQ(ae_minibatch_loss(m, x).loss.recon, 0.0);
}

TEST(AeLoss, CaeMinusAeIsContrastiveOnMeans) {
  const auto in = inputs(kTiny, 5, 9);
  const ModelBundle cae = make(Variant::cAE);
  const ModelBundle ae = make(Variant::AE);
  const double diff = minibatch_loss(cae, in).loss.total - minibatch_loss(ae, in).loss.total;
  const double expected = cmim_latent_loss_and_grad({encode(cae, in.x).mean, cae.sim}).mean_loss;
  EXPECT_NEAR(diff, expected, 1e-12);
}

TEST(InfoNceLoss, CollapsedEncoderGivesLogB) {
  ModelBundle m = make(Variant::InfoNCE, kTiny, 0.1);
  m.encoder.parameters().setZero();
  // Every input maps to the same mean.
  auto bias = m.encoder.bias(m.encoder.num_layers() - 1);
  bias << 1.0, 2.0, -50.0, -50.0;
  for (int b : {2, 8}) {
    auto in = inputs(kTiny, b, 10);
    in.noise.setZero();
    in.positive_noise.setZero();
    EXPECT_NEAR(minibatch_loss(m, in).loss.total, std::log(static_cast<double>(b)), 1e-12);
  }
}

TEST(InfoNceLoss, XVariantEqualsSumDenominatorLoss) {
  const ModelBundle m = make(Variant::InfoNCE_X);
  const auto in = inputs(kTiny, 6, 11);
  const EncodedBatch e = encode(m, in.x);
  const Matrix z = e.mean + (0.5 * e.log_var.array()).exp().matrix().cwiseProduct(in.noise);
  const double expected = cmim_sum_variant({z, m.sim}).mean();
  EXPECT_NEAR(minibatch_loss(m, in).loss.total, expected, 1e-12);
}

TEST(Gradients, AllVariantsMatchFiniteDifferences) {
  const auto in = inputs(kTiny, 4, 12);
  const double h = 1e-6;
  for (Variant v : all_variants()) {
    ModelBundle m = make(v);
    const ObjectiveResult r = minibatch_loss(m, in);
    const auto check = [&](Vector& params, const Vector& analytic, const char* which) {
      Vector num(params.size());
      for (Eigen::Index k = 0; k < params.size(); ++k) {
        const double keep = params[k];
        params[k] = keep + h;
        const double up = total_loss(m, in);
        params[k] = keep - h;
        const double down = total_loss(m, in);
        params[k] = keep;
        num[k] = (up - down) / (2 * h);
      }
      EXPECT_LT(rel_err(analytic, num), 1e-4) << variant_name(v) << " " << which;
    };
    check(m.encoder.parameters(), r.grads.encoder, "encoder");
    if (m.decoder) check(m.decoder->parameters(), r.grads.decoder, "decoder");
    else EXPECT_EQ(r.grads.decoder.size(), 0);
  }
}

TEST(Gradients, ClampedLogVarCarriesNoGradient) {
  ModelBundle m = make(Variant::MIM);
  // Push the raw log-variance far below the floor via the output bias.
  auto bias = m.encoder.bias(m.encoder.num_layers() - 1);
  bias[2] = -100.0;
  bias[3] = -100.0;
  const auto in = inputs(kTiny, 3, 13);
  const ObjectiveResult r = minibatch_loss(m, in);
  // The last layer's log-variance bias gradients must vanish.
  const Eigen::Index n = m.encoder.num_parameters();
  EXPECT_EQ(r.grads.encoder[n - 1], 0.0);
  EXPECT_EQ(r.grads.encoder[n - 2], 0.0);
  EXPECT_GE(encode(m, in.x).log_var.minCoeff(), kLogVarFloor);
}
