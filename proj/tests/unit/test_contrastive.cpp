#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cmim/contrastive.hpp"
#include "cmim/toy2d.hpp"
#include "test_support.hpp"

using namespace cmim;
using cmim::testing::numeric_gradient;
using cmim::testing::randn;
using cmim::testing::rel_err;

namespace {

// Reference per-anchor loss straight from the probability definition.
double naive_anchor_loss(const Matrix& s, Eigen::Index i) {
  long double neg = 0.0L;
  for (Eigen::Index j = 0; j < s.cols(); ++j)
    if (j != i) neg += std::exp(static_cast<long double>(s(i, j)));
  neg /= static_cast<long double>(s.cols() - 1);
  const long double pos = std::exp(static_cast<long double>(s(i, i)));
  return static_cast<double>(-std::log(pos / (pos + neg)));
}

double mean_loss_of(const Matrix& z, double tau, NegativeAggregate agg = NegativeAggregate::mean) {
  const Matrix s = similarity_logits(z, z, tau);
  return cmim_logit_loss_and_grad(s, agg).loss.mean();
}

}  // namespace

TEST(CmimProbability, TwoSampleExample) {
  Matrix s(2, 2);
  s << 2, 0, 0, 2;
  const AnchorLossGrad r = cmim_logit_loss_and_grad(s);
  EXPECT_NEAR(sigmoid(2.0), 0.8808, 1e-4);
  EXPECT_NEAR(r.loss[0], -std::log(sigmoid(2.0)), 1e-15);
  EXPECT_NEAR(r.loss[0], 0.1269, 1e-4);
  EXPECT_NEAR(r.loss[1], r.loss[0], 1e-15);
}

TEST(CmimProbability, ThreeSampleExample) {
  Matrix s(3, 3);
  s << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const AnchorLossGrad r = cmim_logit_loss_and_grad(s);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::exp(-r.loss[i]), 0.7311, 1e-4);
}

TEST(CmimProbability, EqualLogitsGiveHalfAndUniformWeights) {
  const int b = 6;
  const Matrix s = Matrix::Constant(b, b, 0.3);
  const AnchorLossGrad r = cmim_logit_loss_and_grad(s);
  for (int i = 0; i < b; ++i) {
    EXPECT_NEAR(r.loss[i], std::log(2.0), 1e-15);
    EXPECT_NEAR(r.grad(i, i), -0.5, 1e-15);
    for (int j = 0; j < b; ++j)
      if (j != i) EXPECT_NEAR(r.grad(i, j), 0.5 / (b - 1), 1e-15);
  }
}

TEST(CmimProbability, MatchesNaiveDefinitionOnRandomLogits) {
  Rng rng(3);
  for (int b : {2, 3, 10, 50}) {
    const Matrix s = randn(b, b, rng, 3.0);
    const AnchorLossGrad r = cmim_logit_loss_and_grad(s);
    for (int i = 0; i < b; ++i) EXPECT_NEAR(r.loss[i], naive_anchor_loss(s, i), 1e-12);
  }
}

TEST(CmimProbability, ExtremeLogitsStayFinite) {
  Matrix s = Matrix::Constant(4, 4, -500.0);
  s.diagonal().setConstant(500.0);
  AnchorLossGrad r = cmim_logit_loss_and_grad(s);
  EXPECT_TRUE(r.loss.allFinite());
  EXPECT_TRUE(r.grad.allFinite());
  EXPECT_LT(r.loss.maxCoeff(), 1e-300);
  s = -s;
  r = cmim_logit_loss_and_grad(s);
  EXPECT_TRUE(r.loss.allFinite());
  EXPECT_NEAR(r.loss[0], 1000.0, 1e-9);
}

TEST(CmimGradient, RowStructureAndZeroSum) {
  Rng rng(17);
  const Matrix s = randn(7, 7, rng, 2.0);
  const AnchorLossGrad r = cmim_logit_loss_and_grad(s);
  for (int i = 0; i < 7; ++i) {
    const double p = std::exp(-r.loss[i]);
    EXPECT_NEAR(r.grad(i, i), p - 1.0, 1e-14);
    EXPECT_NEAR(r.grad.row(i).sum(), 0.0, 1e-14);
    double neg = 0.0;
    for (int j = 0; j < 7; ++j)
      if (j != i) {
        EXPECT_GE(r.grad(i, j), 0.0);
        neg += r.grad(i, j);
      }
    EXPECT_NEAR(neg, 1.0 - p, 1e-14);
  }
}

TEST(CmimGradient, LogitGradientMatchesFiniteDifferences) {
  Rng rng(21);
  for (int b : {2, 5, 12}) {
    const Matrix s = randn(b, b, rng, 2.0);
    const Matrix analytic = cmim_logit_loss_and_grad(s).grad;
    const Matrix numeric = numeric_gradient(s, [](const Matrix& m) {
      return cmim_logit_loss_and_grad(m).loss.sum();
    });
    EXPECT_LT(rel_err(analytic, numeric), 1e-7) << "B=" << b;
  }
}

TEST(CmimGradient, LatentGradientMatchesFiniteDifferences) {
  Rng rng(23);
  for (double tau : {0.1, 1.0}) {
    for (auto agg : {NegativeAggregate::mean, NegativeAggregate::sum}) {
      const Matrix z = randn(6, 4, rng);
      const LossAndLatentGrad g = cmim_latent_loss_and_grad({z, SimilarityConfig(tau)}, agg);
      const Matrix numeric =
          numeric_gradient(z, [&](const Matrix& m) { return mean_loss_of(m, tau, agg); }, 1e-6);
      EXPECT_LT(rel_err(g.latent_grad, numeric), 1e-6) << "tau=" << tau;
    }
  }
}

TEST(CmimGradient, DiagnosticsAgreeWithKernel) {
  Rng rng(29);
  const Matrix z = randn(9, 5, rng);
  const ContrastiveBatch batch{z, SimilarityConfig(0.5)};
  const ContrastiveDiagnostics d = cmim_diagnostics(batch);
  const AnchorLossGrad r = cmim_logit_loss_and_grad(d.logits);
  EXPECT_LT((d.loss - r.loss).cwiseAbs().maxCoeff(), 1e-14);
  for (int i = 0; i < 9; ++i) {
    EXPECT_NEAR(d.neg_weights.row(i).sum(), 1.0, 1e-14);
    EXPECT_EQ(d.neg_weights(i, i), 0.0);
    EXPECT_NEAR(d.p_match[i], std::exp(-d.loss[i]), 1e-14);
    // self-similarity of a sampled code is exactly one
    EXPECT_NEAR(d.logits(i, i), 2.0, 1e-14);
  }
  const LossAndLogitGrad lg = cmim_loss_and_grad(batch);
  EXPECT_NEAR(lg.mean_loss, d.loss.mean(), 1e-15);
  EXPECT_LT((lg.logit_grad * 9.0 - r.grad).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CmimLoss, PermutationEquivariant) {
  Rng rng(31);
  const Matrix z = randn(8, 3, rng);
  std::vector<int> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix zp(8, 3);
  for (int i = 0; i < 8; ++i) zp.row(i) = z.row(perm[static_cast<std::size_t>(i)]);
  const auto a = cmim_latent_loss_and_grad({z, SimilarityConfig(0.3)});
  const auto b = cmim_latent_loss_and_grad({zp, SimilarityConfig(0.3)});
  EXPECT_NEAR(a.mean_loss, b.mean_loss, 1e-14);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(b.anchor_loss[i], a.anchor_loss[perm[static_cast<std::size_t>(i)]], 1e-14);
    EXPECT_LT((b.latent_grad.row(i) - a.latent_grad.row(perm[static_cast<std::size_t>(i)]))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-14);
  }
}

TEST(CmimLoss, ScaleInvariantInLatents) {
  Rng rng(37);
  const Matrix z = randn(5, 4, rng);
  EXPECT_NEAR(mean_loss_of(z, 0.7), mean_loss_of(3.5 * z, 0.7), 1e-13);
}

TEST(CmimLoss, RejectsSmallBatchAndZeroRows) {
  EXPECT_THROW(cmim_latent_loss_and_grad({Matrix::Ones(1, 3), SimilarityConfig(1.0)}),
               ContractViolation);
  Matrix z = Matrix::Ones(3, 2);
  z.row(1).setZero();
  EXPECT_THROW(cmim_latent_loss_and_grad({z, SimilarityConfig(1.0)}), DomainError);
  EXPECT_THROW(cmim_logit_loss_and_grad(Matrix::Zero(2, 3)), ContractViolation);
}

TEST(InfoNce, Examples) {
  const std::vector<double> two{1, -1};
  EXPECT_NEAR(infonce_loss(two), std::log(1 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(infonce_loss(two), 0.1269, 1e-4);
  const std::vector<double> flat(5, 0.4);
  EXPECT_NEAR(infonce_loss(flat), std::log(5.0), 1e-14);
  EXPECT_THROW(infonce_loss(std::vector<double>{1.0}), ContractViolation);
}

TEST(OffsetEquivalence, HoldsForRandomBatches) {
  Rng rng(41);
  for (int b : {2, 3, 16, 100}) {
    for (double tau : {0.05, 0.1, 1.0, 5.0}) {
      const ContrastiveBatch batch{randn(b, 6, rng), SimilarityConfig(tau)};
      EXPECT_LT(offset_equivalence(batch), 1e-12) << b << " " << tau;
      EXPECT_LT(sum_equivalence(batch), 1e-12);
    }
  }
}

TEST(OffsetEquivalence, WrongOffsetIsDetected) {
  Rng rng(43);
  const ContrastiveBatch batch{randn(16, 6, rng), SimilarityConfig(1.0)};
  EXPECT_GT(offset_equivalence(batch, PositiveOffset::log_batch), 1e-3);
}

TEST(OffsetEquivalence, SumVariantIsLargerThanMeanVariant) {
  Rng rng(47);
  const ContrastiveBatch batch{randn(10, 4, rng), SimilarityConfig(0.5)};
  const Vector sum = cmim_sum_variant(batch);
  const Vector mean = cmim_diagnostics(batch).loss;
  for (int i = 0; i < 10; ++i) EXPECT_GT(sum[i], mean[i]);
}

TEST(InfoNceLatent, CollapsedCodesGiveLogB) {
  for (int b : {2, 7, 64}) {
    const Matrix z = Matrix::Ones(b, 3);
    const auto r = infonce_latent_loss_and_grad(z, z, SimilarityConfig(0.2), nullptr);
    EXPECT_NEAR(r.mean_loss, std::log(static_cast<double>(b)), 1e-12);
  }
}

TEST(InfoNceLatent, GradientsMatchFiniteDifferences) {
  Rng rng(53);
  const Matrix a = randn(5, 3, rng), p = randn(5, 3, rng);
  const SimilarityConfig cfg(0.4);
  Matrix pg;
  const auto r = infonce_latent_loss_and_grad(a, p, cfg, &pg);
  const Matrix na = numeric_gradient(a, [&](const Matrix& m) {
    return infonce_latent_loss_and_grad(m, p, cfg, nullptr).mean_loss;
  }, 1e-6);
  const Matrix np = numeric_gradient(p, [&](const Matrix& m) {
    return infonce_latent_loss_and_grad(a, m, cfg, nullptr).mean_loss;
  }, 1e-6);
  EXPECT_LT(rel_err(r.latent_grad, na), 1e-6);
  EXPECT_LT(rel_err(pg, np), 1e-6);
}

TEST(ToyStepper, MatchesGenericKernel) {
  Rng rng(59);
  for (double tau : {0.5, 1.0}) {
    const Matrix z = randn(40, 2, rng);
    ToyStepper stepper(tau);
    Matrix grad;
    const double loss = stepper.loss_and_grad(z, grad);
    const auto ref = cmim_latent_loss_and_grad({z, SimilarityConfig(tau)});
    EXPECT_NEAR(loss, ref.mean_loss, 1e-12);
    EXPECT_LT(rel_err(grad, ref.latent_grad), 1e-11);
  }
}
