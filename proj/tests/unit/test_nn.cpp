#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "cmim/nn.hpp"
#include "test_support.hpp"

using namespace cmim;
using cmim::testing::randn;
using cmim::testing::rel_err;

TEST(DenseNet, IdentityLayerPassesInputThrough) {
  DenseNet net({{3, 3, Activation::identity}});
  net.parameters().setZero();
  net.weight(0) = RowMatrix::Identity(3, 3);
  Matrix x(2, 3);
  x << 1, -2, 3, 0.5, 0, -7;
  EXPECT_EQ(forward(net, x), x);
}

TEST(DenseNet, ZeroWeightsEmitActivatedBias) {
  DenseNet net({{4, 2, Activation::tanh}});
  net.parameters().setZero();
  net.bias(0) << 0.3, -2.0;
  const Matrix out = forward(net, Matrix::Ones(3, 4));
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(out(i, 0), std::tanh(0.3));
    EXPECT_DOUBLE_EQ(out(i, 1), std::tanh(-2.0));
  }
}

TEST(DenseNet, ForwardIsDeterministicAndInitIsSeeded) {
  const std::vector<int> hidden{5, 4};
  DenseNet a = DenseNet::mlp(3, hidden, 2), b = DenseNet::mlp(3, hidden, 2);
  Rng r1(7), r2(7);
  a.init_glorot(r1);
  b.init_glorot(r2);
  EXPECT_EQ(a.parameters(), b.parameters());
  Rng rng(1);
  const Matrix x = randn(6, 3, rng);
  EXPECT_EQ(forward(a, x), forward(a, x));
  const double bound = std::sqrt(6.0 / (3 + 5));
  EXPECT_LE(a.weight(0).cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(a.bias(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(a.num_parameters(), 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
}

TEST(DenseNet, RejectsWrongInputWidth) {
  const std::vector<int> hidden{4};
  DenseNet net = DenseNet::mlp(3, hidden, 2);
  EXPECT_ANY_THROW(forward(net, Matrix::Ones(2, 5)));
}

TEST(Backward, LinearNetClosedForm) {
  DenseNet net({{3, 2, Activation::identity}});
  Rng rng(2);
  net.init_glorot(rng);
  net.bias(0) << 0.1, -0.4;
  Vector x(3);
  x << 0.5, -1.0, 2.0;
  ForwardTape tape;
  const Matrix out = forward(net, x.transpose(), &tape);
  const NetGradients g = backward(net, tape, out);  // loss = 1/2 |out|^2
  const Matrix w = net.weight(0);
  const Vector expected = w.transpose() * (w * x + Vector(net.bias(0)));
  EXPECT_LT((g.input.row(0).transpose() - expected).norm(), 1e-14);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const std::vector<int> hidden{4, 4};
  DenseNet net = DenseNet::mlp(3, hidden, 2);
  Rng rng(3);
  net.init_glorot(rng);
  ForwardTape tape;
  forward(net, randn(5, 3, rng), &tape);
  const NetGradients g = backward(net, tape, Matrix::Zero(5, 2));
  EXPECT_EQ(g.params.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.input.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(4);
  for (Activation act : {Activation::tanh, Activation::identity}) {
    const std::vector<int> hidden{6, 5};
    DenseNet net = DenseNet::mlp(4, hidden, 3, act, Activation::tanh);
    net.init_glorot(rng);
    net.parameters() += 0.1 * randn(net.num_parameters(), 1, rng);
    const Matrix x = randn(3, 4, rng);
    const Matrix up = randn(3, 3, rng);
    ForwardTape tape;
    forward(net, x, &tape);
    const NetGradients g = backward(net, tape, up);

    const double h = 1e-5;
    Vector num(net.num_parameters());
    for (Eigen::Index k = 0; k < net.num_parameters(); ++k) {
      const double keep = net.parameters()[k];
      net.parameters()[k] = keep + h;
      const double fp = forward(net, x).cwiseProduct(up).sum();
      net.parameters()[k] = keep - h;
      const double fm = forward(net, x).cwiseProduct(up).sum();
      net.parameters()[k] = keep;
      num[k] = (fp - fm) / (2 * h);
    }
    EXPECT_LT(rel_err(g.params, num), 1e-5);
    const Matrix num_x = cmim::testing::numeric_gradient(
        x, [&](const Matrix& m) { return forward(net, m).cwiseProduct(up).sum(); });
    EXPECT_LT(rel_err(g.input, num_x), 1e-5);
  }
}

TEST(Backward, ReluGradientAwayFromKinks) {
  Rng rng(5);
  const std::vector<int> hidden{8};
  DenseNet net = DenseNet::mlp(3, hidden, 2, Activation::relu);
  net.init_glorot(rng);
  net.bias(0).setConstant(0.05);
  const Matrix x = randn(4, 3, rng);
  const Matrix up = randn(4, 2, rng);
  ForwardTape tape;
  forward(net, x, &tape);
  const NetGradients g = backward(net, tape, up);
  const Matrix num_x = cmim::testing::numeric_gradient(
      x, [&](const Matrix& m) { return forward(net, m).cwiseProduct(up).sum(); }, 1e-7);
  EXPECT_LT(rel_err(g.input, num_x), 1e-5);
}

TEST(Gaussian, StandardNormalAtZero) {
  const GaussianPosterior p{Vector::Zero(1), Vector::Zero(1)};
  EXPECT_NEAR(gaussian_logprob(p, Vector::Zero(1)), -0.5 * std::log(2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(gaussian_logprob(p, Vector::Zero(1)), -0.9189, 1e-4);
  EXPECT_NEAR(standard_normal_logprob(Vector::Zero(1)), -0.9189, 1e-4);
}

TEST(Gaussian, MeanEqualsPointDropsQuadratic) {
  Vector mean(3), lv(3);
  mean << 1, -2, 0.5;
  lv << 0.3, -1.0, 2.0;
  const GaussianPosterior p{mean, lv};
  EXPECT_NEAR(gaussian_logprob(p, mean), -0.5 * (3 * std::log(2 * std::numbers::pi) + lv.sum()),
              1e-14);
}

TEST(Gaussian, LogDensityMatchesTrapezoidNormalisation) {
  Vector mean(1), lv(1);
  mean << 0.7;
  lv << std::log(0.4);
  const GaussianPosterior p{mean, lv};
  const double lo = -10.0, hi = 10.0;
  const int n = 200000;
  const double dx = (hi - lo) / n;
  const auto unnorm = [&](double z) {
    return std::exp(-(z - 0.7) * (z - 0.7) / (2 * 0.4));
  };
  double area = 0.5 * (unnorm(lo) + unnorm(hi));
  for (int i = 1; i < n; ++i) area += unnorm(lo + i * dx);
  area *= dx;
  for (double z : {-1.0, 0.0, 0.7, 2.5}) {
    Vector zz(1);
    zz << z;
    EXPECT_NEAR(gaussian_logprob(p, zz), std::log(unnorm(z) / area), 1e-6);
  }
}

TEST(Gaussian, ClampFloorIsApplied) {
  const GaussianPosterior p = GaussianPosterior::from_raw(Vector::Zero(2), Vector::Constant(2, -50));
  EXPECT_DOUBLE_EQ(p.log_var[0], std::log(1e-6));
  const Vector z = reparameterized_sample(p, Vector::Ones(2));
  EXPECT_NEAR(z[0], 1e-3, 1e-15);
  // An unclamped posterior passed directly still evaluates at the floor.
  const GaussianPosterior raw{Vector::Zero(1), Vector::Constant(1, -50)};
  const GaussianPosterior floor{Vector::Zero(1), Vector::Constant(1, std::log(1e-6))};
  EXPECT_DOUBLE_EQ(gaussian_logprob(raw, Vector::Constant(1, 1e-3)),
                   gaussian_logprob(floor, Vector::Constant(1, 1e-3)));
}

TEST(Gaussian, ReparameterisedSamplesHaveRightMoments) {
  Vector mean(2), lv(2);
  mean << 1.5, -0.5;
  lv << std::log(0.25), std::log(4.0);
  const GaussianPosterior p{mean, lv};
  EXPECT_EQ(reparameterized_sample(p, Vector::Zero(2)), mean);
  Rng rng(6);
  std::normal_distribution<double> n;
  const int count = 100000;
  Vector sum = Vector::Zero(2), sq = Vector::Zero(2);
  for (int i = 0; i < count; ++i) {
    Vector e(2);
    e << n(rng), n(rng);
    const Vector z = reparameterized_sample(p, e);
    sum += z;
    sq += z.cwiseProduct(z);
  }
  const Vector m = sum / count;
  const Vector var = sq / count - m.cwiseProduct(m);
  const Vector true_var = lv.array().exp();
  for (int d = 0; d < 2; ++d) {
    EXPECT_NEAR(m[d], mean[d], 3 * std::sqrt(true_var[d] / count));
    EXPECT_NEAR(var[d], true_var[d], 3 * true_var[d] * std::sqrt(2.0 / count));
  }
}

TEST(Bernoulli, Examples) {
  EXPECT_NEAR(bernoulli_logprob({Vector::Zero(1)}, Vector::Ones(1)), std::log(0.5), 1e-15);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(bernoulli_logprob({Vector::Constant(1, inf)}, Vector::Ones(1)), 0.0);
  EXPECT_NEAR(bernoulli_logprob({Vector::Constant(1, 800.0)}, Vector::Ones(1)), 0.0, 1e-300);
}

TEST(Bernoulli, MatchesNaiveForm) {
  Rng rng(8);
  const Vector l = randn(50, 1, rng, 4.0);
  const Vector x = cmim::testing::uniform01(50, 1, rng);
  double naive = 0.0;
  for (int d = 0; d < 50; ++d) {
    const double s = 1.0 / (1.0 + std::exp(-l[d]));
    naive += x[d] * std::log(s) + (1 - x[d]) * std::log(1 - s);
  }
  EXPECT_NEAR(bernoulli_logprob({l}, x), naive, 1e-12);
}

TEST(Adam, ZeroGradientAndZeroMultiplierLeaveParamsUnchanged) {
  Vector p(3);
  p << 1, 2, 3;
  const Vector keep = p;
  AdamState a(3, {});
  a.step(p, Vector::Zero(3), 1.0);
  EXPECT_EQ(p, keep);
  AdamState b(3, {});
  b.step(p, Vector::Constant(3, 5.0), 0.0);
  EXPECT_EQ(p, keep);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector p = Vector::Zero(3);
  Vector g(3);
  g << 2.0, -0.3, 1e3;
  AdamState a(3, {0.01, 0.9, 0.999, 1e-8});
  a.step(p, g, 1.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], -0.01 * (g[i] > 0 ? 1 : -1), 1e-8);
  EXPECT_EQ(a.steps_taken(), 1);
}

TEST(Adam, RejectsNonFiniteGradientWithoutTouchingParams) {
  Vector p = Vector::Ones(2);
  Vector g(2);
  g << 1.0, std::nan("");
  AdamState a(2, {});
  EXPECT_THROW(a.step(p, g, 1.0), DivergenceError);
  EXPECT_EQ(p, Vector::Ones(2));
}

TEST(Wsd, ReferencePoints) {
  const WsdSchedule s{1000};
  EXPECT_EQ(s.multiplier(0), 0.0);
  EXPECT_DOUBLE_EQ(s.multiplier(50), 0.5);
  EXPECT_EQ(s.multiplier(100), 1.0);
  EXPECT_EQ(s.multiplier(500), 1.0);
  EXPECT_EQ(s.multiplier(900), 1.0);
  EXPECT_DOUBLE_EQ(s.multiplier(950), 0.5);
  EXPECT_EQ(s.multiplier(1000), 0.0);
  EXPECT_THROW(s.multiplier(-1), ContractViolation);
  EXPECT_THROW(s.multiplier(1001), ContractViolation);
}

TEST(Wsd, AlwaysInUnitInterval) {
  for (long total : {1L, 7L, 100L, 12345L}) {
    const WsdSchedule s{total};
    for (long k = 0; k <= total; k += std::max(1L, total / 97)) {
      const double m = s.multiplier(k);
      EXPECT_GE(m, 0.0);
      EXPECT_LE(m, 1.0);
    }
  }
}
