#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "oracles/oracles.hpp"
#include "ucha/neural.hpp"

using namespace ucha;
using namespace ucha::nn;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, rng::RandomStream& s) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng::sample_std_normal(s);
  }
  return m;
}

}  // namespace

TEST(Mlp, ShapesAndErrors) {
  Mlp net({4, 8, 3});
  EXPECT_EQ(net.input_dim(), 4u);
  EXPECT_EQ(net.output_dim(), 3u);
  EXPECT_EQ(net.num_params(), 4u * 8 + 8 + 8 * 3 + 3);
  EXPECT_EQ(net.dims(), (std::vector<std::size_t>{4, 8, 3}));
  EXPECT_THROW(Mlp({4}), std::invalid_argument);
  EXPECT_THROW(Mlp({4, 0, 2}), std::invalid_argument);
  EXPECT_THROW(net.forward(Matrix(Matrix::Zero(5, 2))), std::invalid_argument);
  EXPECT_THROW(net.forward(Vector(Vector::Zero(3))), std::invalid_argument);
}

TEST(Mlp, OrthogonalInit) {
  rng::RandomStream s(1);
  const auto net = Mlp::orthogonal({6, 10, 4}, 0.5, s);
  const auto& w0 = net.layers()[0].weight;  // 10 x 6, tall: columns orthogonal
  EXPECT_TRUE((w0.transpose() * w0).isApprox(2.0 * Matrix::Identity(6, 6), 1e-12));
  const auto& w1 = net.layers()[1].weight;  // 4 x 10, wide: rows orthogonal
  EXPECT_TRUE((w1 * w1.transpose()).isApprox(0.25 * Matrix::Identity(4, 4), 1e-12));
  EXPECT_TRUE(net.layers()[0].bias.isZero());
}

TEST(Mlp, BatchedForwardMatchesSingle) {
  rng::RandomStream s(2);
  const auto net = Mlp::orthogonal({5, 7, 7, 3}, 1.0, s);
  const Matrix x = random_matrix(5, 9, s);
  const Matrix y = net.forward(x);
  for (Eigen::Index b = 0; b < 9; ++b) {
    const Vector v = net.forward(Vector(x.col(b)));
    EXPECT_TRUE(v.isApprox(y.col(b), 1e-14));
  }
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
  rng::RandomStream s(3);
  for (int draw = 0; draw < 5; ++draw) {
    auto net = Mlp::orthogonal({4, 6, 5, 3}, 1.0, s);
    const Matrix x = random_matrix(4, 7, s);
    const Matrix w = random_matrix(3, 7, s);
    auto loss = [&] { return (net.forward(x).array() * w.array()).sum(); };
    ForwardCache cache;
    net.forward(x, &cache);
    Matrix dx;
    auto g = net.backward(cache, w, &dx);
    // Absolute floor 1e-3 * 1e-5: the loss is O(10), so round-off in the
    // difference quotient is around 1e-9.
    const auto res = oracle::check_gradient(net.blocks(), g.blocks(), loss, 64, s, 1e-6, 1e-3);
    EXPECT_LE(res.max_rel, 1e-5) << res.analytic_at_max << " vs " << res.numeric_at_max;

    // input gradient
    Matrix xm = x;
    auto loss_x = [&] { return (net.forward(xm).array() * w.array()).sum(); };
    for (int k = 0; k < 10; ++k) {
      const auto i = rng::sample_int(s, 0, 3);
      const auto j = rng::sample_int(s, 0, 6);
      const double fd = oracle::central_difference(loss_x, xm(i, j), 1e-6);
      EXPECT_LE(oracle::rel_err(dx(i, j), fd, 1e-3), 1e-5);
    }
  }
}

TEST(Adam, ClosedFormWithConstantGradient) {
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.max_grad_norm = 0.0;
  Adam opt(cfg);
  std::vector<double> p{1.0, -2.0};
  std::vector<double> g{0.3, -4.0};
  for (int k = 0; k < 3; ++k) {
    std::vector<double> gk = g;
    std::vector<Block> pb{{p.data(), 2}};
    std::vector<Block> gb{{gk.data(), 2}};
    opt.step(pb, gb);
  }
  // Bias correction makes every step lr * g / (|g| + eps).
  EXPECT_NEAR(p[0], 1.0 - 3 * 0.01 * 0.3 / (0.3 + 1e-8), 1e-12);
  EXPECT_NEAR(p[1], -2.0 + 3 * 0.01 * 4.0 / (4.0 + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps(), 3);
}

TEST(Adam, FirstStepMomentsAndClipping) {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.max_grad_norm = 1.0;
  Adam opt(cfg);
  std::vector<double> p{0.0, 0.0};
  std::vector<double> g{3.0, 4.0};
  std::vector<Block> pb{{p.data(), 2}};
  std::vector<Block> gb{{g.data(), 2}};
  const double norm = opt.step(pb, gb);
  EXPECT_DOUBLE_EQ(norm, 5.0);
  EXPECT_NEAR(g[0], 0.6, 1e-15);  // clipped in place to unit norm
  EXPECT_NEAR(opt.first_moment()[0][0], 0.1 * 0.6, 1e-15);
  EXPECT_NEAR(opt.second_moment()[0][1], 0.001 * 0.64, 1e-15);
  EXPECT_NEAR(p[0], -0.1 * 0.6 / (0.6 + 1e-8), 1e-12);

  std::vector<double> bad{1.0};
  std::vector<Block> gbad{{bad.data(), 1}};
  EXPECT_THROW(opt.step(pb, gbad), std::invalid_argument);
}

TEST(Distributions, SoftmaxAndLogSumExp) {
  Vector l(4);
  l << 1.0, 2.0, -3.0, 0.5;
  const Vector p = softmax(l);
  EXPECT_NEAR(p.sum(), 1.0, 1e-15);
  const Vector shifted = (l.array() + 123.0).matrix();
  EXPECT_TRUE(softmax(shifted).isApprox(p, 1e-14));
  EXPECT_NEAR(log_sum_exp(l), std::log(l.array().exp().sum()), 1e-14);
  EXPECT_TRUE(log_softmax(l).isApprox(Vector(p.array().log()), 1e-14));

  Vector big(3);
  big << 1e4, -1e4, 1e4;
  EXPECT_NEAR(log_sum_exp(big), 1e4 + std::log(2.0), 1e-9);
  const Vector pb = softmax(big);
  EXPECT_TRUE(pb.allFinite());
  EXPECT_NEAR(pb(0), 0.5, 1e-15);
  EXPECT_EQ(pb(1), 0.0);
}

TEST(Distributions, CategoricalSamplingFrequencies) {
  Vector l(3);
  l << std::log(0.2), std::log(0.5), std::log(0.3);
  rng::RandomStream s(4);
  std::vector<int> counts(3, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto draw = categorical_sample_logprob(l, s);
    ++counts[draw.index];
    ASSERT_NEAR(draw.log_prob, l(static_cast<Eigen::Index>(draw.index)), 1e-12);
  }
  EXPECT_NEAR(counts[0] / double(n), 0.2, 0.005);
  EXPECT_NEAR(counts[1] / double(n), 0.5, 0.005);
  EXPECT_NEAR(counts[2] / double(n), 0.3, 0.005);
  EXPECT_NEAR(categorical_entropy(l), -(0.2 * std::log(0.2) + 0.5 * std::log(0.5) + 0.3 * std::log(0.3)),
              1e-12);
}

TEST(Distributions, GaussianSampleAndLogProb) {
  Vector mean(2), log_std(2);
  mean << 1.0, -2.0;
  log_std << std::log(0.5), std::log(2.0);
  rng::RandomStream s(5);
  const int n = 200000;
  Vector sum = Vector::Zero(2), sq = Vector::Zero(2);
  for (int i = 0; i < n; ++i) {
    const auto d = gaussian_sample_logprob(mean, log_std, s);
    sum += d.raw;
    sq += d.raw.cwiseProduct(d.raw);
  }
  const Vector m = sum / n;
  const Vector var = sq / n - m.cwiseProduct(m);
  EXPECT_NEAR(m(0), 1.0, 0.01);
  EXPECT_NEAR(m(1), -2.0, 0.02);
  EXPECT_NEAR(var(0), 0.25, 0.005);
  EXPECT_NEAR(var(1), 4.0, 0.06);

  Vector x(2);
  x << 1.5, 0.0;
  const double want = -0.5 * (1.0 + 1.0) - std::log(0.5) - std::log(2.0) - std::log(2.0 * std::numbers::pi);
  EXPECT_NEAR(gaussian_log_prob(mean, log_std, x), want, 1e-12);
}
