#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles/oracles.hpp"
#include "ucha/channel.hpp"

using namespace ucha;
using channel::FadingParams;

TEST(Channel, LargeScaleReferenceValues) {
  FadingParams p;
  EXPECT_DOUBLE_EQ(channel::large_scale(1.0, p), 1e-3);
  EXPECT_NEAR(channel::large_scale(20.0, p), 2.5e-6, 1e-18);
  // Below the reference distance the loss is clamped at beta0.
  EXPECT_DOUBLE_EQ(channel::large_scale(0.5, p), 1e-3);
}

TEST(Channel, PureLineOfSightHasUnitMagnitude) {
  FadingParams p;
  p.rician_k = std::numeric_limits<double>::infinity();
  rng::RandomStream s(1);
  const auto before = s;
  for (int i = 0; i < 100; ++i) {
    const auto g = channel::small_scale(s, p);
    ASSERT_DOUBLE_EQ(std::abs(g), 1.0);
  }
  auto untouched = before;
  EXPECT_EQ(untouched.next(), s.next());
}

TEST(Channel, RayleighWhenKIsZero) {
  FadingParams p;
  p.rician_k = 0.0;
  rng::RandomStream s(2);
  std::vector<double> re, im;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const auto g = channel::small_scale(s, p);
    re.push_back(g.real());
    im.push_back(g.imag());
  }
  const auto est = oracle::estimate_k(re, im);
  EXPECT_LT(est.k, 0.01);
  EXPECT_NEAR(est.mean_power, 1.0, 0.01);
}

TEST(Channel, RicianKFactorAndPower) {
  FadingParams p;
  p.rician_k = 3.0;
  rng::RandomStream s(3);
  std::vector<double> re, im;
  const int n = 1000000;
  re.reserve(n);
  im.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto g = channel::small_scale(s, p);
    re.push_back(g.real());
    im.push_back(g.imag());
  }
  const auto est = oracle::estimate_k(re, im);
  EXPECT_NEAR(est.k, 3.0, 0.3);
  EXPECT_NEAR(est.mean_power, 1.0, 0.01);
}

TEST(Channel, MeanPowerScalesWithDistance) {
  FadingParams p;
  rng::RandomStream s(4);
  const std::vector<double> dist{5.0, 10.0};
  double near = 0.0, far = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto g = channel::draw_slot_gains(dist, 1, p, s);
    near += g.power(0, 0);
    far += g.power(1, 0);
  }
  // alpha = 2: doubling the distance quarters the mean power.
  EXPECT_NEAR(near / far, 4.0, 0.08);
  EXPECT_NEAR(near / n, channel::large_scale(5.0, p), 0.02 * channel::large_scale(5.0, p));
}

TEST(Channel, SlotGainsShapeAndErrors) {
  FadingParams p;
  rng::RandomStream s(5);
  const std::vector<double> dist{3.0, 4.0, 7.0};
  const auto g = channel::draw_slot_gains(dist, 2, p, s);
  EXPECT_EQ(g.num_vus(), 3u);
  EXPECT_EQ(g.num_channels(), 2u);
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t m = 0; m < 2; ++m) EXPECT_GT(g.power(n, m), 0.0);
  }
  EXPECT_THROW(channel::draw_slot_gains({}, 2, p, s), std::invalid_argument);
  EXPECT_THROW(channel::draw_slot_gains(dist, 0, p, s), std::invalid_argument);
}

TEST(Channel, ValidateRejectsBadParams) {
  FadingParams p;
  EXPECT_NO_THROW(p.validate());
  p.beta0 = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.alpha = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.rician_k = -0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.rician_k = std::numeric_limits<double>::infinity();
  EXPECT_NO_THROW(p.validate());
}
