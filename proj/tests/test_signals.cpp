#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qomor/errors.hpp"
#include "qomor/signals.hpp"

using namespace qomor;

TEST(Signals, AnalyticValues) {
  EXPECT_DOUBLE_EQ(SignalSpec::exp_decay(2.0, 0.25)(4.0), 2.0 * std::exp(-1.0));
  EXPECT_DOUBLE_EQ(SignalSpec::damped_quadratic(1.0, 0.2)(5.0), 25.0 * std::exp(-1.0));
  EXPECT_NEAR(SignalSpec::sin_plus_offset()(2.5), 2.0, 1e-15);
  EXPECT_EQ(SignalSpec::exp_decay()(-1.0), 0.0);
}

TEST(Signals, L2Flags) {
  EXPECT_FALSE(SignalSpec::sin_plus_offset().is_l2);
  EXPECT_FALSE(SignalSpec::sin_plus_offset().closed_form_l2sq);
  EXPECT_TRUE(SignalSpec::exp_decay().is_l2);
  EXPECT_TRUE(SignalSpec::damped_quadratic().closed_form_l2sq);
  EXPECT_FALSE(SignalSpec::custom({1.0, 2.0}, 0.5).closed_form_l2sq);
  EXPECT_THROW(signal_l2sq(SignalSpec::sin_plus_offset()), ValidationError);
  EXPECT_THROW(u_tensor_l2(SignalSpec::sin_plus_offset()), ValidationError);
}

TEST(Signals, ClosedFormsMatchQuadrature) {
  for (double rate : {0.1, 0.25, 1.0, 3.0}) {
    for (double amp : {0.5, 1.0, 2.0}) {
      for (const auto& u : {SignalSpec::exp_decay(amp, rate), SignalSpec::damped_quadratic(amp, rate)}) {
        const double exact = *u.closed_form_l2sq;
        EXPECT_NEAR(signal_quadrature(u, 2), exact, 1e-6 * exact) << u.label() << " " << rate;
      }
    }
  }
}

TEST(Signals, DampedQuadraticGammaIntegral) {
  const auto u = SignalSpec::damped_quadratic(1.0, 0.2);
  EXPECT_NEAR(*u.closed_form_l2sq, 24.0 * std::pow(2.5, 5), 1e-9);
  EXPECT_NEAR(u_tensor_l2(u), 2343.75, 1e-9);
}

TEST(Signals, TensorNormScalesWithInputCount) {
  const auto u = SignalSpec::exp_decay(1.0, 0.25);
  EXPECT_NEAR(u_tensor_l2(u, 1), 2.0, 1e-12);
  EXPECT_NEAR(u_tensor_l2(u, 3), 6.0, 1e-12);
  EXPECT_THROW(u_tensor_l2(u, 0), ValidationError);
}

TEST(Signals, SquaredSignalNorm) {
  // int e^{-t} = 1 and int t^8 e^{-4t/5} = 8! (5/4)^9.
  EXPECT_NEAR(u_squared_l2(SignalSpec::exp_decay(1.0, 0.25)), 1.0, 1e-9);
  const double ref = std::sqrt(40320.0 * std::pow(1.25, 9));
  EXPECT_NEAR(u_squared_l2(SignalSpec::damped_quadratic(1.0, 0.2)), ref, 1e-6 * ref);
}

TEST(Signals, FiniteHorizon) {
  const auto u = SignalSpec::exp_decay(1.0, 0.25);
  EXPECT_NEAR(signal_l2sq(u, 4.0), 2.0 * (1 - std::exp(-2.0)), 1e-9);
}

TEST(Signals, CustomInterpolationAndTail) {
  const auto u = SignalSpec::custom({0.0, 1.0, 2.0}, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(u(0.5), 0.5);
  EXPECT_DOUBLE_EQ(u(2.0), 2.0);
  EXPECT_NEAR(u(3.0), 2.0 * std::exp(-0.5), 1e-15);
  // int_0^2 t^2 = 8/3 plus the tail 4 / (2 * 0.5).
  EXPECT_NEAR(signal_l2sq(u), 8.0 / 3.0 + 4.0, 1e-9);
  const auto cut = SignalSpec::custom({1.0, 1.0}, 2.0);
  EXPECT_EQ(cut(2.5), 0.0);
  EXPECT_NEAR(signal_l2sq(cut), 2.0, 1e-12);
}

TEST(Signals, CustomValidation) {
  EXPECT_THROW(SignalSpec::custom({}, 1.0), ValidationError);
  EXPECT_THROW(SignalSpec::custom({1.0}, 0.0), ValidationError);
  EXPECT_THROW(SignalSpec::custom({1.0}, 1.0, -1.0), ValidationError);
  EXPECT_THROW(SignalSpec::custom({std::nan("")}, 1.0), ValidationError);
}

TEST(Signals, WhiteNoiseIsSeeded) {
  const auto a = SignalSpec::white_noise(7, 0.01, 10.0);
  const auto b = SignalSpec::white_noise(7, 0.01, 10.0);
  const auto c = SignalSpec::white_noise(8, 0.01, 10.0);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  EXPECT_EQ(a.samples.size(), 1001u);
  EXPECT_EQ(a.kind, SignalKind::white_noise_sampled);
  double mean = 0;
  for (double x : a.samples) mean += x;
  EXPECT_LT(std::abs(mean / a.samples.size()), 0.15);
}

TEST(Signals, ParseSpecifications) {
  const auto a = parse_signal("exp_decay");
  EXPECT_EQ(a.kind, SignalKind::exp_decay);
  EXPECT_DOUBLE_EQ(a.rate, 0.25);
  const auto b = parse_signal("damped_quadratic:amplitude=2,rate=0.5");
  EXPECT_DOUBLE_EQ(b.amplitude, 2.0);
  EXPECT_DOUBLE_EQ(b.rate, 0.5);
  const auto c = parse_signal("sin_plus_offset:period=4");
  EXPECT_DOUBLE_EQ(c.period, 4.0);
  EXPECT_FALSE(c.is_l2);
  const auto d = parse_signal("white_noise:seed=3,dt=0.1,duration=2");
  EXPECT_EQ(d.samples.size(), 21u);
  EXPECT_EQ(d.samples, SignalSpec::white_noise(3, 0.1, 2.0).samples);
}

TEST(Signals, ParseRejectsMalformed) {
  EXPECT_THROW(parse_signal("square_wave"), ValidationError);
  EXPECT_THROW(parse_signal("exp_decay:rate"), ValidationError);
  EXPECT_THROW(parse_signal("exp_decay:rate=abc"), ValidationError);
  EXPECT_THROW(parse_signal("exp_decay:period=2"), ValidationError);
  EXPECT_THROW(parse_signal("exp_decay:rate=-1"), ValidationError);
  EXPECT_THROW(parse_signal("white_noise:seed=1.5"), ValidationError);
}
