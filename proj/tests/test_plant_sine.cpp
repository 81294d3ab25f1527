#include <cmath>

#include <gtest/gtest.h>

#include "monest/analysis.hpp"
#include "monest/plant_sine.hpp"

namespace monest {
namespace {

Vector xy(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

TEST(SineScenario, RejectsTruthOutsideBox) {
  EXPECT_THROW(build_sine_scenario(1.5, xy(-3, 0), 1.0), ModelFault);
  EXPECT_THROW(build_sine_scenario(0.5, xy(-3, 0), 1.0), ModelFault);
}

TEST(SineScenario, AtlasGeometry) {
  const auto sc = build_sine_scenario(1.0, xy(-3, 0), 1.0);
  ASSERT_EQ(sc.atlas.balls.size(), 2u);
  EXPECT_NEAR(sc.atlas.balls[0].center[0], -2.985, 1e-15);
  EXPECT_NEAR(sc.atlas.balls[0].radius, 0.395, 1e-15);
  EXPECT_NEAR(sc.atlas.balls[0].inner_radius, 0.09875, 1e-15);
  EXPECT_NEAR(sc.atlas.balls[1].center[0], 2.985, 1e-15);
  EXPECT_EQ(sc.target, 0);
  EXPECT_EQ(build_sine_scenario(1.0, xy(2, 0), 1.0).target, 1);
}

TEST(SineRun, ConvergesFromBallCentre) {
  SineOptions o;
  o.theta_hat0 = 0.6;
  const auto sc = build_sine_scenario(1.0, xy(-2.985, 0.05), 50.0, o);
  const auto run = simulate_sine(sc);
  EXPECT_TRUE(run.toggles.empty());
  EXPECT_LT(std::abs(run.theta_hat.back() - 1.0), 1e-2);
  EXPECT_LT(std::abs(run.psi.back()), 1e-3);
  for (int a : run.active) EXPECT_EQ(a, 0);
}

TEST(SineRun, MatchedStartStaysMatched) {
  SineOptions o;
  o.theta_hat0 = 1.0;
  const auto sc = build_sine_scenario(1.0, xy(-2.985, 0.05), 10.0, o);
  const auto run = simulate_sine(sc);
  for (double th : run.theta_hat) EXPECT_NEAR(th, 1.0, 1e-9);
  for (std::size_t k = 0; k < run.t.size(); k += 500)
    EXPECT_NEAR(run.psi[k], run.psi[0] * std::exp(-run.t[k]), 1e-8);
}

TEST(SineRun, SteersThenIdentifiesFromFarStart) {
  SineOptions o;
  const auto sc = build_sine_scenario(1.2, xy(-1.0, 1.0), 60.0, o);
  const auto run = simulate_sine(sc);
  EXPECT_EQ(run.active.front(), -1);
  ASSERT_FALSE(run.toggles.empty());
  EXPECT_TRUE(run.toggles.front().on);
  EXPECT_EQ(run.toggles.front().ball, 0);
  // estimate held while steering
  for (std::size_t k = 0; k < run.t.size() && run.active[k] == -1; ++k)
    EXPECT_NEAR(run.theta_hat[k], 0.6, 1e-12);
  for (const auto& tg : run.toggles) EXPECT_LT(tg.jump, 1e-9);
  EXPECT_LT(std::abs(run.theta_hat.back() - 1.2), 2e-2);
}

TEST(SineRun, KicksProduceContinuousReentries) {
  SineOptions o;
  o.kick_amplitude = 15.0;
  o.kick_period = 20.0;
  o.kick_delay = 10.0;
  const auto sc = build_sine_scenario(0.8, xy(-2.985, 0.0), 60.0, o);
  const auto run = simulate_sine(sc);
  int offs = 0;
  for (const auto& tg : run.toggles) {
    EXPECT_LT(tg.jump, 1e-9);
    if (!tg.on) ++offs;
  }
  EXPECT_GE(offs, 1);
}

TEST(SineRun, PerformanceBoundsAndEnvelopeHold) {
  SineOptions o;
  o.theta_hat0 = 0.7;
  const Vector x0 = xy(-2.95, 0.02);
  const auto sc = build_sine_scenario(1.3, x0, 30.0, o);
  const auto run = simulate_sine(sc);
  ASSERT_TRUE(run.toggles.empty());
  const Vector err0 = Vector::Constant(1, 0.7 - 1.3);
  auto b = performance_bounds(sc.phi, run.psi.front(), err0, sc.Gamma, 1.0);
  observe_performance(b, sc.phi, run.t, run.psi, run.psi_dot);
  EXPECT_TRUE(b.satisfied());
  const auto env = check_envelope(run.t, run.psi, o.K, 1.0, sc.Gamma, err0);
  EXPECT_EQ(env.violations, 0u);
}

TEST(SineRun, LyapunovNonIncreasingWhileIdentifying) {
  SineOptions o;
  o.theta_hat0 = 0.6;
  const auto sc = build_sine_scenario(1.4, xy(-2.985, 0.0), 40.0, o);
  const auto run = simulate_sine(sc);
  std::vector<Vector> th, tr;
  for (double v : run.theta_hat) th.push_back(Vector::Constant(1, v));
  tr.assign(th.size(), Vector::Constant(1, 1.4));
  const ParameterBox om{Vector::Constant(1, 0.6), Vector::Constant(1, 1.4 + 1e-9)};
  const auto r = lyapunov_monitor(run.t, th, tr, sc.Gamma, om);
  EXPECT_LE(r.max_increase, 1e-12);
  EXPECT_FALSE(r.exit_omega);
}

TEST(SineRun, Deterministic) {
  const auto sc = build_sine_scenario(0.9, xy(-2.0, 0.3), 20.0);
  const auto a = simulate_sine(sc);
  const auto b = simulate_sine(sc);
  ASSERT_EQ(a.t.size(), b.t.size());
  for (std::size_t k = 0; k < a.t.size(); ++k) {
    EXPECT_EQ(a.theta_hat[k], b.theta_hat[k]);
    EXPECT_EQ(a.x[k], b.x[k]);
  }
}

}  // namespace
}  // namespace monest
