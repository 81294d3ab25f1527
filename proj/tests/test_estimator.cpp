#include <cmath>

#include <gtest/gtest.h>

#include "monest/estimator.hpp"
#include "monest/plant_sine.hpp"

namespace monest {
namespace {

Vector xy(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

EstimatorConfig sine_config(double gamma = 0.5, double K = 1.0) {
  return {Matrix::Constant(1, 1, gamma), PhiFunction::linear(K),
          sine_parametrization(-2.985, 0.0, 2.0), sine_error(-2.985, 0.0, 2.0)};
}

TEST(ControlU, SineClosedForm) {
  const auto sc = build_sine_scenario(1.0, xy(-3.0, 0.1), 1.0);
  const auto cfg = sine_config();
  for (double th : {0.6, 1.0, 1.3}) {
    const Vector x = xy(-3.1, 0.4);
    const double psi = x[0] + x[1] + 2.985;
    const double u = control_u(sc.plant, cfg.error, cfg.phi, Vector::Constant(1, th), x, 0.0);
    EXPECT_NEAR(u, -x[1] - std::sin(th * x[0]) - psi, 1e-14);
  }
}

TEST(ControlU, ZeroOnManifoldWithZeroDrift) {
  auto zero = [](const PartitionedState&) { return Vector::Zero(1).eval(); };
  PlantModel plant(
      1, 1, zero, [](const PartitionedState&, const Vector&) { return Vector::Zero(1).eval(); },
      zero, [](const PartitionedState&) { return Vector::Ones(1).eval(); },
      {Vector::Constant(1, -1.0), Vector::Constant(1, 1.0)}, Vector::Zero(1));
  ErrorFunctional e;
  e.psi = [](const Vector& x, double) { return x[1]; };
  e.grad_x_psi = [](const Vector&, double) { return xy(0.0, 1.0); };
  e.dpsi_dt = [](const Vector&, double) { return 0.0; };
  EXPECT_EQ(control_u(plant, e, PhiFunction::linear(1.0), Vector::Zero(1), xy(3.0, 0.0), 0.0), 0.0);
}

TEST(ControlU, GuardFaultBelowFloor) {
  const auto sc = build_sine_scenario(1.0, xy(-3.0, 0.1), 1.0);
  auto e = sine_error(-2.985, 0.0, 2.0);
  e.grad_x_psi = [](const Vector&, double) { return xy(1.0, 0.0); };  // L_g psi = 0
  EXPECT_THROW(control_u(sc.plant, e, PhiFunction::linear(1.0), Vector::Ones(1), xy(0, 0), 0.0),
               ModelFault);
}

TEST(ControlU, MatchedClosedLoopDecaysExponentially) {
  const double K = 1.0;
  const auto sc = build_sine_scenario(1.0, xy(-3.0, 0.1), 1.0);
  const auto cfg = sine_config(0.5, K);
  const Vector th = Vector::Constant(1, 1.0);
  VectorField f{2, [&](double t, const Vector& x) {
                  const double u = control_u(sc.plant, cfg.error, cfg.phi, th, x, t);
                  return (sc.plant.drift(x, th) + sc.plant.gain(x) * u).eval();
                }};
  const Vector x0 = xy(-3.0, 0.1);
  const double psi0 = cfg.error.psi(x0, 0.0);
  const auto tr = integrate(f, x0, 0.0, 5.0, 1e-3);
  for (std::size_t k = 0; k < tr.times.size(); k += 100)
    EXPECT_NEAR(cfg.error.psi(tr.samples[k], tr.times[k]), psi0 * std::exp(-K * tr.times[k]), 1e-6);
}

TEST(ThetaHat, ZeroAtSetPoint) {
  const auto cfg = sine_config();
  EstimatorState s;
  s.theta_I = Vector::Zero(1);
  EXPECT_EQ(theta_hat(s, cfg, xy(-2.985, 0.0), 0.0)[0], 0.0);
}

TEST(ThetaHat, HandEvaluatedFiniteForm) {
  const auto cfg = sine_config(0.5);
  EstimatorState s;
  s.theta_I = Vector::Constant(1, 0.3);
  const Vector x = xy(-3.1, 0.2);
  const double psi = x[0] + x[1] + 2.985;
  const double Psi = (x[0] + 2.985) * x[1] + 0.5 * x[1] * x[1];
  EXPECT_NEAR(theta_hat(s, cfg, x, 0.0)[0], 0.5 * (psi * -x[0] - Psi + 0.3), 1e-14);
}

TEST(ThetaIRhs, SineGeneralFormMatchesHandDerivation) {
  const auto sc = build_sine_scenario(1.0, xy(-3.0, 0.1), 1.0);
  const auto cfg = sine_config(0.5, 1.0);
  EstimatorState s;
  s.theta_I = Vector::Constant(1, 1.7);
  const Vector x = xy(-3.05, 0.15);
  const double u = 0.4;
  const double psi = x[0] + x[1] + 2.985;
  const double th = theta_hat(s, cfg, x, 0.0)[0];
  // phi(psi) alpha + psi x2 + x2^2 + psi (sin(th x1) + u)
  const double expect = -psi * x[0] + psi * x[1] + x[1] * x[1] + psi * (std::sin(th * x[0]) + u);
  EXPECT_NEAR(theta_I_rhs(s, cfg, sc.plant, x, 0.0, u)[0], expect, 1e-12);
}

TEST(ThetaIRhs, ZeroWhenNothingDrives) {
  FiniteFormTerms k;
  k.alpha = Vector::Ones(2);
  k.dPsi_dt = k.dalpha_dt = k.Lf1_alpha = k.Lf1_Psi = k.Lg1_alpha = k.Lg1_Psi = Vector::Zero(2);
  k.u = 3.0;
  EXPECT_EQ(theta_I_rhs(k).norm(), 0.0);
}

TEST(ThetaIRhs, NeuroSpecialization) {
  // alpha = 1, Psi = 0, beta = 0, m1 = 0, phi = (b/tau) psi
  const double b = 0.02, tau = 0.01, psi = 0.37;
  FiniteFormTerms k;
  k.psi = psi;
  k.phi_psi = b / tau * psi;
  k.alpha = Vector::Ones(1);
  k.dPsi_dt = k.dalpha_dt = k.Lf1_alpha = k.Lf1_Psi = k.Lg1_alpha = k.Lg1_Psi = Vector::Zero(1);
  EXPECT_NEAR(theta_I_rhs(k)[0], b / tau * psi, 1e-15);
}

TEST(EffectiveUpdate, MatchedParametersAreFixedPoint) {
  const auto sc = build_sine_scenario(1.0, xy(-3.0, 0.1), 1.0);
  const auto cfg = sine_config();
  const Vector x = xy(-3.0, 0.05);
  const double psi = cfg.error.psi(x, 0.0);
  const Vector r = effective_update_rhs(cfg, sc.plant, x, 0.0, Vector::Ones(1), -psi, TruthKey{});
  EXPECT_NEAR(r[0], 0.0, 1e-15);
}

TEST(EffectiveUpdate, SineReducesToMismatchTimesAlphaMinusPsi) {
  const auto sc = build_sine_scenario(1.2, xy(-3.0, 0.1), 1.0);
  const auto cfg = sine_config(0.5, 1.0);
  const Vector x = xy(-3.02, 0.07);
  const double th = 0.8;
  const double u = control_u(sc.plant, cfg.error, cfg.phi, Vector::Constant(1, th), x, 0.0);
  const Vector dx = sc.plant.drift(x, Vector::Constant(1, 1.2)) + sc.plant.gain(x) * u;
  const double psi_dot = dx[0] + dx[1];
  const double df = std::sin(1.2 * x[0]) - std::sin(th * x[0]);
  const double psi = cfg.error.psi(x, 0.0);
  const Vector r =
      effective_update_rhs(cfg, sc.plant, x, 0.0, Vector::Constant(1, th), psi_dot, TruthKey{});
  EXPECT_NEAR(r[0], 0.5 * df * (-x[0] - psi), 1e-12);
}

TEST(EffectiveUpdate, FiniteDifferenceAlongSineRun) {
  SineOptions o;
  o.theta_hat0 = 0.7;
  o.h = 1e-3;
  const auto sc = build_sine_scenario(1.1, xy(-2.95, 0.02), 2.0, o);
  const auto run = simulate_sine(sc);
  const auto cfg = sine_config(o.Gamma, o.K);
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < run.t.size(); ++k) {
    const double fd = (run.theta_hat[k + 1] - run.theta_hat[k - 1]) / (run.t[k + 1] - run.t[k - 1]);
    const double ex = effective_update_rhs(cfg, sc.plant, run.x[k], run.t[k],
                                           Vector::Constant(1, run.theta_hat[k]), run.psi_dot[k],
                                           TruthKey{})[0];
    worst = std::max(worst, std::abs(fd - ex));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Switching, InitiallyInsideInnerBallIsOn) {
  const auto sc = build_sine_scenario(1.0, xy(-2.95, 0.0), 1.0);
  const auto s = init_switching(sc.atlas, sc.Gamma, Vector::Constant(1, 0.9), sc.x0, 0.0, 0);
  EXPECT_EQ(s.sigma[0], 1);
  EXPECT_EQ(s.sigma[1], 0);
  EXPECT_NEAR(theta_hat(s, sc.Gamma, sc.atlas, sc.x0, 0.0)[0], 0.9, 1e-14);
}

TEST(Switching, NeverEnteringMeansSteeringThroughout) {
  const auto sc = build_sine_scenario(1.0, xy(0.0, 0.0), 1.0);
  auto s = init_switching(sc.atlas, sc.Gamma, Vector::Constant(1, 0.9), sc.x0, 0.0, 0);
  const auto out = switching_step(s, sc.atlas, xy(0.5, 0.5), 0.3);
  EXPECT_FALSE(out.identifying);
  EXPECT_FALSE(out.toggled);
  EXPECT_EQ(active_ball(out.state), -1);
}

TEST(Switching, ContinuityCorrectionOnReentry) {
  const auto sc = build_sine_scenario(1.0, xy(-2.985, 0.0), 1.0);
  auto s = init_switching(sc.atlas, sc.Gamma, Vector::Constant(1, 0.9), sc.x0, 0.0, 0);
  s.theta_I[0] += 0.2;  // pretend some adaptation happened
  const Vector xoff = xy(-2.985 + 0.395, 0.0);
  const double before_off = theta_hat(s, sc.Gamma, sc.atlas, xoff, 1.0)[0];
  auto out = switching_step(s, sc.atlas, xoff, 1.0);
  EXPECT_FALSE(out.identifying);
  EXPECT_NEAR(theta_hat(out.state, sc.Gamma, sc.atlas, xy(1.0, 2.0), 1.5)[0], before_off, 1e-14);
  const Vector xon = xy(-2.985 - 0.05, 0.03);
  out = switching_step(out.state, sc.atlas, xon, 2.0);
  EXPECT_TRUE(out.identifying);
  EXPECT_NEAR(theta_hat(out.state, sc.Gamma, sc.atlas, xon, 2.0)[0], before_off, 1e-14);
}

TEST(SteeringU1, Values) {
  const auto e = sine_error(-2.985, 0.0, 2.0);
  EXPECT_NEAR(steering_u1(e, xy(-2.985, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(steering_u1(e, xy(0.0, 1.0)), -5.985, 1e-12);
  const Vector xn = xy(-4.0, 0.5);  // psi = -0.515
  EXPECT_NEAR(steering_u1(e, xn), -0.5 + 0.515 + 1.0, 1e-12);
}

TEST(Gain, RejectsNonSymmetricOrIndefinite) {
  Matrix G(2, 2);
  G << 1, 2, 0, 1;
  EXPECT_THROW(validate_gain(G), ModelFault);
  G << 1, 0, 0, -1;
  EXPECT_THROW(validate_gain(G), ModelFault);
}

}  // namespace
}  // namespace monest
