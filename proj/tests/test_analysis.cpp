#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "monest/analysis.hpp"

namespace monest {
namespace {

std::vector<double> grid(double t0, double t1, double dt) {
  std::vector<double> t;
  const auto n = static_cast<std::size_t>(std::llround((t1 - t0) / dt));
  for (std::size_t k = 0; k <= n; ++k) t.push_back(t0 + dt * static_cast<double>(k));
  return t;
}

TEST(Gramian, RotatingRegressorOverOnePeriodIsPiIdentity) {
  const auto t = grid(0.0, 20.0, 1e-3);
  std::vector<Vector> a;
  for (double s : t) {
    Vector v(2);
    v << std::cos(s), std::sin(s);
    a.push_back(v);
  }
  const auto g = pe_gramian(t, a, 2.0 * std::numbers::pi);
  ASSERT_FALSE(g.min_eigs.empty());
  for (double e : g.min_eigs) EXPECT_NEAR(e, std::numbers::pi, 1e-5);
  EXPECT_LT(g.max_asymmetry, 1e-12);
}

TEST(Gramian, ConstantRegressorGivesLengthTimesSquare) {
  const auto t = grid(0.0, 5.0, 0.01);
  std::vector<Vector> a(t.size(), Vector::Constant(1, 0.7));
  const auto g = pe_gramian(t, a, 1.234);  // off-grid window end
  for (double e : g.min_eigs) EXPECT_NEAR(e, 1.234 * 0.49, 1e-12);
}

TEST(Gramian, ParallelEqualsSerial) {
  const auto t = grid(0.0, 10.0, 0.01);
  std::vector<Matrix> m;
  for (double s : t) {
    Vector v(2);
    v << std::sin(3.0 * s), 1.0 + std::cos(s);
    m.push_back(v * v.transpose());
  }
  const auto a = windowed_gramian(t, m, 1.7, false);
  const auto b = windowed_gramian(t, m, 1.7, true);
  EXPECT_EQ(a.min_eigs, b.min_eigs);
  EXPECT_EQ(a.delta_est, b.delta_est);
}

TEST(Gramian, RankDeficientRegressorHasZeroMinimum) {
  const auto t = grid(0.0, 3.0, 0.01);
  std::vector<Vector> a;
  for (double s : t) {
    Vector v(2);
    v << std::sin(s), 2.0 * std::sin(s);
    a.push_back(v);
  }
  EXPECT_NEAR(pe_gramian(t, a, 1.0).delta_est, 0.0, 1e-12);
}

TEST(Gramian, RejectsBadWindows) {
  const auto t = grid(0.0, 1.0, 0.1);
  std::vector<Vector> a(t.size(), Vector::Ones(1));
  EXPECT_THROW(pe_gramian(t, a, 0.1), std::invalid_argument);
  EXPECT_THROW(pe_gramian(t, a, 1.5), std::invalid_argument);
}

TEST(LambdaFn, QuadraticClosedForm) {
  const auto phi = PhiFunction::linear(2.5);
  for (double d = 1e-6; d < 1e6; d *= 3.7) {
    const double L = Lambda(phi, d);
    EXPECT_NEAR(L, std::sqrt(2.0 * d / 2.5), 1e-9 * std::max(1.0, L));
    EXPECT_NEAR(phi.Q(L), d, 1e-9 * std::max(1.0, d));
  }
  EXPECT_EQ(Lambda(phi, 0.0), 0.0);
}

TEST(LambdaFn, AsymmetricQTakesLargerSide) {
  PhiFunction phi{[](double p) { return p > 0 ? p : 4.0 * p; },
                  [](double p) { return p > 0 ? 0.5 * p * p : 2.0 * p * p; }};
  EXPECT_NEAR(Lambda(phi, 2.0), 2.0, 1e-9);
}

TEST(LambdaFn, BoundedQIsRejected) {
  PhiFunction phi{[](double p) { return std::tanh(p); },
                  [](double p) { return std::log(std::cosh(p)) > 5 ? 5.0 : std::log(std::cosh(p)); }};
  EXPECT_THROW(Lambda(phi, 6.0), ModelFault);
}

TEST(Bounds, HandComputedLinear) {
  const auto phi = PhiFunction::linear(1.0);
  const auto r = performance_bounds(phi, 0.4, Vector::Constant(1, 0.3), Matrix::Constant(1, 1, 0.5), 1.0);
  const double w = 0.09 / 0.5;
  EXPECT_NEAR(r.l2_phi_bound, 2.0 * 0.08 + w / 2.0, 1e-14);
  EXPECT_NEAR(r.linf_psi_bound, std::sqrt(2.0 * (0.08 + w / 4.0)), 1e-9);
}

TEST(Bounds, MatchedDecayMeetsBoundWithEquality) {
  // psi = psi0 e^{-t}, zero parameter error: integral of psi^2 = psi0^2/2 < 2 Q(psi0) = psi0^2
  const auto t = grid(0.0, 30.0, 1e-3);
  std::vector<double> p, pd;
  for (double s : t) {
    p.push_back(0.4 * std::exp(-s));
    pd.push_back(-0.4 * std::exp(-s));
  }
  const auto phi = PhiFunction::linear(1.0);
  auto r = performance_bounds(phi, 0.4, Vector::Zero(1), Matrix::Identity(1, 1), 1.0);
  observe_performance(r, phi, t, p, pd);
  EXPECT_TRUE(r.satisfied());
  EXPECT_NEAR(r.l2_phi_observed, 0.08, 1e-6);
  EXPECT_NEAR(r.linf_psi_observed, r.linf_psi_bound, 1e-9);
}

TEST(Envelope, TrivialCases) {
  const Matrix G = Matrix::Identity(1, 1);
  EXPECT_NEAR(exp_envelope(2.0, 1.0, 1.0, G, Vector::Zero(1), std::log(2.0)), 1.0, 1e-14);
  EXPECT_NEAR(exp_envelope(0.0, 4.0, 1.0, G, Vector::Constant(1, 2.0), 10.0), 0.5, 1e-14);
  const std::vector<double> t{0.0, 1.0, 2.0};
  const std::vector<double> psi{1.0, 0.5, 0.1};
  const auto c = check_envelope(t, psi, 1.0, 1.0, G, Vector::Zero(1));
  EXPECT_EQ(c.violations, 1u);  // 0.5 > e^{-1}
  EXPECT_NEAR(c.max_excess, 0.5 - std::exp(-1.0), 1e-14);
  EXPECT_EQ(c.worst_time, 1.0);
}

TEST(Lyapunov, SkipsPairsAcrossParameterChanges) {
  const std::vector<double> t{0, 1, 2, 3};
  std::vector<Vector> th{Vector::Constant(1, 0.9), Vector::Constant(1, 0.95),
                         Vector::Constant(1, 0.95), Vector::Constant(1, 0.96)};
  std::vector<Vector> tr{Vector::Constant(1, 1.0), Vector::Constant(1, 1.0),
                         Vector::Constant(1, 0.5), Vector::Constant(1, 0.5)};
  const ParameterBox om{Vector::Constant(1, 0.6), Vector::Constant(1, 1.4)};
  const auto r = lyapunov_monitor(t, th, tr, Matrix::Identity(1, 1), om);
  EXPECT_EQ(r.pairs, 2u);
  EXPECT_NEAR(r.max_increase, 0.5 * (0.46 * 0.46 - 0.45 * 0.45), 1e-14);
  EXPECT_FALSE(r.exit_omega);
  EXPECT_NEAR(r.final_err, 0.46, 1e-14);
}

TEST(Lyapunov, MaskAndOmegaExit) {
  const std::vector<double> t{0, 1, 2};
  std::vector<Vector> th{Vector::Constant(1, 0.9), Vector::Constant(1, 0.5), Vector::Constant(1, 0.9)};
  std::vector<Vector> tr(3, Vector::Constant(1, 1.0));
  const ParameterBox om{Vector::Constant(1, 0.6), Vector::Constant(1, 1.4)};
  const auto r = lyapunov_monitor(t, th, tr, Matrix::Identity(1, 1), om, {true, false, true});
  EXPECT_EQ(r.pairs, 0u);
  EXPECT_TRUE(r.exit_omega);
}

TEST(RateFitFn, RecoversExponent) {
  const auto t = grid(0.0, 5.0, 0.01);
  std::vector<double> e;
  for (double s : t) e.push_back(0.3 * std::exp(-2.0 * s));
  const auto f = exp_rate_fit(t, e);
  EXPECT_NEAR(f.lambda_est, 2.0, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_EQ(f.used, t.size());
}

TEST(RateFitFn, NeedsTenSamples) {
  std::vector<double> t(9, 0.0), e(9, 1.0);
  EXPECT_THROW(exp_rate_fit(t, e), std::invalid_argument);
}

TEST(RateFloor, Formula) {
  Matrix G(2, 2);
  G << 2.0, 0.0, 0.0, 0.5;
  EXPECT_NEAR(theoretical_rate_floor(G, 0.8, 0.3, 2.0), 0.5 * 0.8 * 0.3 / 2.0, 1e-14);
}

}  // namespace
}  // namespace monest
