#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "monest/neuro_kernels.hpp"
#include "monest/ode.hpp"
#include "monest/plant_neuro.hpp"

using namespace monest;

namespace {

PatternGrid grid_with(const Matrix& P1, const Matrix& P2, const Matrix& S, double delay) {
  PatternGrid g = PatternGrid::make(P1, P2, S);
  g.tau_delay.setConstant(delay);
  return g;
}

std::size_t cell(std::size_t i, std::size_t j, std::size_t N) { return i + j * N; }

HRParams harmonized() {
  HRParams p;
  p.harmonize_sensory_lag = true;
  return p;
}

}  // namespace

TEST(HRParams, RejectsNonPositive) {
  HRParams p;
  EXPECT_NO_THROW(p.validate());
  p.eps = 0.0;
  EXPECT_THROW(p.validate(), ModelFault);
  p = HRParams{};
  p.theta0 = -1.0;
  EXPECT_THROW(p.validate(), ModelFault);
}

TEST(PatternGrid, DefaultDelaysTileOnePeriod) {
  const Matrix tau = default_delays(4);
  EXPECT_DOUBLE_EQ(tau(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(tau(1, 0), 100.0 / 16.0);
  EXPECT_DOUBLE_EQ(tau(0, 1), 400.0 / 16.0);
  EXPECT_DOUBLE_EQ(tau(3, 3), 1500.0 / 16.0);
  EXPECT_GE(tau.minCoeff(), 0.0);
  EXPECT_LT(tau.maxCoeff(), 100.0);
}

TEST(PatternGrid, RejectsNonBinaryTemplates) {
  Matrix P = Matrix::Zero(4, 4);
  P(1, 1) = 0.5;
  EXPECT_THROW(PatternGrid::make(P, Matrix::Zero(4, 4), Matrix::Zero(4, 4)), ModelFault);
  EXPECT_THROW(PatternGrid::make(Matrix::Zero(4, 4), Matrix::Zero(3, 3), Matrix::Zero(4, 4)),
               ModelFault);
}

TEST(PatternText, ParsesBinaryRows) {
  const Matrix P = parse_pattern("010\n111\n\n0 1 0\n");
  ASSERT_EQ(P.rows(), 3);
  EXPECT_EQ(P(0, 0), 0.0);
  EXPECT_EQ(P(1, 2), 1.0);
  EXPECT_EQ(P(2, 1), 1.0);
  EXPECT_EQ(P.sum(), 5.0);
  EXPECT_THROW(parse_pattern("01\n1\n"), ConfigError);
  EXPECT_THROW(parse_pattern("0x\n10\n"), ConfigError);
}

TEST(PatternText, ImagesAcceptRealsAndPackedRows) {
  const Matrix S = parse_image("0.5 1e-2\n-3 2.25\n");
  EXPECT_DOUBLE_EQ(S(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(S(0, 1), 0.01);
  EXPECT_DOUBLE_EQ(S(1, 0), -3.0);
  const Matrix B = parse_image("01\n10\n");
  EXPECT_EQ(B(0, 1), 1.0);
  EXPECT_EQ(B(1, 1), 0.0);
  EXPECT_THROW(parse_image("1 abc\n0 0\n"), ConfigError);
}

TEST(PatternText, LoadsFromFile) {
  const std::string path = ::testing::TempDir() + "pattern.txt";
  {
    std::ofstream out(path);
    out << "0110\n1001\n1001\n0110\n";
  }
  EXPECT_EQ(load_pattern(path).sum(), 8.0);
  std::remove(path.c_str());
  EXPECT_THROW(load_pattern(path), ConfigError);
}

TEST(Blur, HandValues) {
  Matrix P = Matrix::Zero(3, 3);
  P(1, 1) = 1.0;
  const Matrix B = blur(P, 0.5);
  EXPECT_DOUBLE_EQ(B(1, 1), 1.0);
  EXPECT_NEAR(B(0, 1), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(B(0, 0), std::exp(-4.0), 1e-15);
  EXPECT_EQ(blur(P, 0.0), P);
  EXPECT_EQ(blur(P, -2.0), P);
}

TEST(ReceptiveField, AllZeroImageGivesZero) {
  const Matrix Z = Matrix::Zero(5, 5);
  const PatternGrid g = grid_with(Z, Z, Z, 0.0);
  for (std::size_t k = 0; k < 25; ++k)
    EXPECT_EQ(receptive_field_drive(g, DriveSource::image, k, 1.0, 0.0, 1.0, 100.0), 0.0);
}

TEST(ReceptiveField, SinglePixelUnderTheCell) {
  const Matrix Z = Matrix::Zero(5, 5);
  Matrix S = Z;
  S(2, 3) = 1.0;
  const PatternGrid g = grid_with(Z, Z, S, 10.0);
  EXPECT_EQ(receptive_field_drive(g, DriveSource::image, cell(2, 3, 5), 1.0, 0.0, 12.0, 100.0),
            1.0);
  // Pulse width 5: off before the delay and after it closes.
  EXPECT_EQ(receptive_field_drive(g, DriveSource::image, cell(2, 3, 5), 1.0, 0.0, 9.0, 100.0),
            0.0);
  EXPECT_EQ(receptive_field_drive(g, DriveSource::image, cell(2, 3, 5), 1.0, 0.0, 15.5, 100.0),
            0.0);
  EXPECT_EQ(receptive_field_drive(g, DriveSource::image, cell(2, 3, 5), 1.0, 0.0, 112.0, 100.0),
            1.0);
}

TEST(ReceptiveField, ThreeByThreePatchMatchesHandSum) {
  const Matrix Z = Matrix::Zero(5, 5);
  Matrix S = Z;
  S.block(1, 1, 3, 3).setOnes();
  const PatternGrid g = grid_with(Z, Z, S, 0.0);
  // Cell (0,0): distances i + j for i, j in 1..3.
  const double row = std::exp(-0.5) + std::exp(-1.0) + std::exp(-1.5);
  EXPECT_NEAR(receptive_field_drive(g, DriveSource::image, 0, 2.0, 0.0, 1.0, 100.0), row * row,
              1e-14);
  // Centre cell: one at 0, four at 1, four at 2.
  EXPECT_NEAR(receptive_field_drive(g, DriveSource::image, cell(2, 2, 5), 2.0, 0.0, 1.0, 100.0),
              1.0 + 4.0 * std::exp(-0.5) + 4.0 * std::exp(-1.0), 1e-14);
}

TEST(ReceptiveField, TemplateSourceUsesBlurredTemplate) {
  const std::size_t N = 6;
  Matrix P1 = Matrix::Zero(N, N), P2 = Matrix::Zero(N, N);
  P1(1, 1) = P1(1, 2) = P1(4, 4) = 1.0;
  P2(3, 0) = 1.0;
  PatternGrid g = grid_with(P1, P2, Matrix::Zero(N, N), 0.0);
  g.tau_delay(5, 5) = 50.0;  // gated off at t = 1
  const double th0 = 1.3, th1 = 0.7;
  const Matrix B1 = blur(P1, th1), B2 = blur(P2, th1);
  const std::size_t k = cell(2, 3, N);
  double want1 = 0.0, want2 = 0.0;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      if (i == 5 && j == 5) continue;
      const double w = std::exp(-(std::abs(2.0 - i) + std::abs(3.0 - j)) / th0);
      want1 += w * B1(i, j);
      want2 += w * B2(i, j);
    }
  EXPECT_NEAR(receptive_field_drive(g, DriveSource::template1, k, th0, th1, 1.0, 100.0), want1,
              1e-12);
  EXPECT_NEAR(receptive_field_drive(g, DriveSource::template2, k, th0, th1, 1.0, 100.0), want2,
              1e-12);
}

TEST(ReceptiveField, WeightsGrowWithScale) {
  for (int d = 1; d < 10; ++d)
    EXPECT_GT(std::exp(-d / 1.1), std::exp(-d / 1.0));
  const Matrix Z = Matrix::Zero(5, 5);
  Matrix S = Z;
  S(0, 4) = 1.0;
  const PatternGrid g = grid_with(Z, Z, S, 0.0);
  double prev = 0.0;
  for (double th : {0.5, 0.8, 1.0, 2.0, 5.0}) {
    const double r = receptive_field_drive(g, DriveSource::image, cell(3, 1, 5), th, 0.0, 1.0, 100.0);
    EXPECT_GT(r, prev);
    prev = r;
  }
}

TEST(HRCell, IdenticalTripletHasNoCoupling) {
  EXPECT_EQ(hr_coupling(0.7, 0.7, 0.7, 1.0), 0.0);
  EXPECT_EQ(hr_coupling(-1.6, -1.6, -1.6, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(hr_coupling(1.0, 2.0, 0.5, 2.0), 2.0 * 0.5);
}

TEST(HRCell, StatedInitialConditions) {
  const HRParams p;
  const HRUnit x{-1.6, -11.83, 1.46, 0.0};
  const auto f = hr_rhs(x, 0.0, p);
  EXPECT_NEAR(f[1], 0.03, 1e-12);
  // -a x^3 + b x^2 + x2 - x3 + I0 = 4.096 + 7.68 - 11.83 - 1.46 + 1.4
  EXPECT_NEAR(f[0], -0.114, 1e-12);
  EXPECT_NEAR(f[2], 0.001 * (4.0 * 0.0 - 1.46), 1e-15);
}

TEST(HRCell, SlowVariableScalesWithEps) {
  HRParams p;
  const HRUnit x{0.3, -1.0, 2.0, 0.1};
  const double base = hr_rhs(x, 0.2, p)[2];
  p.eps *= 7.0;
  EXPECT_NEAR(hr_rhs(x, 0.2, p)[2], 7.0 * base, 1e-15);
}

TEST(Sensory, LagForms) {
  const HRParams p;
  EXPECT_DOUBLE_EQ(sensory_rhs(0.0, 0.0, p, SensoryForm::input), p.beta / p.tau);
  EXPECT_DOUBLE_EQ(sensory_rhs(p.beta + 0.4, 0.4, p, SensoryForm::input), 0.0);
  EXPECT_DOUBLE_EQ(sensory_rhs(2.0, 0.4, p, SensoryForm::template_printed),
                   (-p.beta * 2.0 + 0.4) / p.tau);
  EXPECT_DOUBLE_EQ(sensory_rhs(2.0, 0.4, p, SensoryForm::template_harmonized),
                   sensory_rhs(2.0, 0.4, p, SensoryForm::input));
}

TEST(Sensory, StepResponseMatchesExponential) {
  const HRParams p;
  const double r0 = 1.7;
  VectorField f{1, [&](double, const Vector& x) {
                  return Vector::Constant(1, sensory_rhs(x[0], r0, p, SensoryForm::input));
                }};
  const auto traj = integrate(f, Vector::Zero(1), 0.0, 0.1, 1e-4);
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double want = (p.beta + r0) * (1.0 - std::exp(-traj.times[i] / p.tau));
    worst = std::max(worst, std::abs(traj.samples[i][0] - want));
  }
  EXPECT_LT(worst, 1e-6);
  EXPECT_NEAR(traj.samples.back()[0], p.beta + r0, 1e-3);
}

TEST(Theta1, FiniteFormAndRates) {
  HRParams p;
  auto u = theta1_update(0.4, 0.4, 0.8, p);
  EXPECT_EQ(u.theta_hat, 0.8);
  EXPECT_EQ(u.theta_I_rate, 0.0);
  u = theta1_update(0.0, 0.0, 1.0, p);
  EXPECT_EQ(u.theta_hat, 1.0);
  u = theta1_update(0.5, 0.2, 1.0, p);
  EXPECT_DOUBLE_EQ(u.theta_hat, 1.3);
  EXPECT_DOUBLE_EQ(u.theta_I_rate, p.beta / p.tau * 0.3);
  p.harmonize_sensory_lag = true;
  EXPECT_DOUBLE_EQ(theta1_update(0.5, 0.2, 1.0, p).theta_I_rate, 0.3 / p.tau);
}

TEST(Theta1, InitialEstimateIsIntegralPart) {
  const Vector y = neuro_initial_state(3, 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    const double* c = y.data() + k * kNeuroCellDim;
    EXPECT_EQ(theta1_update(c[kNx4], c[kNh4], c[kNhI], HRParams{}).theta_hat, 1.0);
    EXPECT_EQ(c[kNx1], -1.6);
    EXPECT_EQ(c[kNb2], -11.83);
    EXPECT_EQ(c[kNh3], 1.46);
  }
}

TEST(Theta1, HarmonizedErrorModelIsMismatchOverTau) {
  // d(theta_hat)/dt = psi_dot + psi/tau = (r - r_hat)/tau with harmonized lags.
  const HRParams p = harmonized();
  const double x4 = 0.3, h4 = 0.1, r = 2.0, rh = 1.5;
  const double psi_dot = sensory_rhs(x4, r, p, SensoryForm::input) -
                         sensory_rhs(h4, rh, p, SensoryForm::template_harmonized);
  const double rate = theta1_update(x4, h4, 0.0, p).theta_I_rate;
  EXPECT_NEAR(psi_dot + rate, (r - rh) / p.tau, 1e-12);
}

TEST(NeuroRhs, MatchesCellFunctions) {
  const HRParams p;
  Vector y = neuro_initial_state(2, 1.0);
  y[kNeuroCellDim + kNh1] = 0.4;
  y[kNeuroCellDim + kNx4] = 0.3;
  CellDrives d{{0.5, 0.6}, {0.7, 0.8}, {0.9, 1.0}};
  Vector dy;
  neuro_rhs(y, d, p, false, dy);
  const double* c = y.data() + kNeuroCellDim;
  const double* o = dy.data() + kNeuroCellDim;
  const HRUnit x{c[kNx1], c[kNx2], c[kNx3], c[kNx4]};
  EXPECT_DOUBLE_EQ(o[kNx1], hr_rhs(x, hr_coupling(c[kNx1], c[kNh1], c[kNb1], 1.0), p)[0]);
  const HRUnit h{c[kNh1], c[kNh2], c[kNh3], c[kNh4]};
  EXPECT_DOUBLE_EQ(o[kNh1], hr_rhs(h, hr_coupling(c[kNh1], c[kNx1], c[kNb1], 1.0), p)[0]);
  EXPECT_DOUBLE_EQ(o[kNx4], sensory_rhs(0.3, 0.6, p, SensoryForm::input));
  EXPECT_DOUBLE_EQ(o[kNh4], sensory_rhs(0.0, 0.8, p, SensoryForm::template_printed));
  EXPECT_DOUBLE_EQ(o[kNhI], p.beta / p.tau * 0.3);
  neuro_rhs(y, d, p, true, dy);
  EXPECT_DOUBLE_EQ(dy[kNeuroCellDim + kNx1], hr_rhs(x, 0.0, p)[0]);
}

TEST(HRCell, UncoupledUnitBursts) {
  const HRParams p;
  VectorField f{3, [&](double, const Vector& x) {
                  const auto d = hr_rhs({x[0], x[1], x[2], 0.0}, 0.0, p);
                  return Vector(Vector::Map(d.data(), 3));
                }};
  Vector x0(3);
  x0 << -1.6, -11.83, 1.46;
  const auto traj = integrate(f, x0, 0.0, 2000.0, 1e-2);
  int crossings = 0;
  for (std::size_t i = 1; i < traj.samples.size(); ++i)
    if ((traj.samples[i - 1][0] < 0.0) != (traj.samples[i][0] < 0.0)) ++crossings;
  EXPECT_GE(crossings, 2 * 3);
}

TEST(Recognition, RejectsTinyGrid) {
  const Matrix Z = Matrix::Zero(3, 3);
  const PatternGrid g = PatternGrid::make(Z, Z, Z);
  EXPECT_THROW(run_recognition(g, HRParams{}, NeuroOptions{}), ModelFault);
}

TEST(Recognition, ExactTemplateStaysSynchronized) {
  const std::size_t N = 6;
  const Matrix P1 = square_pattern(N, 1, 3);
  const PatternGrid g = PatternGrid::make(P1, cross_pattern(N, 4, 4, 1), P1);
  NeuroOptions o;
  o.tf = 60.0;
  o.theta_I0 = 0.0;
  const auto run = run_recognition(g, harmonized(), o);
  for (std::size_t k = 0; k < N * N; ++k) {
    EXPECT_LT(std::abs(run.final_theta1[k]), 1e-9);
    EXPECT_LT(run.sync1[k], 0.05 * run.signal_rms[k]);
  }
}

TEST(Recognition, MatchedPatternIdentifiesBlur) {
  const std::size_t N = 6;
  const double th = 0.8;
  const Matrix P1 = square_pattern(N, 1, 3);
  const PatternGrid g = PatternGrid::make(P1, Matrix::Zero(N, N), blur(P1, th));
  NeuroOptions o;
  o.tf = 110.0;
  const auto run = run_recognition(g, harmonized(), o, th);
  for (std::size_t i = 1; i <= 3; ++i)
    for (std::size_t j = 1; j <= 3; ++j) {
      const std::size_t k = cell(i, j, N);
      EXPECT_LT(std::abs(run.local_theta1[k] - th) / th, 0.05) << "cell " << k;
      EXPECT_LT(std::abs(run.final_theta1[k] - th) / th, 0.05) << "cell " << k;
      EXPECT_LE(run.lyapunov_max_increase1[k], 1e-6) << "cell " << k;
      EXPECT_LT(run.sync1[k], 0.05 * run.signal_rms[k]);
    }
}

TEST(Recognition, EmptyImageDoesNotConvergeNorBlowUp) {
  const std::size_t N = 6;
  const Matrix P1 = square_pattern(N, 1, 3);
  const PatternGrid g = PatternGrid::make(P1, Matrix::Zero(N, N), Matrix::Zero(N, N));
  NeuroOptions o;
  o.tf = 250.0;
  NeuroRun run;
  ASSERT_NO_THROW(run = run_recognition(g, harmonized(), o));
  const std::size_t k = cell(2, 2, N);
  EXPECT_GT(std::abs(run.final_theta1[k] - 1.0), 0.5);
  for (std::size_t c = 0; c < N * N; ++c) {
    EXPECT_TRUE(std::isfinite(run.theta1_max_abs[c]));
    EXPECT_LT(run.theta1_max_abs[c], o.blowup);
  }
}

TEST(Recognition, EmptyImageEstimatesStayBounded) {
  // r_hat >= sum W P > 0 for every estimate, so d(theta_hat)/dt = -r_hat/tau never vanishes.
  const std::size_t N = 6;
  const Matrix P1 = square_pattern(N, 1, 3);
  const PatternGrid g = PatternGrid::make(P1, Matrix::Zero(N, N), Matrix::Zero(N, N));
  NeuroOptions o;
  o.tf = 250.0;
  const auto run = run_recognition(g, harmonized(), o);
  for (std::size_t c = 0; c < N * N; ++c)
    EXPECT_TRUE(estimates_bounded(run, c)) << "cell " << c << " peak " << run.peak_prev_period[c]
                                           << " -> " << run.peak_last_period[c];
}

TEST(Recognition, SceneBackgroundEstimatesStayBounded) {
  const auto sc = square_cross_scene(8, 0.8);
  NeuroOptions o;
  o.tf = 300.0;
  const auto run = run_recognition(sc.grid, harmonized(), o, sc.theta1_true);
  for (std::size_t c = 0; c < 64; ++c)
    if (sc.grid.P1(c % 8, c / 8) == 0.0 && sc.grid.P2(c % 8, c / 8) == 0.0)
      EXPECT_TRUE(estimates_bounded(run, c)) << "cell " << c;
}

TEST(Recognition, BlowupFaultNamesCell) {
  const std::size_t N = 4;
  const Matrix P1 = square_pattern(N, 0, 1);
  const PatternGrid g = PatternGrid::make(P1, Matrix::Zero(N, N), P1 * 1e9);
  NeuroOptions o;
  o.tf = 5.0;
  try {
    run_recognition(g, harmonized(), o);
    FAIL() << "expected blow-up";
  } catch (const NeuroBlowup& e) {
    EXPECT_LT(e.cell(), N * N);
    EXPECT_GT(e.time(), 0.0);
  }
}

namespace {

// Same drive for every cell: a template drive linear in theta and a fixed image drive.
class UniformDrive : public DriveProvider {
 public:
  explicit UniformDrive(std::size_t N) : n_(N * N) {}
  std::size_t cells() const override { return n_; }
  void prepare(double t_mid) override { t_ = t_mid; }
  void evaluate(const std::vector<double>& th1, const std::vector<double>& th2,
                CellDrives& out) override {
    const double on = impulse_train(t_, 2.0, 20.0, 1.0);
    for (std::size_t k = 0; k < n_; ++k) {
      out.image[k] = on * 0.9;
      out.t1[k] = on * 1.5 * std::max(th1[k], 0.0);
      out.t2[k] = on * 0.5 * std::max(th2[k], 0.0);
    }
  }
  bool own_pulse(std::size_t) const override { return impulse_train(t_, 2.0, 20.0, 1.0) != 0.0; }

 private:
  std::size_t n_;
  double t_ = 0.0;
};

}  // namespace

TEST(Recognition, PerCellLawIndependentOfGridSize) {
  NeuroOptions o;
  o.tf = 30.0;
  o.zero_coupling = true;
  o.history_dt = 0.25;
  UniformDrive d8(8), d20(20);
  const auto a = run_recognition(d8, 8, harmonized(), o);
  const auto b = run_recognition(d20, 20, harmonized(), o);
  ASSERT_EQ(a.t.size(), b.t.size());
  for (std::size_t s = 0; s < a.t.size(); ++s) {
    EXPECT_EQ(a.theta1[s][0], b.theta1[s][0]);
    EXPECT_EQ(a.theta2[s][5], b.theta2[s][17]);
  }
  EXPECT_NEAR(a.final_theta1[0], 0.6, 1e-3);
  EXPECT_NEAR(a.final_theta2[0], 1.8, 1e-3);
}

TEST(Recognition, Deterministic) {
  const auto sc = square_cross_scene(6, 0.8);
  NeuroOptions o;
  o.tf = 20.0;
  const auto a = run_recognition(sc.grid, harmonized(), o);
  const auto b = run_recognition(sc.grid, harmonized(), o);
  EXPECT_EQ(a.theta1, b.theta1);
  EXPECT_EQ(a.sync2, b.sync2);
}

TEST(Scene, SquareAndCrossAtDeskScale) {
  const auto sc = square_cross_scene(20, 0.8);
  EXPECT_EQ(sc.grid.P1.sum(), 49.0);
  EXPECT_EQ(sc.grid.P1(2, 2), 1.0);
  EXPECT_EQ(sc.grid.P1(8, 8), 1.0);
  EXPECT_EQ(sc.grid.P1(9, 8), 0.0);
  EXPECT_EQ(sc.grid.P2.sum(), 17.0);
  EXPECT_EQ(sc.grid.P2(14, 10), 1.0);
  EXPECT_EQ(sc.grid.P2(18, 14), 1.0);
  EXPECT_EQ((sc.grid.P1.array() * sc.grid.P2.array()).sum(), 0.0);
  const Matrix C = sc.grid.P1 + sc.grid.P2;
  EXPECT_NEAR((sc.grid.S - blur(C, 0.8)).norm(), 0.0, 1e-12);
}
