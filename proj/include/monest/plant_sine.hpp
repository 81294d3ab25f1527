#pragma once

#include <vector>

#include "monest/estimator.hpp"
#include "monest/ode.hpp"

namespace monest {

struct SineOptions {
  double x1_star = -2.985;
  double Gamma = 0.5;
  double K = 1.0;
  double theta_hat0 = 0.6;
  // Optional set-point dither x1*(t) = x1* + a sin(w t); off unless a > 0.
  double dither_amplitude = 0.0;
  double dither_omega = 2.0;
  bool include_ball3 = true;
  // Disturbance pulses added to dx2/dt, used to force the state out of the active ball.
  double kick_amplitude = 0.0;
  double kick_period = 10.0;
  double kick_width = 0.05;
  double kick_delay = 5.0;
  double h = 1e-3;
  std::size_t record_stride = 1;
};

struct SineScenario {
  PlantModel plant;
  LocalMonotoneAtlas atlas;
  Matrix Gamma;
  PhiFunction phi;
  SineOptions options;
  Vector x0;
  double tf = 0.0;
  int target = 0;
};

// Ball 0 is the identification region around x1 = -2.985, ball 1 its mirror at +2.985.
SineScenario build_sine_scenario(double theta_true, const Vector& x0, double tf,
                                 const SineOptions& options = {});

// The three pieces for one ball: psi = x1 + x2 - x1*(t), alpha = -x1,
// Psi = (x1 - x1*(t)) x2 + x2^2/2, beta = psi.
ErrorFunctional sine_error(double x1_star, double dither_a, double dither_w);
MonotoneParametrization sine_parametrization(double x1_star, double dither_a, double dither_w);

struct ToggleRecord {
  double time = 0.0;
  int ball = -1;
  bool on = false;
  double jump = 0.0;  // |theta_hat(t+) - theta_hat(t-)|
};

struct SineRun {
  std::vector<double> t;
  std::vector<Vector> x;  // (x1, x2)
  std::vector<double> theta_I, theta_hat, psi, psi_dot, u, alpha;
  std::vector<int> active;  // active ball or -1 while steering
  std::vector<ToggleRecord> toggles;
  Trajectory trajectory;
  double theta_true = 0.0;
};

SineRun simulate_sine(const SineScenario& scenario);

}  // namespace monest
