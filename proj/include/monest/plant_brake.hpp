#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "monest/ode.hpp"

namespace monest {

struct BrakeParams {
  double sigma0 = 200.0;
  double L = 0.25;
  double muC = 0.5;
  double muS = 0.9;
  double vs = 12.5;
  double r = 0.3;
  double m = 200.0;
  double J = 0.23;
  double Fn = 3000.0;
  double Ks = 30.0;

  void validate() const;
};

// theta(s) piecewise constant: theta[k] on (s_end[k-1], s_end[k]], the last entry open-ended.
struct RoadProfile {
  std::vector<double> s_end;
  std::vector<double> theta;  // s_end.size() + 1 entries

  static RoadProfile reference();
  static RoadProfile constant(double theta);

  void validate() const;
  std::size_t segment(double s) const;
  double at(double s) const { return theta[segment(s)]; }
};

// Extended state layout.
enum BrakeIndex : int { kX1 = 0, kX2, kX3, kX3Hat, kXi, kThetaI, kS, kBrakeDim };

struct BrakeGains {
  double gamma = 100.0;
  double K_xi = 10.0;
  double eps0 = 1e-3;
  double K_dom = 0.0;  // 0: computed by domination_bound
};

double friction_g(double x2, double x3, double theta, const BrakeParams& p);

// Steady-state LuGre force. Throws ModelFault for x3 outside (0, 1).
double lugre_force(double x2, double x3, double theta, const BrakeParams& p);

// (1 - x3)/m + r^2/J
double slip_coefficient(double x3, const BrakeParams& p);

// argmax of F over x3 in [1e-4, 0.999] with x2 = x1 (1 - x3) / r.
double optimal_slip(double theta, double x1, const BrakeParams& p);

struct SlipAlpha {
  double value = 0.0;
  double d_x1 = 0.0, d_x2 = 0.0, d_x3 = 0.0;
};

// alpha = (1/x1) c(x3) g(x2, x3, 1) and its partials.
SlipAlpha slip_alpha(double x1, double x2, double x3, const BrakeParams& p);

// (-a_x1/m + a_x2 r/J - a_x3 c/x1) F(theta): the part of d alpha/dt not known to the tracker.
double dominated_sum(double x1, double x2, double x3, double theta, const BrakeParams& p);

// Max of |dominated_sum| over x1 in [5,40], x2 in [1,100], x3 in (0,1), theta in (0,2].
double domination_bound(const BrakeParams& p);

double brake_theta_hat(const Vector& y, const BrakeGains& gains);

// Certainty-equivalence brake torque.
double brake_control(const Vector& y, double theta_hat, double x3_star, const BrakeParams& p);

double xi_rhs(const Vector& y, double u, const BrakeParams& p, const BrakeGains& gains);

// Full extended derivative; gains.K_dom must be set.
Vector brake_rhs(const Vector& y, double u, double theta_road, const BrakeParams& p,
                 const BrakeGains& gains);

enum class BrakeMode { adaptive, fixed };

struct BrakeOptions {
  BrakeMode mode = BrakeMode::adaptive;
  double x3_star = 0.1;  // fixed mode
  double x1_0 = 0.0;     // 0: calibrated default
  double x3_0 = 0.02;
  double theta_hat0 = 0.0;
  double h = 1e-6;
  double t_max = 30.0;
  double stop_speed = 5.0;
  std::size_t record_stride = 1000;
  BrakeGains gains;
};

struct BrakeRun {
  double distance = 0.0;
  double stop_time = 0.0;
  bool stopped = false;
  bool diverged = false;
  std::vector<double> t, theta_hat, theta_road, x3_star, u, psi, xi_err;
  std::vector<Vector> y;
  std::vector<double> segment_entry;  // time the car entered each reached segment
  double K_dom = 0.0;
};

// x1(0) from calibrate_initial_speed on the reference profile with baselines 0.1 -> 57.52 m and
// 0.2 -> 55.32 m.
inline constexpr double kCalibratedSpeed = 30.79;

BrakeRun brake_experiment(const RoadProfile& profile, const BrakeOptions& options,
                          const BrakeParams& p = {});

struct Baseline {
  double x3_star = 0.0;
  double distance = 0.0;
};

// Bisection on x1(0) until the fixed-slip relative errors balance: sum d_i/target_i = n.
// With one baseline this is an exact match.
double calibrate_initial_speed(const RoadProfile& profile, std::span<const Baseline> baselines,
                               const BrakeParams& p = {}, double h = 1e-6, double tol = 1e-3);

struct SegmentTracking {
  std::size_t segment = 0;
  double theta = 0.0;
  double entry = 0.0;
  double settle = -1.0;  // time from entry to the 5% band, -1 if never reached
  double duration = 0.0;
};

// For every segment reached: first time after entry that |theta_hat - theta| < rel*theta.
std::vector<SegmentTracking> segment_tracking(const BrakeRun& run, const RoadProfile& profile,
                                              double rel = 0.05);

}  // namespace monest
