#pragma once

#include <cstddef>
#include <vector>

#include "monest/core.hpp"

namespace monest {

struct GramianSeries {
  double window = 0.0;
  std::vector<double> times;     // window start times
  std::vector<double> min_eigs;  // smallest eigenvalue per window
  double delta_est = 0.0;
  double max_asymmetry = 0.0;
};

// Trapezoidal windowed integrals of a sampled matrix signal. Window end points falling
// between samples are handled by linear interpolation of the integrand.
GramianSeries windowed_gramian(const std::vector<double>& times,
                               const std::vector<Matrix>& integrand, double window,
                               bool parallel = true);

GramianSeries pe_gramian(const std::vector<double>& times, const std::vector<Vector>& alpha,
                         double window);

GramianSeries pe_complete_gramian(const std::vector<double>& times,
                                  const std::vector<Vector>& states,
                                  const std::vector<Vector>& theta_hats,
                                  const MonotoneParametrization& p, const PlantModel& plant,
                                  const Vector& theta_true, double window);

struct BoundReport {
  double l2_phi_bound = 0.0;
  double l2_psidot_bound = 0.0;
  double linf_psi_bound = 0.0;
  double l2_phi_observed = 0.0;
  double l2_psidot_observed = 0.0;
  double linf_psi_observed = 0.0;
  bool l2_phi_ok = true;
  bool l2_psidot_ok = true;
  bool linf_psi_ok = true;

  bool satisfied() const { return l2_phi_ok && l2_psidot_ok && linf_psi_ok; }
};

// Largest |psi| with Q(psi) = d.
double Lambda(const PhiFunction& phi, double d);

BoundReport performance_bounds(const PhiFunction& phi, double psi0, const Vector& theta_err0,
                               const Matrix& Gamma, double D);

// Fills the observed fields from a sampled run and sets the pass flags.
void observe_performance(BoundReport& report, const PhiFunction& phi,
                         const std::vector<double>& times, const std::vector<double>& psi,
                         const std::vector<double>& psi_dot);

double trapezoid(const std::vector<double>& times, const std::vector<double>& values);

double exp_envelope(double psi0, double K, double D, const Matrix& Gamma,
                    const Vector& theta_err0, double t);

struct EnvelopeCheck {
  std::size_t violations = 0;
  double max_excess = 0.0;  // largest |psi| - envelope, negative when all clear
  double worst_time = 0.0;
};

EnvelopeCheck check_envelope(const std::vector<double>& times, const std::vector<double>& psi,
                             double K, double D, const Matrix& Gamma, const Vector& theta_err0);

struct LyapunovReport {
  double max_increase = 0.0;
  bool exit_omega = false;
  double final_err = 0.0;
  std::size_t pairs = 0;
};

// V = 1/2 |theta_hat - theta|^2 in the Gamma^{-1} metric. Pairs are skipped when either
// sample is off (mask false) or the true parameter changes between them.
LyapunovReport lyapunov_monitor(const std::vector<double>& times,
                                const std::vector<Vector>& theta_hat,
                                const std::vector<Vector>& theta_true, const Matrix& Gamma,
                                const ParameterBox& omega, const std::vector<bool>& on = {});

struct RateFit {
  double lambda_est = 0.0;
  double r_squared = 0.0;
  std::size_t used = 0;
};

RateFit exp_rate_fit(const std::vector<double>& times, const std::vector<double>& theta_err);

// Gamma D1 delta / L with Gamma replaced by its smallest eigenvalue.
double theoretical_rate_floor(const Matrix& Gamma, double D1, double delta, double L);

}  // namespace monest
