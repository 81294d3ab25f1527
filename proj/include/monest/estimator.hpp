#pragma once

#include <vector>

#include "monest/core.hpp"

namespace monest {

struct EstimatorConfig {
  Matrix Gamma;
  PhiFunction phi;
  MonotoneParametrization parametrization;
  ErrorFunctional error;

  // Throws ModelFault unless Gamma is symmetric positive definite.
  void validate() const;
};

struct EstimatorState {
  Vector theta_I;
  std::vector<int> sigma;
  std::vector<Vector> C;
  std::vector<Vector> last_on_record;  // theta_P at the last switch-off, per ball
  int target = -1;                     // ball whose estimate is held while steering
};

void validate_gain(const Matrix& Gamma);

// Every term of the integral-state law, for plants that assemble them by hand.
struct FiniteFormTerms {
  double psi = 0.0;
  double phi_psi = 0.0;
  double u = 0.0;
  Vector alpha;
  Vector dPsi_dt;
  Vector dalpha_dt;
  Vector Lf1_alpha, Lf1_Psi;
  Vector Lg1_alpha, Lg1_Psi;
  Matrix beta;  // d x m2
  Vector f2_hat;
  Vector g2;
};

Vector theta_I_rhs(const FiniteFormTerms& terms);

// theta_P = psi*alpha - Psi
Vector theta_P(const MonotoneParametrization& p, const ErrorFunctional& err, const Vector& x,
               double t);

double control_u(const PlantModel& plant, const ErrorFunctional& err, const PhiFunction& phi,
                 const Vector& theta_hat, const Vector& x, double t);

Vector theta_hat(const EstimatorState& state, const EstimatorConfig& cfg, const Vector& x,
                 double t);

FiniteFormTerms finite_form_terms(const MonotoneParametrization& p, const ErrorFunctional& err,
                                  const PhiFunction& phi, const PlantModel& plant,
                                  const Vector& x, double t, const Vector& theta_hat, double u);

Vector theta_I_rhs(const EstimatorState& state, const EstimatorConfig& cfg,
                   const PlantModel& plant, const Vector& x, double t, double u);

// Gamma((psi_dot + phi(psi)) alpha - beta (f2(x,theta) - f2(x,theta_hat)))
Vector effective_update_rhs(const Matrix& Gamma, double psi_dot, double phi_psi,
                            const Vector& alpha, const Matrix& beta, const Vector& f2_true,
                            const Vector& f2_hat);
Vector effective_update_rhs(const EstimatorConfig& cfg, const PlantModel& plant, const Vector& x,
                            double t, const Vector& theta_hat, double psi_dot, TruthKey key);

// Switching supervisor over a local monotone atlas.
EstimatorState init_switching(const LocalMonotoneAtlas& atlas, const Matrix& Gamma,
                              const Vector& theta_hat0, const Vector& x0, double t0, int target);

int active_ball(const EstimatorState& state);

Vector theta_hat(const EstimatorState& state, const Matrix& Gamma, const LocalMonotoneAtlas& atlas,
                 const Vector& x, double t);

Vector theta_I_rhs(const EstimatorState& state, const Matrix& Gamma, const PhiFunction& phi,
                   const LocalMonotoneAtlas& atlas, const PlantModel& plant, const Vector& x,
                   double t, double u);

struct SwitchingOutcome {
  EstimatorState state;
  int ball = -1;             // ball whose control is selected
  bool identifying = false;  // true: u_{0,j}; false: steering u_j
  bool toggled = false;
};

SwitchingOutcome switching_step(const EstimatorState& state, const LocalMonotoneAtlas& atlas,
                                const Vector& x, double t);

// u1 = -x2 - psi - sign(psi) for a two-state plant.
double steering_u1(const ErrorFunctional& err, const Vector& x, double t = 0.0);

}  // namespace monest
