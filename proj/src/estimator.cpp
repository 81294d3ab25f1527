#include "monest/estimator.hpp"

#include <cmath>
#include <sstream>

namespace monest {

void validate_gain(const Matrix& Gamma) {
  if (Gamma.rows() == 0 || Gamma.rows() != Gamma.cols())
    throw ModelFault("gain matrix must be square and nonempty");
  if ((Gamma - Gamma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Gamma.norm()))
    throw ModelFault("gain matrix must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> es(Gamma);
  if (!(es.eigenvalues().minCoeff() > 0.0)) throw ModelFault("gain matrix must be positive definite");
}

void EstimatorConfig::validate() const { validate_gain(Gamma); }

Vector theta_I_rhs(const FiniteFormTerms& k) {
  Vector r = k.phi_psi * k.alpha + k.dPsi_dt - k.psi * k.dalpha_dt -
             (k.psi * k.Lf1_alpha - k.Lf1_Psi) - (k.psi * k.Lg1_alpha - k.Lg1_Psi) * k.u;
  if (k.beta.size() > 0) r += k.beta * (k.f2_hat + k.g2 * k.u);
  return r;
}

Vector theta_P(const MonotoneParametrization& p, const ErrorFunctional& err, const Vector& x,
               double t) {
  return err.psi(x, t) * p.alpha(x, t) - p.realizability.Psi(x, t);
}

double control_u(const PlantModel& plant, const ErrorFunctional& err, const PhiFunction& phi,
                 const Vector& theta_hat, const Vector& x, double t) {
  const Vector grad = err.grad_x_psi(x, t);
  const double Lg = grad.dot(plant.gain(x));
  if (std::abs(Lg) < err.lg_psi_floor) {
    std::ostringstream os;
    os << "control_u: |L_g psi| = " << std::abs(Lg) << " below floor " << err.lg_psi_floor
       << " at t=" << t << ", x=(" << x.transpose() << ")";
    throw ModelFault(os.str());
  }
  const double Lf = grad.dot(plant.drift(x, theta_hat));
  const double psi = err.psi(x, t);
  return (-Lf - phi.phi(psi) - err.dpsi_dt(x, t)) / Lg;
}

Vector theta_hat(const EstimatorState& state, const EstimatorConfig& cfg, const Vector& x,
                 double t) {
  return cfg.Gamma * (theta_P(cfg.parametrization, cfg.error, x, t) + state.theta_I);
}

FiniteFormTerms finite_form_terms(const MonotoneParametrization& p, const ErrorFunctional& err,
                                  const PhiFunction& phi, const PlantModel& plant,
                                  const Vector& x, double t, const Vector& th, double u) {
  const auto m1 = static_cast<Eigen::Index>(plant.m1());
  const auto px = plant.split(x);
  FiniteFormTerms k;
  k.psi = err.psi(x, t);
  k.phi_psi = phi.phi(k.psi);
  k.u = u;
  k.alpha = p.alpha(x, t);
  k.dPsi_dt = Psi_time_partial(p, x, t);
  k.dalpha_dt = alpha_time_partial(p, x, t);
  const auto d = k.alpha.size();
  if (m1 > 0) {
    const Matrix Ja = alpha_jacobian(p, x, t).leftCols(m1);
    const Matrix JP = Psi_jacobian(p, x, t).leftCols(m1);
    const Vector f1 = plant.f1(px), g1 = plant.g1(px);
    k.Lf1_alpha = Ja * f1;
    k.Lg1_alpha = Ja * g1;
    k.Lf1_Psi = JP * f1;
    k.Lg1_Psi = JP * g1;
  } else {
    k.Lf1_alpha = k.Lg1_alpha = k.Lf1_Psi = k.Lg1_Psi = Vector::Zero(d);
  }
  k.beta = p.realizability.beta(x, t);
  k.f2_hat = plant.f2(px, th);
  k.g2 = plant.g2(px);
  return k;
}

Vector theta_I_rhs(const EstimatorState& state, const EstimatorConfig& cfg,
                   const PlantModel& plant, const Vector& x, double t, double u) {
  const Vector th = theta_hat(state, cfg, x, t);
  return theta_I_rhs(
      finite_form_terms(cfg.parametrization, cfg.error, cfg.phi, plant, x, t, th, u));
}

Vector effective_update_rhs(const Matrix& Gamma, double psi_dot, double phi_psi,
                            const Vector& alpha, const Matrix& beta, const Vector& f2_true,
                            const Vector& f2_hat) {
  Vector v = (psi_dot + phi_psi) * alpha;
  if (beta.size() > 0) v -= beta * (f2_true - f2_hat);
  return Gamma * v;
}

Vector effective_update_rhs(const EstimatorConfig& cfg, const PlantModel& plant, const Vector& x,
                            double t, const Vector& th, double psi_dot, TruthKey key) {
  const auto px = plant.split(x);
  const double psi = cfg.error.psi(x, t);
  return effective_update_rhs(cfg.Gamma, psi_dot, cfg.phi.phi(psi),
                              cfg.parametrization.alpha(x, t),
                              cfg.parametrization.realizability.beta(x, t),
                              plant.f2(px, plant.theta_true(key)), plant.f2(px, th));
}

namespace {
Vector ball_theta_P(const AtlasBall& b, const Vector& x, double t) {
  return theta_P(b.parametrization, b.error, x, t);
}
}  // namespace

EstimatorState init_switching(const LocalMonotoneAtlas& atlas, const Matrix& Gamma,
                              const Vector& theta_hat0, const Vector& x0, double t0, int target) {
  atlas.validate();
  validate_gain(Gamma);
  EstimatorState s;
  const std::size_t nb = atlas.balls.size();
  s.sigma.assign(nb, 0);
  s.C.assign(nb, Vector::Zero(theta_hat0.size()));
  s.last_on_record.resize(nb);
  int active = -1;
  for (std::size_t j = 0; j < nb; ++j) {
    const auto& b = atlas.balls[j];
    s.last_on_record[j] = ball_theta_P(b, x0, t0);
    if ((x0 - b.center).norm() <= b.inner_radius) {
      if (active >= 0) throw ModelFault("initial state activates more than one atlas ball");
      s.sigma[j] = 1;
      active = static_cast<int>(j);
    }
  }
  s.target = active >= 0 ? active : target;
  if (s.target < 0 || static_cast<std::size_t>(s.target) >= nb)
    throw ModelFault("init_switching: no valid target ball");
  s.theta_I = Gamma.ldlt().solve(theta_hat0) - s.last_on_record[s.target];
  return s;
}

int active_ball(const EstimatorState& state) {
  for (std::size_t j = 0; j < state.sigma.size(); ++j)
    if (state.sigma[j] == 1) return static_cast<int>(j);
  return -1;
}

Vector theta_hat(const EstimatorState& state, const Matrix& Gamma, const LocalMonotoneAtlas& atlas,
                 const Vector& x, double t) {
  const int j = active_ball(state);
  if (j >= 0)
    return Gamma * (ball_theta_P(atlas.balls[j], x, t) + state.theta_I + state.C[j]);
  const int h = state.target;
  return Gamma * (state.last_on_record[h] + state.theta_I + state.C[h]);
}

Vector theta_I_rhs(const EstimatorState& state, const Matrix& Gamma, const PhiFunction& phi,
                   const LocalMonotoneAtlas& atlas, const PlantModel& plant, const Vector& x,
                   double t, double u) {
  const int j = active_ball(state);
  if (j < 0) return Vector::Zero(state.theta_I.size());
  const auto& b = atlas.balls[j];
  const Vector th = theta_hat(state, Gamma, atlas, x, t);
  return theta_I_rhs(finite_form_terms(b.parametrization, b.error, phi, plant, x, t, th, u));
}

SwitchingOutcome switching_step(const EstimatorState& state, const LocalMonotoneAtlas& atlas,
                                const Vector& x, double t) {
  SwitchingOutcome out{state, -1, false, false};
  auto& s = out.state;
  for (std::size_t j = 0; j < atlas.balls.size(); ++j) {
    const auto& b = atlas.balls[j];
    const double dist = (x - b.center).norm();
    if (s.sigma[j] == 1 && dist >= b.radius * (1.0 - 1e-9)) {
      s.last_on_record[j] = ball_theta_P(b, x, t);
      s.sigma[j] = 0;
      s.target = static_cast<int>(j);
      out.toggled = true;
    }
  }
  for (std::size_t j = 0; j < atlas.balls.size(); ++j) {
    const auto& b = atlas.balls[j];
    const double dist = (x - b.center).norm();
    if (s.sigma[j] == 0 && dist <= b.inner_radius * (1.0 + 1e-9)) {
      if (active_ball(s) >= 0) throw ModelFault("switching_step: simultaneous ball activation");
      s.C[j] = s.last_on_record[j] - ball_theta_P(b, x, t) + s.C[j];
      s.sigma[j] = 1;
      s.target = static_cast<int>(j);
      out.toggled = true;
    }
  }
  const int a = active_ball(s);
  out.ball = a >= 0 ? a : s.target;
  out.identifying = a >= 0;
  return out;
}

double steering_u1(const ErrorFunctional& err, const Vector& x, double t) {
  const double psi = err.psi(x, t);
  return -x[1] - psi - sign(psi);
}

}  // namespace monest
