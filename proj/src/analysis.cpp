#include "monest/analysis.hpp"
#include "monest/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace monest {

GramianSeries windowed_gramian(const std::vector<double>& times,
                               const std::vector<Matrix>& integrand, double window,
                               bool parallel) {
  const std::size_t n = times.size();
  if (integrand.size() != n || n < 2) throw std::invalid_argument("windowed_gramian: bad series");
  double min_dt = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < n; ++k) min_dt = std::min(min_dt, times[k] - times[k - 1]);
  if (window < 2.0 * min_dt * (1.0 - 1e-9))
    throw std::invalid_argument("windowed_gramian: window shorter than two sample intervals");
  if (window > times.back() - times.front() + 1e-12)
    throw std::invalid_argument("windowed_gramian: window exceeds signal length");

  std::vector<Matrix> prefix(n);
  prefix[0] = Matrix::Zero(integrand[0].rows(), integrand[0].cols());
  for (std::size_t k = 1; k < n; ++k)
    prefix[k] = prefix[k - 1] + 0.5 * (times[k] - times[k - 1]) * (integrand[k] + integrand[k - 1]);

  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < n; ++i)
    if (times[i] + window <= times.back() + 1e-12) starts.push_back(i);

  GramianSeries g;
  g.window = window;
  g.times.resize(starts.size());
  g.min_eigs.resize(starts.size());
  std::vector<double> asym(starts.size(), 0.0);
  const auto ns = static_cast<long>(starts.size());
#pragma omp parallel for schedule(static) if (parallel) num_threads(monest_threads())
  for (long w = 0; w < ns; ++w) {
    const std::size_t i = starts[static_cast<std::size_t>(w)];
    const double tend = times[i] + window;
    auto it = std::upper_bound(times.begin(), times.end(), tend);
    std::size_t j = static_cast<std::size_t>(it - times.begin()) - 1;
    Matrix G = prefix[j] - prefix[i];
    if (j + 1 < n && tend > times[j]) {
      const double lam = (tend - times[j]) / (times[j + 1] - times[j]);
      const Matrix mid = integrand[j] + lam * (integrand[j + 1] - integrand[j]);
      G += 0.5 * (tend - times[j]) * (integrand[j] + mid);
    }
    asym[static_cast<std::size_t>(w)] = (G - G.transpose()).cwiseAbs().maxCoeff();
    const Matrix S = 0.5 * (G + G.transpose());
    double lo;
    if (S.rows() == 1) lo = S(0, 0);
    else lo = Eigen::SelfAdjointEigenSolver<Matrix>(S, Eigen::EigenvaluesOnly).eigenvalues()(0);
    g.times[static_cast<std::size_t>(w)] = times[i];
    g.min_eigs[static_cast<std::size_t>(w)] = lo;
  }
  g.delta_est = g.min_eigs.empty() ? 0.0 : *std::min_element(g.min_eigs.begin(), g.min_eigs.end());
  g.max_asymmetry = asym.empty() ? 0.0 : *std::max_element(asym.begin(), asym.end());
  return g;
}

GramianSeries pe_gramian(const std::vector<double>& times, const std::vector<Vector>& alpha,
                         double window) {
  std::vector<Matrix> m(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) m[k] = alpha[k] * alpha[k].transpose();
  return windowed_gramian(times, m, window);
}

GramianSeries pe_complete_gramian(const std::vector<double>& times,
                                  const std::vector<Vector>& states,
                                  const std::vector<Vector>& theta_hats,
                                  const MonotoneParametrization& p, const PlantModel& plant,
                                  const Vector& theta_true, double window) {
  if (states.size() != times.size() || theta_hats.size() != times.size())
    throw std::invalid_argument("pe_complete_gramian: series lengths differ");
  std::vector<Matrix> m(times.size());
  for (std::size_t k = 0; k < times.size(); ++k)
    m[k] = pe_complete_integrand(p, plant, states[k], theta_true, theta_hats[k], times[k]);
  return windowed_gramian(times, m, window);
}

double Lambda(const PhiFunction& phi, double d) {
  if (d < 0.0) throw std::invalid_argument("Lambda: level must be nonnegative");
  if (d == 0.0) return 0.0;
  auto side = [&](double s) {
    double hi = 1.0;
    while (phi.Q(s * hi) < d) {
      hi *= 2.0;
      if (hi > 1e12) throw ModelFault("Lambda: Q is not radially unbounded on the probe range");
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      if (phi.Q(s * mid) < d) lo = mid;
      else hi = mid;
    }
    return hi;
  };
  return std::max(side(1.0), side(-1.0));
}

namespace {
double gamma_quadratic(const Matrix& Gamma, const Vector& v) {
  if (v.size() == 0) return 0.0;
  return v.dot(Gamma.ldlt().solve(v));
}
}  // namespace

BoundReport performance_bounds(const PhiFunction& phi, double psi0, const Vector& theta_err0,
                               const Matrix& Gamma, double D) {
  if (!(D > 0.0)) throw std::invalid_argument("performance_bounds: D must be positive");
  validate_gain(Gamma);
  const double q0 = phi.Q(psi0);
  const double w = gamma_quadratic(Gamma, theta_err0);
  BoundReport r;
  r.l2_phi_bound = 2.0 * q0 + w / (2.0 * D);
  r.l2_psidot_bound = r.l2_phi_bound;
  r.linf_psi_bound = Lambda(phi, q0 + w / (4.0 * D));
  return r;
}

double trapezoid(const std::vector<double>& times, const std::vector<double>& values) {
  double s = 0.0;
  for (std::size_t k = 1; k < times.size(); ++k)
    s += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
  return s;
}

void observe_performance(BoundReport& r, const PhiFunction& phi, const std::vector<double>& times,
                         const std::vector<double>& psi, const std::vector<double>& psi_dot) {
  std::vector<double> p2(psi.size()), d2(psi_dot.size());
  double linf = 0.0;
  for (std::size_t k = 0; k < psi.size(); ++k) {
    const double v = phi.phi(psi[k]);
    p2[k] = v * v;
    linf = std::max(linf, std::abs(psi[k]));
  }
  for (std::size_t k = 0; k < psi_dot.size(); ++k) d2[k] = psi_dot[k] * psi_dot[k];
  r.l2_phi_observed = trapezoid(times, p2);
  r.l2_psidot_observed = trapezoid(times, d2);
  r.linf_psi_observed = linf;
  r.l2_phi_ok = r.l2_phi_observed <= r.l2_phi_bound;
  r.l2_psidot_ok = r.l2_psidot_observed <= r.l2_psidot_bound;
  r.linf_psi_ok = r.linf_psi_observed <= r.linf_psi_bound;
}

double exp_envelope(double psi0, double K, double D, const Matrix& Gamma,
                    const Vector& theta_err0, double t) {
  if (!(K > 0.0) || !(D > 0.0)) throw std::invalid_argument("exp_envelope: K, D must be positive");
  return std::abs(psi0) * std::exp(-K * t) +
         0.5 * std::sqrt(gamma_quadratic(Gamma, theta_err0) / (K * D));
}

EnvelopeCheck check_envelope(const std::vector<double>& times, const std::vector<double>& psi,
                             double K, double D, const Matrix& Gamma, const Vector& theta_err0) {
  EnvelopeCheck c;
  c.max_excess = -std::numeric_limits<double>::infinity();
  if (psi.empty()) return c;
  const double t0 = times.front();
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double env = exp_envelope(psi.front(), K, D, Gamma, theta_err0, times[k] - t0);
    const double ex = std::abs(psi[k]) - env;
    if (ex > c.max_excess) {
      c.max_excess = ex;
      c.worst_time = times[k];
    }
    if (ex > 0.0) ++c.violations;
  }
  return c;
}

LyapunovReport lyapunov_monitor(const std::vector<double>& times,
                                const std::vector<Vector>& theta_hat,
                                const std::vector<Vector>& theta_true, const Matrix& Gamma,
                                const ParameterBox& omega, const std::vector<bool>& on) {
  LyapunovReport r;
  const std::size_t n = times.size();
  if (theta_hat.size() != n || theta_true.size() != n)
    throw std::invalid_argument("lyapunov_monitor: series lengths differ");
  if (n == 0) return r;
  const auto ldlt = Gamma.ldlt();
  std::vector<double> V(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vector e = theta_hat[k] - theta_true[k];
    V[k] = 0.5 * e.dot(ldlt.solve(e));
    if (!omega.contains(theta_hat[k])) r.exit_omega = true;
  }
  r.max_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (!on.empty() && !(on[k] && on[k + 1])) continue;
    if (theta_true[k] != theta_true[k + 1]) continue;
    r.max_increase = std::max(r.max_increase, V[k + 1] - V[k]);
    ++r.pairs;
  }
  if (r.pairs == 0) r.max_increase = 0.0;
  r.final_err = (theta_hat.back() - theta_true.back()).norm();
  return r;
}

RateFit exp_rate_fit(const std::vector<double>& times, const std::vector<double>& theta_err) {
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < times.size() && k < theta_err.size(); ++k) {
    if (theta_err[k] > 0.0 && std::isfinite(theta_err[k])) {
      xs.push_back(times[k]);
      ys.push_back(std::log(theta_err[k]));
    }
  }
  if (xs.size() < 10) throw std::invalid_argument("exp_rate_fit: fewer than 10 usable samples");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  RateFit f;
  f.used = xs.size();
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  f.lambda_est = -slope;
  if (syy <= 1e-300) {
    f.r_squared = 1.0;
  } else {
    double ssr = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      const double res = ys[k] - (my + slope * (xs[k] - mx));
      ssr += res * res;
    }
    f.r_squared = 1.0 - ssr / syy;
  }
  return f;
}

double theoretical_rate_floor(const Matrix& Gamma, double D1, double delta, double L) {
  validate_gain(Gamma);
  const double g = Eigen::SelfAdjointEigenSolver<Matrix>(Gamma, Eigen::EigenvaluesOnly)
                       .eigenvalues()(0);
  return g * D1 * delta / L;
}

}  // namespace monest
