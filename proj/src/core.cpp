#include "monest/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace monest {

Vector PartitionedState::joined() const {
  Vector x(x1.size() + x2.size());
  x << x1, x2;
  return x;
}

PartitionedState PartitionedState::split(const Vector& x, std::size_t m1) {
  const auto m = static_cast<Eigen::Index>(m1);
  if (m > x.size()) throw std::invalid_argument("split: m1 exceeds state dimension");
  return {x.head(m), x.tail(x.size() - m)};
}

bool Box::contains(const Vector& v, double tol) const {
  if (v.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] < lower[i] - tol || v[i] > upper[i] + tol) return false;
  return true;
}

PlantModel::PlantModel(std::size_t m1, std::size_t m2, StateMap f1, ParamMap f2, StateMap g1,
                       StateMap g2, ParameterBox theta_domain, Vector theta_true,
                       ParamJacobian df2_dtheta)
    : m1_(m1), m2_(m2), f1_(std::move(f1)), f2_(std::move(f2)), g1_(std::move(g1)),
      g2_(std::move(g2)), theta_domain_(std::move(theta_domain)),
      theta_true_(std::move(theta_true)), df2_dtheta_(std::move(df2_dtheta)) {
  if (theta_domain_.lower.size() != theta_domain_.upper.size())
    throw ModelFault("parameter box bounds differ in dimension");
  if (!theta_domain_.contains(theta_true_))
    throw ModelFault("true parameter lies outside its domain");
}

namespace {
Vector checked(Vector v, std::size_t expected, const char* what) {
  if (static_cast<std::size_t>(v.size()) != expected)
    throw ModelFault(std::string(what) + " returned a vector of the wrong dimension");
  return v;
}
}  // namespace

Vector PlantModel::f1(const PartitionedState& x) const {
  return m1_ == 0 ? Vector() : checked(f1_(x), m1_, "f1");
}
Vector PlantModel::f2(const PartitionedState& x, const Vector& theta) const {
  return checked(f2_(x, theta), m2_, "f2");
}
Vector PlantModel::g1(const PartitionedState& x) const {
  return m1_ == 0 ? Vector() : checked(g1_(x), m1_, "g1");
}
Vector PlantModel::g2(const PartitionedState& x) const { return checked(g2_(x), m2_, "g2"); }

Matrix PlantModel::df2_dtheta(const PartitionedState& x, const Vector& theta) const {
  if (df2_dtheta_) return df2_dtheta_(x, theta);
  Matrix J(m2_, theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double step = 1e-5 * (1.0 + std::abs(theta[j]));
    Vector tp = theta, tm = theta;
    tp[j] += step;
    tm[j] -= step;
    J.col(j) = (f2(x, tp) - f2(x, tm)) / (2.0 * step);
  }
  return J;
}

Vector PlantModel::drift(const Vector& x, const Vector& theta) const {
  const auto px = split(x);
  Vector out(n());
  out << f1(px), f2(px, theta);
  return out;
}

Vector PlantModel::gain(const Vector& x) const {
  const auto px = split(x);
  Vector out(n());
  out << g1(px), g2(px);
  return out;
}

PhiFunction PhiFunction::linear(double K) {
  return {[K](double p) { return K * p; }, [K](double p) { return 0.5 * K * p * p; }};
}

void LocalMonotoneAtlas::validate() const {
  for (std::size_t i = 0; i < balls.size(); ++i) {
    const auto& b = balls[i];
    if (!(b.inner_radius > 0.0 && b.inner_radius < b.radius))
      throw ModelFault("atlas ball " + std::to_string(i) + ": need 0 < inner radius < radius");
    for (std::size_t j = 0; j < balls.size(); ++j) {
      if (i == j) continue;
      const double dist = (b.center - balls[j].center).norm();
      if (!(dist > b.radius + balls[j].inner_radius))
        throw ModelFault("atlas balls " + std::to_string(i) + " and " + std::to_string(j) +
                         " overlap at activation radii");
    }
  }
}

Matrix numeric_jacobian_x(const VectorMap& map, const Vector& x, double t) {
  const Vector f0 = map(x, t);
  Matrix J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = 1e-5 * (1.0 + std::abs(x[j]));
    Vector xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    J.col(j) = (map(xp, t) - map(xm, t)) / (2.0 * step);
  }
  return J;
}

Vector numeric_partial_t(const VectorMap& map, const Vector& x, double t) {
  const double step = 1e-5 * (1.0 + std::abs(t));
  return (map(x, t + step) - map(x, t - step)) / (2.0 * step);
}

Vector numeric_gradient_x(const ScalarMap& map, const Vector& x, double t) {
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double step = 1e-5 * (1.0 + std::abs(x[j]));
    Vector xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    g[j] = (map(xp, t) - map(xm, t)) / (2.0 * step);
  }
  return g;
}

double numeric_partial_t(const ScalarMap& map, const Vector& x, double t) {
  const double step = 1e-5 * (1.0 + std::abs(t));
  return (map(x, t + step) - map(x, t - step)) / (2.0 * step);
}

Matrix alpha_jacobian(const MonotoneParametrization& p, const Vector& x, double t) {
  return p.dalpha_dx ? p.dalpha_dx(x, t) : numeric_jacobian_x(p.alpha, x, t);
}
Vector alpha_time_partial(const MonotoneParametrization& p, const Vector& x, double t) {
  return p.dalpha_dt ? p.dalpha_dt(x, t) : numeric_partial_t(p.alpha, x, t);
}
Matrix Psi_jacobian(const MonotoneParametrization& p, const Vector& x, double t) {
  const auto& r = p.realizability;
  return r.dPsi_dx ? r.dPsi_dx(x, t) : numeric_jacobian_x(r.Psi, x, t);
}
Vector Psi_time_partial(const MonotoneParametrization& p, const Vector& x, double t) {
  const auto& r = p.realizability;
  return r.dPsi_dt ? r.dPsi_dt(x, t) : numeric_partial_t(r.Psi, x, t);
}

Vector f_theta_gradient(const MonotoneParametrization& p, const Vector& x, const Vector& theta,
                        double t) {
  if (p.df_dtheta) return p.df_dtheta(x, theta, t);
  Vector g(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double step = 1e-5 * (1.0 + std::abs(theta[j]));
    Vector tp = theta, tm = theta;
    tp[j] += step;
    tm[j] -= step;
    g[j] = (p.f(x, tp, t) - p.f(x, tm, t)) / (2.0 * step);
  }
  return g;
}

namespace {

struct MonoSample {
  Vector x, theta, theta_prime;
  double t = 0.0;
};

Vector uniform_in(const Box& box, std::mt19937_64& rng) {
  Vector v(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i) {
    std::uniform_real_distribution<double> u(box.lower[i], box.upper[i]);
    v[i] = u(rng);
  }
  return v;
}

Vector corner(const Box& box, std::size_t mask) {
  Vector v(box.dim());
  for (std::size_t i = 0; i < box.dim(); ++i)
    v[i] = (mask >> i) & 1U ? box.upper[i] : box.lower[i];
  return v;
}

}  // namespace

MonotonicityReport check_monotonicity(const MonotoneParametrization& p,
                                      const SamplingDomain& domain,
                                      const ParameterBox& theta_box, std::size_t n_samples,
                                      std::uint64_t seed, bool parallel) {
  if (n_samples == 0) throw std::invalid_argument("check_monotonicity: n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(domain.t0, std::max(domain.t0, domain.t1));
  std::vector<MonoSample> samples;
  samples.reserve(n_samples + 64);
  for (std::size_t s = 0; s < n_samples; ++s) {
    MonoSample m;
    m.x = uniform_in(domain.x, rng);
    m.theta = uniform_in(theta_box, rng);
    m.theta_prime = uniform_in(theta_box, rng);
    m.t = ut(rng);
    samples.push_back(std::move(m));
  }
  // Box corners: every x corner against every ordered pair of distinct theta corners.
  const std::size_t nx = domain.x.dim(), nt = theta_box.dim();
  if (nx <= 6 && nt <= 3) {
    for (std::size_t cx = 0; cx < (1U << nx); ++cx)
      for (std::size_t a = 0; a < (1U << nt); ++a)
        for (std::size_t b = 0; b < (1U << nt); ++b)
          if (a != b)
            samples.push_back({corner(domain.x, cx), corner(theta_box, a),
                               corner(theta_box, b), domain.t0});
  }

  const auto n = static_cast<long>(samples.size());
  std::vector<double> violation(samples.size(), 0.0);
  std::vector<double> ratio(samples.size(), -1.0);
#pragma omp parallel for schedule(static) if (parallel) num_threads(monest_threads())
  for (long s = 0; s < n; ++s) {
    const auto& m = samples[static_cast<std::size_t>(s)];
    const double df = p.f(m.x, m.theta_prime, m.t) - p.f(m.x, m.theta, m.t);
    const double a = p.alpha(m.x, m.t).dot(m.theta_prime - m.theta);
    double v = 0.0;
    if (std::abs(a) <= 1e-12) {
      if (std::abs(df) > 1e-12) v = std::abs(df);
    } else {
      ratio[static_cast<std::size_t>(s)] = std::abs(df) / std::abs(a);
      if (std::abs(df) > 1e-12 && df * a < 0.0) v = std::abs(df);
      const double excess = std::abs(df) - p.D * std::abs(a);
      if (excess > 1e-9 * (1.0 + std::abs(df))) v = std::max(v, excess);
    }
    violation[static_cast<std::size_t>(s)] = v;
  }

  MonotonicityReport rep;
  rep.samples = samples.size();
  rep.D1_est = std::numeric_limits<double>::infinity();
  std::size_t worst = samples.size();
  for (std::size_t s = 0; s < samples.size(); ++s) {
    if (ratio[s] >= 0.0) {
      rep.D_est = std::max(rep.D_est, ratio[s]);
      rep.D1_est = std::min(rep.D1_est, ratio[s]);
    }
    if (violation[s] > rep.worst_violation) {
      rep.worst_violation = violation[s];
      worst = s;
    }
  }
  if (!std::isfinite(rep.D1_est)) rep.D1_est = 0.0;
  rep.holds = worst == samples.size();
  if (!rep.holds) {
    rep.witness_x = samples[worst].x;
    rep.witness_theta = samples[worst].theta;
    rep.witness_theta_prime = samples[worst].theta_prime;
    rep.witness_t = samples[worst].t;
  }
  return rep;
}

double realizability_defect(const MonotoneParametrization& p, const ErrorFunctional& err,
                            std::size_t m1, const Vector& x, double t) {
  const auto m = static_cast<Eigen::Index>(m1);
  const Eigen::Index m2 = x.size() - m;
  const Matrix dPsi = Psi_jacobian(p, x, t).rightCols(m2);
  const Matrix dalpha = alpha_jacobian(p, x, t).rightCols(m2);
  const Matrix beta = p.realizability.beta(x, t);
  return (dPsi - err.psi(x, t) * dalpha - beta).cwiseAbs().maxCoeff();
}

double max_realizability_defect(const MonotoneParametrization& p, const ErrorFunctional& err,
                                std::size_t m1, const SamplingDomain& domain,
                                std::size_t n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(domain.t0, std::max(domain.t0, domain.t1));
  double worst = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector x = uniform_in(domain.x, rng);
    worst = std::max(worst, realizability_defect(p, err, m1, x, ut(rng)));
  }
  return worst;
}

double min_lg_psi(const PlantModel& plant, const ErrorFunctional& err,
                  const SamplingDomain& domain, std::size_t n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(domain.t0, std::max(domain.t0, domain.t1));
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector x = uniform_in(domain.x, rng);
    lo = std::min(lo, std::abs(err.grad_x_psi(x, ut(rng)).dot(plant.gain(x))));
  }
  return lo;
}

double gradient_consistency(const ErrorFunctional& err, const SamplingDomain& domain,
                            std::size_t n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ut(domain.t0, std::max(domain.t0, domain.t1));
  double worst = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const Vector x = uniform_in(domain.x, rng);
    const double t = ut(rng);
    const Vector g = err.grad_x_psi(x, t);
    const Vector gn = numeric_gradient_x(err.psi, x, t);
    worst = std::max(worst, (g - gn).norm() / (1.0 + g.norm()));
    const double dt = err.dpsi_dt(x, t);
    const double dtn = numeric_partial_t(err.psi, x, t);
    worst = std::max(worst, std::abs(dt - dtn) / (1.0 + std::abs(dt)));
  }
  return worst;
}

bool check_phi(const PhiFunction& phi, double range, std::size_t n_points) {
  if (phi.phi(0.0) != 0.0 || std::abs(phi.Q(0.0)) > 1e-15) return false;
  for (std::size_t i = 0; i < n_points; ++i) {
    const double p = -range + 2.0 * range * static_cast<double>(i) /
                                  static_cast<double>(std::max<std::size_t>(n_points - 1, 1));
    if (p == 0.0) continue;
    if (!(phi.phi(p) * p > 0.0)) return false;
    const double step = 1e-5 * (1.0 + std::abs(p));
    const double dq = (phi.Q(p + step) - phi.Q(p - step)) / (2.0 * step);
    if (std::abs(dq - phi.phi(p)) > 1e-5 * (1.0 + std::abs(phi.phi(p)))) return false;
  }
  return true;
}

Quadrature gauss_legendre(std::size_t n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const double nd = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (nd + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (std::size_t k = 2; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        const double p2 = ((2.0 * kd - 1.0) * z * p1 - (kd - 1.0) * p0) / kd;
        p0 = p1;
        p1 = p2;
      }
      dp = nd * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // map [-1,1] -> [0,1]
    q.nodes[i] = 0.5 * (1.0 - z);
    q.nodes[n - 1 - i] = 0.5 * (1.0 + z);
    q.weights[i] = 0.5 * w;
    q.weights[n - 1 - i] = 0.5 * w;
  }
  return q;
}

Matrix hadamard_gap(const PlantModel& plant, const PartitionedState& x, const Vector& theta,
                    const Vector& theta_prime, std::size_t quad_points) {
  if (quad_points < 2) throw std::invalid_argument("hadamard_gap: need >= 2 quadrature points");
  const Quadrature q = gauss_legendre(quad_points);
  Matrix F = Matrix::Zero(plant.m2(), theta.size());
  for (std::size_t i = 0; i < quad_points; ++i) {
    const Vector s = theta_prime * q.nodes[i] + theta * (1.0 - q.nodes[i]);
    const Matrix J = plant.df2_dtheta(x, s);
    if (!J.allFinite()) throw ModelFault("hadamard_gap: non-finite Jacobian on segment");
    F += q.weights[i] * J;
  }
  return F;
}

Matrix pe_complete_integrand(const MonotoneParametrization& p, const PlantModel& plant,
                             const Vector& x, const Vector& theta, const Vector& theta_hat,
                             double t, std::size_t quad_points) {
  const Quadrature q = gauss_legendre(std::max<std::size_t>(quad_points, 2));
  Vector F0 = Vector::Zero(theta.size());
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    const Vector s = theta * q.nodes[i] + theta_hat * (1.0 - q.nodes[i]);
    const Vector g = f_theta_gradient(p, x, s, t);
    if (!g.allFinite()) throw ModelFault("pe_complete_integrand: non-finite gradient");
    F0 += q.weights[i] * g;
  }
  Matrix out = F0 * F0.transpose();
  const Matrix beta = p.realizability.beta(x, t);
  if (beta.size() > 0 && beta.cwiseAbs().maxCoeff() > 0.0)
    out += beta * hadamard_gap(plant, plant.split(x), theta, theta_hat, quad_points);
  return out;
}

}  // namespace monest
