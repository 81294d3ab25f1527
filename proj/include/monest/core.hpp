#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "monest/types.hpp"

namespace monest {

struct PartitionedState {
  Vector x1;  // uncertainty-independent
  Vector x2;  // uncertainty-dependent

  std::size_t n() const { return static_cast<std::size_t>(x1.size() + x2.size()); }
  Vector joined() const;
  static PartitionedState split(const Vector& x, std::size_t m1);
};

// Axis-aligned box, used both for Omega_theta and for state sampling domains.
struct Box {
  Vector lower;
  Vector upper;

  std::size_t dim() const { return static_cast<std::size_t>(lower.size()); }
  bool contains(const Vector& v, double tol = 0.0) const;
};
using ParameterBox = Box;

// Only code that plays the role of the physical world constructs one of these.
struct TruthKey {
  explicit TruthKey() = default;
};

class PlantModel {
 public:
  using StateMap = std::function<Vector(const PartitionedState&)>;
  using ParamMap = std::function<Vector(const PartitionedState&, const Vector& theta)>;
  using ParamJacobian = std::function<Matrix(const PartitionedState&, const Vector& theta)>;

  PlantModel(std::size_t m1, std::size_t m2, StateMap f1, ParamMap f2, StateMap g1, StateMap g2,
             ParameterBox theta_domain, Vector theta_true, ParamJacobian df2_dtheta = {});

  std::size_t m1() const { return m1_; }
  std::size_t m2() const { return m2_; }
  std::size_t n() const { return m1_ + m2_; }
  std::size_t d() const { return theta_domain_.dim(); }
  const ParameterBox& theta_domain() const { return theta_domain_; }
  const Vector& theta_true(TruthKey) const { return theta_true_; }

  PartitionedState split(const Vector& x) const { return PartitionedState::split(x, m1_); }
  Vector f1(const PartitionedState& x) const;
  Vector f2(const PartitionedState& x, const Vector& theta) const;
  Vector g1(const PartitionedState& x) const;
  Vector g2(const PartitionedState& x) const;
  // m2 x d Jacobian of f2 in theta; central differences when no analytic form was given.
  Matrix df2_dtheta(const PartitionedState& x, const Vector& theta) const;

  // Joined drift f(x, theta) = (f1, f2) and input gain g(x) = (g1, g2).
  Vector drift(const Vector& x, const Vector& theta) const;
  Vector gain(const Vector& x) const;

 private:
  std::size_t m1_, m2_;
  StateMap f1_;
  ParamMap f2_;
  StateMap g1_, g2_;
  ParameterBox theta_domain_;
  Vector theta_true_;
  ParamJacobian df2_dtheta_;
};

using ScalarMap = std::function<double(const Vector& x, double t)>;
using VectorMap = std::function<Vector(const Vector& x, double t)>;
using MatrixMap = std::function<Matrix(const Vector& x, double t)>;

struct ErrorFunctional {
  ScalarMap psi;
  VectorMap grad_x_psi;
  ScalarMap dpsi_dt;
  double lg_psi_floor = 1e-6;
};

struct RealizabilityPair {
  VectorMap Psi;    // d
  MatrixMap beta;   // d x m2
  MatrixMap dPsi_dx;  // d x n; optional
  VectorMap dPsi_dt;  // d; optional
};

struct MonotoneParametrization {
  std::function<double(const Vector& x, const Vector& theta, double t)> f;
  VectorMap alpha;
  double D = 1.0;
  double D1 = 1.0;
  RealizabilityPair realizability;
  MatrixMap dalpha_dx;  // d x n; optional
  VectorMap dalpha_dt;  // d; optional
  // Row gradient of f in theta (length d); optional.
  std::function<Vector(const Vector& x, const Vector& theta, double t)> df_dtheta;
};

struct PhiFunction {
  std::function<double(double)> phi;
  std::function<double(double)> Q;

  static PhiFunction linear(double K);
};

using ControlLaw = std::function<double(const Vector& x, double t)>;

struct AtlasBall {
  Vector center;
  double radius = 0.0;
  double inner_radius = 0.0;
  MonotoneParametrization parametrization;
  ErrorFunctional error;
  ControlLaw steering;
};

struct LocalMonotoneAtlas {
  std::vector<AtlasBall> balls;

  // Throws ModelFault unless every ball has inner < outer radius and no ball can be
  // entered at its inner radius while another is still active.
  void validate() const;
};

// Central-difference partials with step 1e-5*(1+|coordinate|).
Matrix numeric_jacobian_x(const VectorMap& map, const Vector& x, double t);
Vector numeric_partial_t(const VectorMap& map, const Vector& x, double t);
Vector numeric_gradient_x(const ScalarMap& map, const Vector& x, double t);
double numeric_partial_t(const ScalarMap& map, const Vector& x, double t);

Matrix alpha_jacobian(const MonotoneParametrization& p, const Vector& x, double t);
Vector alpha_time_partial(const MonotoneParametrization& p, const Vector& x, double t);
Matrix Psi_jacobian(const MonotoneParametrization& p, const Vector& x, double t);
Vector Psi_time_partial(const MonotoneParametrization& p, const Vector& x, double t);
Vector f_theta_gradient(const MonotoneParametrization& p, const Vector& x, const Vector& theta,
                        double t);

struct SamplingDomain {
  Box x;
  double t0 = 0.0;
  double t1 = 0.0;
};

struct MonotonicityReport {
  bool holds = true;
  double worst_violation = 0.0;
  double D_est = 0.0;
  double D1_est = 0.0;
  std::size_t samples = 0;
  Vector witness_x;
  Vector witness_theta;
  Vector witness_theta_prime;
  double witness_t = 0.0;
};

MonotonicityReport check_monotonicity(const MonotoneParametrization& p,
                                      const SamplingDomain& domain,
                                      const ParameterBox& theta_box, std::size_t n_samples,
                                      std::uint64_t seed = 20240601, bool parallel = true);

// Max entry of |dPsi/dx2 - psi * dalpha/dx2 - beta| at one point.
double realizability_defect(const MonotoneParametrization& p, const ErrorFunctional& err,
                            std::size_t m1, const Vector& x, double t);
double max_realizability_defect(const MonotoneParametrization& p, const ErrorFunctional& err,
                                std::size_t m1, const SamplingDomain& domain,
                                std::size_t n_samples, std::uint64_t seed = 7);

// Smallest sampled |L_g psi|.
double min_lg_psi(const PlantModel& plant, const ErrorFunctional& err,
                  const SamplingDomain& domain, std::size_t n_samples, std::uint64_t seed = 11);
// Largest relative mismatch between supplied and central-difference gradients of psi.
double gradient_consistency(const ErrorFunctional& err, const SamplingDomain& domain,
                            std::size_t n_samples, std::uint64_t seed = 13);
// phi(psi)*psi > 0 off zero, phi(0)=0 and Q' = phi on [-range, range].
bool check_phi(const PhiFunction& phi, double range, std::size_t n_points = 2001);

struct Quadrature {
  std::vector<double> nodes;    // on [0,1]
  std::vector<double> weights;  // sum to 1
};
Quadrature gauss_legendre(std::size_t n);

Matrix hadamard_gap(const PlantModel& plant, const PartitionedState& x, const Vector& theta,
                    const Vector& theta_prime, std::size_t quad_points = 16);

Matrix pe_complete_integrand(const MonotoneParametrization& p, const PlantModel& plant,
                             const Vector& x, const Vector& theta, const Vector& theta_hat,
                             double t, std::size_t quad_points = 16);

}  // namespace monest
