#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace monest {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Raised when a vector field returns a non-finite value or the step budget runs out.
class IntegrationFault : public std::runtime_error {
 public:
  IntegrationFault(const std::string& what, double t, Vector x)
      : std::runtime_error(what), t_(t), x_(std::move(x)) {}
  double time() const { return t_; }
  const Vector& state() const { return x_; }

 private:
  double t_;
  Vector x_;
};

// A standing modelling assumption failed at a concrete point.
class ModelFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Worker count: MONEST_THREADS if set and positive, else the OpenMP default.
int monest_threads();

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace monest
