#pragma once

#include <cstddef>
#include <vector>

#include "monest/ode.hpp"
#include "monest/plant_neuro.hpp"

namespace monest {

// c[p * D + d] = number of lit template pixels at Manhattan distance d from pixel p,
// D = 2N - 1. Blurred value at p is sum_d c[p, d] exp(-d/theta).
struct DistanceHistogram {
  std::size_t N = 0;
  std::size_t D = 0;
  std::vector<double> c;
};

DistanceHistogram distance_histogram(const Matrix& P);

// Pixels (i + j N) whose pulse is on at t, in increasing index order.
std::vector<std::size_t> active_pixels(const Matrix& tau_delay, double t, double T);

// exp(-1/theta) with the theta <= 0 limit 0.
double blur_ratio(double theta);

// Serial reference: receptive_field_drive for every cell.
void drive_literal(const PatternGrid& grid, double theta0, const std::vector<double>& theta1,
                   const std::vector<double>& theta2, double t, double T, CellDrives& out);

// Moment-cached drive: per active set, M[k, d] = sum_{p active} exp(-dist(k,p)/theta0) c[p, d]
// so that each template drive is a degree 2N-2 polynomial in exp(-1/theta1_hat).
class MomentDrive : public DriveProvider {
 public:
  MomentDrive(const PatternGrid& grid, double theta0, double T, bool parallel = true);

  std::size_t cells() const override { return N_ * N_; }
  void prepare(double t_mid) override;
  void evaluate(const std::vector<double>& theta1, const std::vector<double>& theta2,
                CellDrives& out) override;

  bool own_pulse(std::size_t k) const override { return on_[k] != 0; }

  std::size_t rebuilds() const { return rebuilds_; }

 private:
  void rebuild();

  const PatternGrid& grid_;
  std::size_t N_, D_;
  double T_;
  bool parallel_;
  std::vector<double> weight_;  // exp(-d/theta0), d in [0, D)
  DistanceHistogram h1_, h2_;
  std::vector<std::size_t> active_;
  std::vector<char> on_;
  bool valid_ = false;
  std::vector<double> M1_, M2_, image_;
  std::size_t rebuilds_ = 0;
};

// Literal drive behind the DriveProvider interface, sampled at the step midpoint.
class LiteralDrive : public DriveProvider {
 public:
  LiteralDrive(const PatternGrid& grid, double theta0, double T)
      : grid_(grid), theta0_(theta0), T_(T) {}
  std::size_t cells() const override { return grid_.N * grid_.N; }
  void prepare(double t_mid) override { t_ = t_mid; }
  bool own_pulse(std::size_t k) const override {
    return impulse_train(t_, grid_.tau_delay(k % grid_.N, k / grid_.N), T_, 0.05 * T_) != 0.0;
  }
  void evaluate(const std::vector<double>& theta1, const std::vector<double>& theta2,
                CellDrives& out) override {
    drive_literal(grid_, theta0_, theta1, theta2, t_, T_, out);
  }

 private:
  const PatternGrid& grid_;
  double theta0_, T_;
  double t_ = 0.0;
};

}  // namespace monest
