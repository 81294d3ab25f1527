#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "monest/types.hpp"

namespace monest {

struct HRParams {
  double a = 1.0, b = 3.0, c = 1.0, d = 5.0, s = 4.0, x0 = 1.6;
  double eps = 0.001;
  double I0 = 1.4;
  double gamma = 1.0;
  double tau = 0.01;
  double beta = 0.02;
  double theta0 = 1.0;
  // Templates use the input-system lag beta - x4 instead of the printed -beta x4.
  bool harmonize_sensory_lag = false;

  void validate() const;
};

// Square N x N matrices, row index i, column index j, both 0-based.
struct PatternGrid {
  std::size_t N = 0;
  Matrix P1, P2;
  Matrix S;
  Matrix tau_delay;

  // Delays from default_delays(N).
  static PatternGrid make(const Matrix& P1, const Matrix& P2, const Matrix& S);
  void validate() const;
};

// 100 ((i + j N) mod N^2) / N^2
Matrix default_delays(std::size_t N);

// Rows of '0'/'1' characters; whitespace between characters is ignored.
Matrix parse_pattern(const std::string& text);
// Whitespace-separated reals, one row per line. Falls back to parse_pattern for 0/1 rows.
Matrix parse_image(const std::string& text);
Matrix load_pattern(const std::string& path);
Matrix load_image(const std::string& path);

// sum_{m,r} exp(-(|i-m| + |j-r|)/theta) P(m,r); theta <= 0 is the theta -> 0+ limit, P itself.
Matrix blur(const Matrix& P, double theta);

// Filled square with corners (lo, lo) and (hi, hi).
Matrix square_pattern(std::size_t N, std::size_t lo, std::size_t hi);
// Plus sign of half-length arm centred at (ci, cj).
Matrix cross_pattern(std::size_t N, std::size_t ci, std::size_t cj, std::size_t arm);

enum class DriveSource { image, template1, template2 };

// Literal double sum r(theta0, s_k(t)); for templates each pixel carries its blurred template
// value at theta1. Pulses have width 0.05 T.
double receptive_field_drive(const PatternGrid& grid, DriveSource source, std::size_t k,
                             double theta0, double theta1, double t, double T);

// Per-cell state: input unit, template-1 counterpart with its integral, template-2 counterpart
// with its integral.
enum NeuroIndex : int {
  kNx1 = 0, kNx2, kNx3, kNx4,
  kNh1, kNh2, kNh3, kNh4, kNhI,
  kNb1, kNb2, kNb3, kNb4, kNbI,
  kNeuroCellDim
};

struct HRUnit {
  double x1 = 0.0, x2 = 0.0, x3 = 0.0, x4 = 0.0;
};

// (dx1, dx2, dx3) for one unit with coupling input u.
std::array<double, 3> hr_rhs(const HRUnit& unit, double u, const HRParams& p);

// gamma (o1 + o2 - 2 self)
inline double hr_coupling(double self, double o1, double o2, double gamma) {
  return gamma * (o1 + o2 - 2.0 * self);
}

enum class SensoryForm { input, template_printed, template_harmonized };

// input: (beta - x4 + r)/tau;  template_printed: (-beta x4 + r)/tau;
// template_harmonized: same as input.
double sensory_rhs(double x4, double drive, const HRParams& p, SensoryForm form);

struct Theta1Update {
  double theta_hat = 0.0;
  double theta_I_rate = 0.0;
};

// theta_hat = x4 - x4_t + theta_I; rate (beta/tau) psi as printed, psi/tau when harmonized.
Theta1Update theta1_update(double x4, double x4_template, double theta_I, const HRParams& p);

// Drive values for every cell at one instant.
struct CellDrives {
  std::vector<double> image;  // r(theta0, s_k)
  std::vector<double> t1;     // r(theta0, s^_k(theta1_hat))
  std::vector<double> t2;
};

// Supplies the three drives for all cells given the per-cell template estimates. prepare() is
// called once per grid step with the step midpoint, evaluate() on every stage.
class DriveProvider {
 public:
  virtual ~DriveProvider() = default;
  virtual std::size_t cells() const = 0;
  virtual void prepare(double t_mid) = 0;
  virtual void evaluate(const std::vector<double>& theta1, const std::vector<double>& theta2,
                        CellDrives& out) = 0;
  // True while the pulse of the pixel under cell k is on at the last prepare() time.
  virtual bool own_pulse(std::size_t k) const = 0;
};

struct NeuroOptions {
  double T = 100.0;
  double h = 1e-3;
  double tf = 450.0;
  double theta_I0 = 1.0;
  double sync_fraction = 0.2;
  double blowup = 1e6;
  double history_dt = 0.5;
  bool zero_coupling = false;
  bool parallel = true;
};

struct NeuroRun {
  std::size_t N = 0;
  std::vector<double> t;
  // [sample][cell]
  std::vector<std::vector<double>> theta1, theta2;
  std::vector<double> x1_probe;  // x1 of cell 0
  // Per cell over the final window.
  std::vector<double> sync1, sync2;  // RMS(x1 - x^1), RMS(x1 - x-1)
  std::vector<double> signal_rms;    // RMS(x1)
  std::vector<double> theta1_max_abs, theta2_max_abs;
  // max(|theta1|, |theta2|) over [tf - 2T, tf - T) and [tf - T, tf].
  std::vector<double> peak_prev_period, peak_last_period;
  std::vector<double> final_theta1, final_theta2;
  // Estimate at the last step the cell's own pixel pulse was on.
  std::vector<double> local_theta1, local_theta2;
  std::vector<double> local_time;
  std::vector<double> lyapunov_max_increase1;  // per cell, against theta_true
};

struct NeuroScene {
  PatternGrid grid;
  double theta1_true = 0.0;  // blur applied to the composite
};

// Estimates of cell k stay in a bounded domain: the last-period peak does not exceed the
// previous-period peak by more than rel.
bool estimates_bounded(const NeuroRun& run, std::size_t k, double rel = 0.01);

// Square in rows/cols [2, 8] and a cross centred at (14, 14) with arm 4 on N = 20; the image is
// the blurred union. Smaller grids scale both shapes.
NeuroScene square_cross_scene(std::size_t N, double theta1_true);

// Thrown on |x| > blowup; carries the cell.
class NeuroBlowup : public ModelFault {
 public:
  NeuroBlowup(const std::string& what, std::size_t cell, double t)
      : ModelFault(what), cell_(cell), t_(t) {}
  std::size_t cell() const { return cell_; }
  double time() const { return t_; }

 private:
  std::size_t cell_;
  double t_;
};

Vector neuro_initial_state(std::size_t cells, double theta_I0);

// Full coupled rhs for all cells given the stage drives.
void neuro_rhs(const Vector& y, const CellDrives& drives, const HRParams& p, bool zero_coupling,
               Vector& dy);

NeuroRun run_recognition(const PatternGrid& grid, const HRParams& p, const NeuroOptions& options,
                         double theta_true = 0.0);
NeuroRun run_recognition(DriveProvider& drive, std::size_t N, const HRParams& p,
                         const NeuroOptions& options, double theta_true = 0.0);

}  // namespace monest
