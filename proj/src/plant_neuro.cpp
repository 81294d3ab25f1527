#include "monest/plant_neuro.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "monest/neuro_kernels.hpp"
#include "monest/ode.hpp"

namespace monest {

void HRParams::validate() const {
  for (double v : {a, b, c, d, s, x0, eps, I0, gamma, tau, beta, theta0})
    if (!(v > 0.0)) throw ModelFault("HRParams: all parameters must be positive");
}

Matrix default_delays(std::size_t N) {
  Matrix tau(N, N);
  const double n2 = static_cast<double>(N * N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j)
      tau(i, j) = 100.0 * static_cast<double>((i + j * N) % (N * N)) / n2;
  return tau;
}

PatternGrid PatternGrid::make(const Matrix& P1, const Matrix& P2, const Matrix& S) {
  PatternGrid g;
  g.N = static_cast<std::size_t>(P1.rows());
  g.P1 = P1;
  g.P2 = P2;
  g.S = S;
  g.tau_delay = default_delays(g.N);
  g.validate();
  return g;
}

void PatternGrid::validate() const {
  const auto n = static_cast<Eigen::Index>(N);
  for (const Matrix* m : {&P1, &P2, &S, &tau_delay})
    if (m->rows() != n || m->cols() != n)
      throw ModelFault("PatternGrid: every matrix must be N x N");
  for (const Matrix* m : {&P1, &P2})
    for (Eigen::Index k = 0; k < m->size(); ++k) {
      const double v = m->data()[k];
      if (v != 0.0 && v != 1.0) throw ModelFault("PatternGrid: templates must be binary");
    }
  if (!S.allFinite()) throw ModelFault("PatternGrid: image must be finite");
  if (tau_delay.minCoeff() < 0.0 || tau_delay.maxCoeff() > 100.0)
    throw ModelFault("PatternGrid: delays must lie in [0, 100]");
}

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows, const char* what) {
  if (rows.empty()) throw ConfigError(std::string(what) + ": empty grid");
  const std::size_t n = rows.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n)
      throw ConfigError(std::string(what) + ": grid must be square, row " + std::to_string(i + 1) +
                        " has " + std::to_string(rows[i].size()) + " entries");
    for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

Matrix parse_pattern(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    std::vector<double> row;
    for (char ch : line) {
      if (ch == '0' || ch == '1')
        row.push_back(ch == '1' ? 1.0 : 0.0);
      else if (ch != ' ' && ch != '\t' && ch != '\r')
        throw ConfigError(std::string("pattern: unexpected character '") + ch + "'");
    }
    rows.push_back(std::move(row));
  }
  return from_rows(rows, "pattern");
}

Matrix parse_image(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  bool packed = false;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw ConfigError("image: bad number '" + tok + "'");
      }
      if (used != tok.size()) throw ConfigError("image: bad number '" + tok + "'");
      if (tok.size() > 1 && tok.find_first_not_of("01") == std::string::npos) packed = true;
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (packed) return parse_pattern(text);
  return from_rows(rows, "image");
}

Matrix load_pattern(const std::string& path) { return parse_pattern(slurp(path)); }
Matrix load_image(const std::string& path) { return parse_image(slurp(path)); }

Matrix blur(const Matrix& P, double theta) {
  const Eigen::Index n = P.rows();
  Matrix out = Matrix::Zero(n, n);
  const double q = blur_ratio(theta);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double acc = 0.0;
      for (Eigen::Index m = 0; m < n; ++m)
        for (Eigen::Index r = 0; r < n; ++r) {
          if (P(m, r) == 0.0) continue;
          const auto d = std::abs(i - m) + std::abs(j - r);
          acc += (d == 0 ? 1.0 : std::pow(q, static_cast<double>(d))) * P(m, r);
        }
      out(i, j) = acc;
    }
  return out;
}

Matrix square_pattern(std::size_t N, std::size_t lo, std::size_t hi) {
  Matrix P = Matrix::Zero(N, N);
  for (std::size_t i = lo; i <= hi && i < N; ++i)
    for (std::size_t j = lo; j <= hi && j < N; ++j) P(i, j) = 1.0;
  return P;
}

Matrix cross_pattern(std::size_t N, std::size_t ci, std::size_t cj, std::size_t arm) {
  Matrix P = Matrix::Zero(N, N);
  const auto n = static_cast<long>(N);
  for (long k = -static_cast<long>(arm); k <= static_cast<long>(arm); ++k) {
    const long i = static_cast<long>(ci) + k, j = static_cast<long>(cj) + k;
    if (i >= 0 && i < n && cj < N) P(i, cj) = 1.0;
    if (j >= 0 && j < n && ci < N) P(ci, j) = 1.0;
  }
  return P;
}

NeuroScene square_cross_scene(std::size_t N, double theta1_true) {
  if (N < 4) throw ModelFault("square_cross_scene: N >= 4 required");
  const auto at = [N](double f) { return static_cast<std::size_t>(std::lround(f * N)); };
  const Matrix P1 = square_pattern(N, at(0.1), at(0.4));
  const Matrix P2 = cross_pattern(N, at(0.7), at(0.7), std::max<std::size_t>(1, at(0.2)));
  const Matrix C = P1.cwiseMax(P2);
  NeuroScene scene{PatternGrid::make(P1, P2, blur(C, theta1_true)), theta1_true};
  return scene;
}

double receptive_field_drive(const PatternGrid& grid, DriveSource source, std::size_t k,
                             double theta0, double theta1, double t, double T) {
  const std::size_t N = grid.N;
  if (k >= N * N) throw ModelFault("receptive_field_drive: cell index out of range");
  if (!(theta0 > 0.0)) throw ModelFault("receptive_field_drive: theta0 must be positive");
  const long ik = static_cast<long>(k % N), jk = static_cast<long>(k / N);
  const Matrix* P = source == DriveSource::template1   ? &grid.P1
                    : source == DriveSource::template2 ? &grid.P2
                                                       : nullptr;
  const double q = blur_ratio(theta1);
  double r = 0.0;
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t i = 0; i < N; ++i) {
      const double pulse = impulse_train(t, grid.tau_delay(i, j), T, 0.05 * T);
      if (pulse == 0.0) continue;
      double s = 0.0;
      if (P == nullptr) {
        s = grid.S(i, j);
      } else {
        for (std::size_t m = 0; m < N; ++m)
          for (std::size_t rr = 0; rr < N; ++rr) {
            if ((*P)(m, rr) == 0.0) continue;
            const long d = std::abs(static_cast<long>(i) - static_cast<long>(m)) +
                           std::abs(static_cast<long>(rr) - static_cast<long>(j));
            s += (d == 0 ? 1.0 : std::pow(q, static_cast<double>(d))) * (*P)(m, rr);
          }
      }
      const long dist = std::abs(ik - static_cast<long>(i)) + std::abs(jk - static_cast<long>(j));
      r += std::exp(-static_cast<double>(dist) / theta0) * s * pulse;
    }
  return r;
}

std::array<double, 3> hr_rhs(const HRUnit& x, double u, const HRParams& p) {
  return {-p.a * x.x1 * x.x1 * x.x1 + p.b * x.x1 * x.x1 + x.x4 + x.x2 - x.x3 + u + p.I0,
          p.c - p.d * x.x1 * x.x1 - x.x2, p.eps * (p.s * (x.x1 + p.x0) - x.x3)};
}

double sensory_rhs(double x4, double drive, const HRParams& p, SensoryForm form) {
  if (form == SensoryForm::template_printed) return (-p.beta * x4 + drive) / p.tau;
  return (p.beta - x4 + drive) / p.tau;
}

Theta1Update theta1_update(double x4, double x4_template, double theta_I, const HRParams& p) {
  const double psi = x4 - x4_template;
  const double rate = p.harmonize_sensory_lag ? 1.0 / p.tau : p.beta / p.tau;
  return {psi + theta_I, rate * psi};
}

Vector neuro_initial_state(std::size_t cells, double theta_I0) {
  Vector y = Vector::Zero(static_cast<Eigen::Index>(cells * kNeuroCellDim));
  for (std::size_t k = 0; k < cells; ++k) {
    double* c = y.data() + k * kNeuroCellDim;
    for (int base : {kNx1, kNh1, kNb1}) {
      c[base] = -1.6;
      c[base + 1] = -11.83;
      c[base + 2] = 1.46;
      c[base + 3] = 0.0;
    }
    c[kNhI] = theta_I0;
    c[kNbI] = theta_I0;
  }
  return y;
}

void neuro_rhs(const Vector& y, const CellDrives& drives, const HRParams& p, bool zero_coupling,
               Vector& dy) {
  const std::size_t cells = static_cast<std::size_t>(y.size()) / kNeuroCellDim;
  dy.resize(y.size());
  const double g = zero_coupling ? 0.0 : p.gamma;
  const SensoryForm tform =
      p.harmonize_sensory_lag ? SensoryForm::template_harmonized : SensoryForm::template_printed;
  for (std::size_t k = 0; k < cells; ++k) {
    const double* c = y.data() + k * kNeuroCellDim;
    double* o = dy.data() + k * kNeuroCellDim;
    const HRUnit x{c[kNx1], c[kNx2], c[kNx3], c[kNx4]};
    const HRUnit h{c[kNh1], c[kNh2], c[kNh3], c[kNh4]};
    const HRUnit b{c[kNb1], c[kNb2], c[kNb3], c[kNb4]};
    const auto fx = hr_rhs(x, hr_coupling(x.x1, h.x1, b.x1, g), p);
    const auto fh = hr_rhs(h, hr_coupling(h.x1, x.x1, b.x1, g), p);
    const auto fb = hr_rhs(b, hr_coupling(b.x1, x.x1, h.x1, g), p);
    for (int i = 0; i < 3; ++i) {
      o[kNx1 + i] = fx[i];
      o[kNh1 + i] = fh[i];
      o[kNb1 + i] = fb[i];
    }
    o[kNx4] = sensory_rhs(x.x4, drives.image[k], p, SensoryForm::input);
    o[kNh4] = sensory_rhs(h.x4, drives.t1[k], p, tform);
    o[kNb4] = sensory_rhs(b.x4, drives.t2[k], p, tform);
    o[kNhI] = theta1_update(x.x4, h.x4, c[kNhI], p).theta_I_rate;
    o[kNbI] = theta1_update(x.x4, b.x4, c[kNbI], p).theta_I_rate;
  }
}

namespace {

void estimates(const Vector& y, std::vector<double>& t1, std::vector<double>& t2) {
  const std::size_t cells = t1.size();
  for (std::size_t k = 0; k < cells; ++k) {
    const double* c = y.data() + k * kNeuroCellDim;
    t1[k] = c[kNx4] - c[kNh4] + c[kNhI];
    t2[k] = c[kNx4] - c[kNb4] + c[kNbI];
  }
}

}  // namespace

bool estimates_bounded(const NeuroRun& run, std::size_t k, double rel) {
  const double last = run.peak_last_period.at(k), prev = run.peak_prev_period.at(k);
  return std::isfinite(last) && last <= (1.0 + rel) * prev;
}

NeuroRun run_recognition(const PatternGrid& grid, const HRParams& p, const NeuroOptions& options,
                         double theta_true) {
  grid.validate();
  if (grid.N < 4) throw ModelFault("run_recognition: N >= 4 required");
  MomentDrive drive(grid, p.theta0, options.T, options.parallel);
  return run_recognition(drive, grid.N, p, options, theta_true);
}

NeuroRun run_recognition(DriveProvider& drive, std::size_t N, const HRParams& p,
                         const NeuroOptions& options, double theta_true) {
  p.validate();
  const std::size_t cells = drive.cells();
  if (!(options.h > 0.0) || !(options.tf >= 0.0))
    throw ModelFault("run_recognition: need h > 0 and tf >= 0");

  NeuroRun run;
  run.N = N;
  run.sync1.assign(cells, 0.0);
  run.sync2.assign(cells, 0.0);
  run.signal_rms.assign(cells, 0.0);
  run.theta1_max_abs.assign(cells, 0.0);
  run.theta2_max_abs.assign(cells, 0.0);
  run.lyapunov_max_increase1.assign(cells, 0.0);
  run.peak_prev_period.assign(cells, 0.0);
  run.peak_last_period.assign(cells, 0.0);

  std::vector<double> th1(cells), th2(cells), prev_v(cells, -1.0);
  CellDrives drives;
  drives.image.resize(cells);
  drives.t1.resize(cells);
  drives.t2.resize(cells);
  Vector dy;

  VectorField field;
  field.dimension = cells * kNeuroCellDim;
  field.rhs = [&](double, const Vector& y) {
    estimates(y, th1, th2);
    drive.evaluate(th1, th2, drives);
    neuro_rhs(y, drives, p, options.zero_coupling, dy);
    return dy;
  };

  const double window_start = (1.0 - options.sync_fraction) * options.tf;
  std::size_t window_n = 0;
  std::vector<double> e1(cells, 0.0), e2(cells, 0.0), sig(cells, 0.0);

  auto monitor = [&](double t, const Vector& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (!(std::abs(y[i]) <= options.blowup)) {
        const std::size_t k = static_cast<std::size_t>(i) / kNeuroCellDim;
        throw NeuroBlowup("neuro state blow-up in cell " + std::to_string(k), k, t);
      }
    estimates(y, th1, th2);
    std::vector<double>* peak = t >= options.tf - options.T ? &run.peak_last_period
                                : t >= options.tf - 2.0 * options.T ? &run.peak_prev_period
                                                                    : nullptr;
    for (std::size_t k = 0; k < cells; ++k) {
      if (peak) (*peak)[k] = std::max({(*peak)[k], std::abs(th1[k]), std::abs(th2[k])});
      run.theta1_max_abs[k] = std::max(run.theta1_max_abs[k], std::abs(th1[k]));
      run.theta2_max_abs[k] = std::max(run.theta2_max_abs[k], std::abs(th2[k]));
      if (theta_true > 0.0) {
        const double v = (th1[k] - theta_true) * (th1[k] - theta_true);
        if (prev_v[k] >= 0.0)
          run.lyapunov_max_increase1[k] = std::max(run.lyapunov_max_increase1[k], v - prev_v[k]);
        prev_v[k] = v;
      }
    }
    if (t >= window_start) {
      ++window_n;
      for (std::size_t k = 0; k < cells; ++k) {
        const double* c = y.data() + k * kNeuroCellDim;
        e1[k] += (c[kNx1] - c[kNh1]) * (c[kNx1] - c[kNh1]);
        e2[k] += (c[kNx1] - c[kNb1]) * (c[kNx1] - c[kNb1]);
        sig[k] += c[kNx1] * c[kNx1];
      }
    }
  };

  IntegrateOptions io;
  io.record_stride = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                  std::llround(options.history_dt / options.h)));
  run.local_theta1.assign(cells, 0.0);
  run.local_theta2.assign(cells, 0.0);
  run.local_time.assign(cells, -1.0);
  io.pre_step = [&](double t, const Vector& y) {
    monitor(t, y);
    drive.prepare(t + 0.5 * options.h);
    for (std::size_t k = 0; k < cells; ++k)
      if (drive.own_pulse(k)) {
        const double* c = y.data() + k * kNeuroCellDim;
        run.local_theta1[k] = c[kNx4] - c[kNh4] + c[kNhI];
        run.local_theta2[k] = c[kNx4] - c[kNb4] + c[kNbI];
        run.local_time[k] = t;
      }
  };
  io.observer = [&](double t, const Vector& y) {
    estimates(y, th1, th2);
    run.t.push_back(t);
    run.theta1.push_back(th1);
    run.theta2.push_back(th2);
    run.x1_probe.push_back(y[kNx1]);
  };

  const Vector y0 = neuro_initial_state(cells, options.theta_I0);
  const Trajectory traj = integrate(field, y0, 0.0, options.tf, options.h, {}, io);
  const Vector& yf = traj.samples.empty() ? y0 : traj.samples.back();
  monitor(options.tf, yf);

  for (std::size_t k = 0; k < cells; ++k) {
    const double n = std::max<std::size_t>(window_n, 1);
    run.sync1[k] = std::sqrt(e1[k] / n);
    run.sync2[k] = std::sqrt(e2[k] / n);
    run.signal_rms[k] = std::sqrt(sig[k] / n);
  }
  estimates(yf, th1, th2);
  run.final_theta1 = th1;
  run.final_theta2 = th2;
  return run;
}

}  // namespace monest
