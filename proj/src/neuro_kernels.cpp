#include "monest/neuro_kernels.hpp"

#include <cmath>
#include <cstdlib>

#include "monest/ode.hpp"

namespace monest {

double blur_ratio(double theta) { return theta > 0.0 ? std::exp(-1.0 / theta) : 0.0; }

DistanceHistogram distance_histogram(const Matrix& P) {
  DistanceHistogram h;
  h.N = static_cast<std::size_t>(P.rows());
  h.D = 2 * h.N - 1;
  h.c.assign(h.N * h.N * h.D, 0.0);
  const long n = static_cast<long>(h.N);
  for (long j = 0; j < n; ++j)
    for (long i = 0; i < n; ++i) {
      double* row = h.c.data() + (i + j * n) * h.D;
      for (long m = 0; m < n; ++m)
        for (long r = 0; r < n; ++r)
          if (P(m, r) != 0.0) row[std::abs(i - m) + std::abs(j - r)] += P(m, r);
    }
  return h;
}

std::vector<std::size_t> active_pixels(const Matrix& tau_delay, double t, double T) {
  std::vector<std::size_t> out;
  const std::size_t N = static_cast<std::size_t>(tau_delay.rows());
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t i = 0; i < N; ++i)
      if (impulse_train(t, tau_delay(i, j), T, 0.05 * T) != 0.0) out.push_back(i + j * N);
  return out;
}

void drive_literal(const PatternGrid& grid, double theta0, const std::vector<double>& theta1,
                   const std::vector<double>& theta2, double t, double T, CellDrives& out) {
  const std::size_t cells = grid.N * grid.N;
  out.image.resize(cells);
  out.t1.resize(cells);
  out.t2.resize(cells);
  for (std::size_t k = 0; k < cells; ++k) {
    out.image[k] = receptive_field_drive(grid, DriveSource::image, k, theta0, 0.0, t, T);
    out.t1[k] = receptive_field_drive(grid, DriveSource::template1, k, theta0, theta1[k], t, T);
    out.t2[k] = receptive_field_drive(grid, DriveSource::template2, k, theta0, theta2[k], t, T);
  }
}

MomentDrive::MomentDrive(const PatternGrid& grid, double theta0, double T, bool parallel)
    : grid_(grid),
      N_(grid.N),
      D_(2 * grid.N - 1),
      T_(T),
      parallel_(parallel),
      h1_(distance_histogram(grid.P1)),
      h2_(distance_histogram(grid.P2)) {
  if (!(theta0 > 0.0)) throw ModelFault("MomentDrive: theta0 must be positive");
  weight_.resize(D_);
  for (std::size_t d = 0; d < D_; ++d) weight_[d] = std::exp(-static_cast<double>(d) / theta0);
  const std::size_t cells = N_ * N_;
  M1_.assign(cells * D_, 0.0);
  M2_.assign(cells * D_, 0.0);
  image_.assign(cells, 0.0);
}

void MomentDrive::prepare(double t_mid) {
  auto act = active_pixels(grid_.tau_delay, t_mid, T_);
  if (valid_ && act == active_) return;
  active_ = std::move(act);
  on_.assign(N_ * N_, 0);
  for (std::size_t q : active_) on_[q] = 1;
  rebuild();
  valid_ = true;
}

void MomentDrive::rebuild() {
  ++rebuilds_;
  const long cells = static_cast<long>(N_ * N_);
  const long n = static_cast<long>(N_);
  const std::size_t D = D_;
#pragma omp parallel for schedule(static) if (parallel_) num_threads(monest_threads())
  for (long k = 0; k < cells; ++k) {
    const long ik = k % n, jk = k / n;
    double* m1 = M1_.data() + k * D;
    double* m2 = M2_.data() + k * D;
    for (std::size_t d = 0; d < D; ++d) m1[d] = m2[d] = 0.0;
    double img = 0.0;
    for (std::size_t p : active_) {
      const long i = static_cast<long>(p) % n, j = static_cast<long>(p) / n;
      const double w = weight_[std::abs(ik - i) + std::abs(jk - j)];
      img += w * grid_.S(i, j);
      const double* c1 = h1_.c.data() + p * D;
      const double* c2 = h2_.c.data() + p * D;
      for (std::size_t d = 0; d < D; ++d) {
        m1[d] += w * c1[d];
        m2[d] += w * c2[d];
      }
    }
    image_[k] = img;
  }
}

namespace {

double horner(const double* m, std::size_t D, double q) {
  double acc = m[D - 1];
  for (std::size_t d = D - 1; d-- > 0;) acc = acc * q + m[d];
  return acc;
}

}  // namespace

void MomentDrive::evaluate(const std::vector<double>& theta1, const std::vector<double>& theta2,
                           CellDrives& out) {
  if (!valid_) throw ModelFault("MomentDrive: prepare() must precede evaluate()");
  const long cells = static_cast<long>(N_ * N_);
  out.image.resize(cells);
  out.t1.resize(cells);
  out.t2.resize(cells);
  const std::size_t D = D_;
#pragma omp parallel for schedule(static) if (parallel_) num_threads(monest_threads())
  for (long k = 0; k < cells; ++k) {
    out.image[k] = image_[k];
    out.t1[k] = horner(M1_.data() + k * D, D, blur_ratio(theta1[k]));
    out.t2[k] = horner(M2_.data() + k * D, D, blur_ratio(theta2[k]));
  }
}

}  // namespace monest
