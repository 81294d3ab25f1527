#include "monest/ode.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include <omp.h>

namespace monest {
namespace {

Vector eval(const VectorField& field, double t, const Vector& x) {
  Vector k = field.rhs(t, x);
  if (static_cast<std::size_t>(k.size()) != field.dimension)
    throw IntegrationFault("vector field returned wrong dimension", t, x);
  if (!k.allFinite()) throw IntegrationFault("non-finite vector field value", t, x);
  return k;
}

bool crosses(double g0, double g1, Direction d) {
  const bool up = g0 < 0.0 && g1 >= 0.0;
  const bool down = g0 > 0.0 && g1 <= 0.0;
  switch (d) {
    case Direction::rising: return up;
    case Direction::falling: return down;
    case Direction::any: return up || down;
  }
  return false;
}

}  // namespace

Vector rk4_step(const VectorField& field, double t, const Vector& x, double h) {
  const Vector k1 = eval(field, t, x);
  const Vector k2 = eval(field, t + 0.5 * h, x + 0.5 * h * k1);
  const Vector k3 = eval(field, t + 0.5 * h, x + 0.5 * h * k2);
  const Vector k4 = eval(field, t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate(const VectorField& field, const Vector& x0, double t0, double tf, double h,
                     std::span<const EventSpec> events, const IntegrateOptions& options) {
  if (!(h > 0.0)) throw std::invalid_argument("integrate: step size must be positive");
  if (!(tf > t0)) throw std::invalid_argument("integrate: tf must exceed t0");
  if (static_cast<std::size_t>(x0.size()) != field.dimension)
    throw std::invalid_argument("integrate: initial state has wrong dimension");
  const std::size_t stride = options.record_stride == 0 ? 1 : options.record_stride;

  Trajectory traj;
  auto record = [&](double t, const Vector& x) {
    if (!traj.times.empty() && t <= traj.times.back()) return;
    traj.times.push_back(t);
    traj.samples.push_back(x);
    if (options.observer) options.observer(t, x);
  };

  double t = t0;
  Vector x = x0;
  record(t, x);

  std::vector<double> g(events.size());
  auto refresh_guards = [&] {
    for (std::size_t i = 0; i < events.size(); ++i) g[i] = events[i].guard(t, x);
  };
  refresh_guards();

  const auto n_grid =
      static_cast<std::size_t>(std::ceil((tf - t0) / h - 1e-9));
  const double loc_tol = h * 1e-6;
  std::size_t steps = 0;

  for (std::size_t k = 0; k < n_grid; ++k) {
    const double t_next = (k + 1 == n_grid) ? tf : t0 + static_cast<double>(k + 1) * h;
    if (options.pre_step) options.pre_step(t, x);
    while (t < t_next) {
      const double dt = t_next - t;
      Vector x_new = rk4_step(field, t, x, dt);

      std::size_t hit = events.size();
      double hit_s = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < events.size(); ++i) {
        const double g1 = events[i].guard(t_next, x_new);
        if (!crosses(g[i], g1, events[i].direction)) continue;
        double lo = 0.0, hi = dt;
        while (hi - lo > loc_tol) {
          const double mid = 0.5 * (lo + hi);
          const double gm = events[i].guard(t + mid, rk4_step(field, t, x, mid));
          if (crosses(g[i], gm, events[i].direction)) hi = mid;
          else lo = mid;
        }
        if (hi < hit_s) {
          hit_s = hi;
          hit = i;
        }
      }

      if (hit == events.size()) {
        t = t_next;
        x = std::move(x_new);
        refresh_guards();
        break;
      }

      const EventSpec& ev = events[hit];
      if (hit_s >= dt) {
        t = t_next;
        x = std::move(x_new);
      } else {
        x = rk4_step(field, t, x, hit_s);
        t = t + hit_s;
      }
      traj.events.push_back({t, ev.id});
      if (ev.action == EventAction::stop) {
        record(t, x);
        return traj;
      }
      if (ev.action == EventAction::toggle && ev.on_toggle) ev.on_toggle(t, x);
      record(t, x);
      refresh_guards();
    }
    if (++steps > options.max_steps)
      throw IntegrationFault("integrate: step budget exhausted", t, x);
    if ((k + 1) % stride == 0 || k + 1 == n_grid) record(t, x);
  }
  return traj;
}

double impulse_train(double t, double delay, double period, double width) {
  double phase = std::fmod(t - delay, period);
  if (phase < 0.0) phase += period;
  return phase < width ? 1.0 : 0.0;
}

int monest_threads() {
  if (const char* env = std::getenv("MONEST_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
}

}  // namespace monest
