#include "monest/plant_brake.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

namespace monest {

void BrakeParams::validate() const {
  for (double v : {sigma0, L, muC, muS, vs, r, m, J, Fn, Ks})
    if (!(v > 0.0)) throw ConfigError("brake parameters must all be positive");
  if (muS < muC) throw ConfigError("brake parameters: muS must be at least muC");
}

RoadProfile RoadProfile::reference() {
  return {{8.0, 16.0, 24.0, 32.0, 40.0}, {0.3, 1.3, 0.7, 0.4, 1.5, 0.6}};
}

RoadProfile RoadProfile::constant(double theta) { return {{}, {theta}}; }

void RoadProfile::validate() const {
  if (theta.size() != s_end.size() + 1)
    throw ConfigError("road profile: need one more theta value than breakpoints");
  for (std::size_t k = 1; k < s_end.size(); ++k)
    if (!(s_end[k] > s_end[k - 1])) throw ConfigError("road profile: breakpoints must increase");
  for (double th : theta)
    if (!(th > 0.0 && th <= 2.0)) throw ConfigError("road profile: theta must lie in (0, 2]");
}

std::size_t RoadProfile::segment(double s) const {
  return static_cast<std::size_t>(std::lower_bound(s_end.begin(), s_end.end(), s) - s_end.begin());
}

double friction_g(double x2, double x3, double theta, const BrakeParams& p) {
  const double q = std::abs(p.r * x2 * x3) / (std::abs(1.0 - x3) * p.vs);
  return theta * (p.muC + (p.muS - p.muC) * std::exp(-q));
}

namespace {

double force_unchecked(double x2, double x3, double theta, const BrakeParams& p) {
  const double k = p.sigma0 / p.L * x3 / (1.0 - x3);
  const double g = friction_g(x2, x3, theta, p);
  return p.Fn * sign(x2) * k * g / (k + g);
}

double kinematic_force(double x3, double theta, double x1, const BrakeParams& p) {
  return force_unchecked(x1 * (1.0 - x3) / p.r, x3, theta, p);
}

double sat(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

double lugre_force(double x2, double x3, double theta, const BrakeParams& p) {
  if (!(x3 > 0.0 && x3 < 1.0)) {
    std::ostringstream os;
    os << "lugre_force: slip " << x3 << " outside (0, 1)";
    throw ModelFault(os.str());
  }
  return force_unchecked(x2, x3, theta, p);
}

double slip_coefficient(double x3, const BrakeParams& p) {
  return (1.0 - x3) / p.m + p.r * p.r / p.J;
}

double optimal_slip(double theta, double x1, const BrakeParams& p) {
  constexpr double lo = 1e-4, hi = 0.999;
  constexpr double tol = 1e-6;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto F = [&](double s) { return kinematic_force(s, theta, x1, p); };

  auto golden = [&](double a, double b) {
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = F(c), fd = F(d);
    while (b - a > tol) {
      if (fc < fd) {
        a = c;
        c = d;
        fc = fd;
        d = a + invphi * (b - a);
        fd = F(d);
      } else {
        b = d;
        d = c;
        fd = fc;
        c = b - invphi * (b - a);
        fc = F(c);
      }
    }
    return 0.5 * (a + b);
  };

  // geometric probe grid to bracket the peak and detect multiple maxima
  constexpr int n = 24;
  double xs[n], fs[n];
  for (int i = 0; i < n; ++i) {
    xs[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
    fs[i] = F(xs[i]);
  }
  const int k = static_cast<int>(std::max_element(fs, fs + n) - fs);
  bool unimodal = true;
  for (int i = 1; i < n; ++i)
    if ((i <= k && fs[i] < fs[i - 1]) || (i > k && fs[i] > fs[i - 1])) unimodal = false;

  double a, b;
  if (unimodal) {
    a = xs[std::max(k - 1, 0)];
    b = xs[std::min(k + 1, n - 1)];
  } else {
    double best = lo, fbest = F(lo);
    for (double s = lo; s <= hi; s += 1e-3) {
      const double f = F(s);
      if (f > fbest) {
        fbest = f;
        best = s;
      }
    }
    a = std::max(lo, best - 1e-3);
    b = std::min(hi, best + 1e-3);
  }
  const double s = golden(a, b);
  // golden section never returns an end point; prefer it when the profile is monotone there
  if (F(a) >= F(s) && a == lo) return lo;
  if (F(b) >= F(s) && b == hi) return hi;
  return s;
}

SlipAlpha slip_alpha(double x1, double x2, double x3, const BrakeParams& p) {
  const double dmu = p.muS - p.muC;
  const double one = 1.0 - x3;
  const double q = std::abs(p.r * x2 * x3) / (std::abs(one) * p.vs);
  const double E = std::exp(-q);
  const double g1 = p.muC + dmu * E;
  const double c = slip_coefficient(x3, p);
  const double q_x2 = p.r * std::abs(x3) / (std::abs(one) * p.vs) * sign(x2);
  // d/dx3 of |x3|/|1-x3| on (0,1) is 1/(1-x3)^2
  const double q_x3 = p.r * std::abs(x2) / (p.vs * one * one);
  SlipAlpha a;
  a.value = c * g1 / x1;
  a.d_x1 = -a.value / x1;
  a.d_x2 = -c * dmu * E * q_x2 / x1;
  a.d_x3 = (-g1 / p.m - c * dmu * E * q_x3) / x1;
  return a;
}

double dominated_sum(double x1, double x2, double x3, double theta, const BrakeParams& p) {
  const SlipAlpha a = slip_alpha(x1, x2, x3, p);
  const double c = slip_coefficient(x3, p);
  const double bracket = -a.d_x1 / p.m + a.d_x2 * p.r / p.J - a.d_x3 * c / x1;
  return bracket * force_unchecked(x2, x3, theta, p);
}

namespace {

double scan_domination(const BrakeParams& p) {
  // F is increasing in theta, so theta = 2 attains the maximum of |sum|.
  constexpr int n1 = 36, n2 = 100, n3 = 999;
  double best = 0.0;
#pragma omp parallel for reduction(max : best) schedule(static) num_threads(monest_threads())
  for (int i = 0; i < n1; ++i) {
    const double x1 = 5.0 + 35.0 * i / (n1 - 1);
    for (int j = 0; j < n2; ++j) {
      const double x2 = 1.0 + 99.0 * j / (n2 - 1);
      for (int k = 1; k <= n3; ++k) {
        const double x3 = 1e-3 * k;
        best = std::max(best, std::abs(dominated_sum(x1, x2, x3, 2.0, p)));
      }
    }
  }
  return best;
}

}  // namespace

double domination_bound(const BrakeParams& p) {
  static std::mutex mu;
  static std::vector<std::pair<BrakeParams, double>> cache;
  auto same = [](const BrakeParams& a, const BrakeParams& b) {
    return a.sigma0 == b.sigma0 && a.L == b.L && a.muC == b.muC && a.muS == b.muS &&
           a.vs == b.vs && a.r == b.r && a.m == b.m && a.J == b.J && a.Fn == b.Fn;
  };
  {
    std::lock_guard<std::mutex> lock(mu);
    for (const auto& [q, v] : cache)
      if (same(q, p)) return v;
  }
  const double v = scan_domination(p);
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace_back(p, v);
  return v;
}

double brake_theta_hat(const Vector& y, const BrakeGains& gains) {
  const double psi = y[kX3] - y[kX3Hat];
  return -gains.gamma * (psi * y[kXi] + y[kThetaI]);
}

double brake_control(const Vector& y, double theta_hat, double x3_star, const BrakeParams& p) {
  const double x3 = y[kX3];
  const double Fh = lugre_force(y[kX2], x3, theta_hat, p);
  return p.J / p.r * (slip_coefficient(x3, p) * Fh - p.Ks * y[kX1] * (x3 - x3_star));
}

double xi_rhs(const Vector& y, double u, const BrakeParams& p, const BrakeGains& gains) {
  const SlipAlpha a = slip_alpha(y[kX1], y[kX2], y[kX3], p);
  const double e = y[kXi] - a.value;
  return -a.d_x2 * u / p.J + a.d_x3 * p.r * u / (p.J * y[kX1]) -
         gains.K_xi * gains.K_dom * sat(e / gains.eps0);
}

Vector brake_rhs(const Vector& y, double u, double theta_road, const BrakeParams& p,
                 const BrakeGains& gains) {
  const double x1 = y[kX1], x2 = y[kX2], x3 = y[kX3];
  const double th_hat = brake_theta_hat(y, gains);
  const double F = lugre_force(x2, x3, theta_road, p);
  const double Fh = lugre_force(x2, x3, th_hat, p);
  const double c = slip_coefficient(x3, p);
  const double psi = x3 - y[kX3Hat];
  Vector d(kBrakeDim);
  d[kX1] = -F / p.m;
  d[kX2] = (F * p.r - u) / p.J;
  d[kX3] = -(c * F - p.r / p.J * u) / x1;
  d[kX3Hat] = -(c * Fh - p.r / p.J * u) / x1 + psi;
  d[kXi] = xi_rhs(y, u, p, gains);
  d[kThetaI] = psi * (y[kXi] - d[kXi]);
  d[kS] = x1;
  return d;
}

BrakeRun brake_experiment(const RoadProfile& profile, const BrakeOptions& o,
                          const BrakeParams& p) {
  p.validate();
  profile.validate();
  const double x1_0 = o.x1_0 > 0.0 ? o.x1_0 : kCalibratedSpeed;
  if (!(x1_0 > o.stop_speed)) throw ConfigError("brake: initial speed must exceed the stop speed");
  if (!(o.x3_0 > 0.0 && o.x3_0 < 1.0)) throw ConfigError("brake: initial slip must lie in (0, 1)");
  if (o.mode == BrakeMode::fixed && !(o.x3_star > 0.0 && o.x3_star < 1.0))
    throw ConfigError("brake: fixed slip set-point must lie in (0, 1)");

  BrakeGains gains = o.gains;
  if (!(gains.K_dom > 0.0)) gains.K_dom = domination_bound(p);

  Vector y0(kBrakeDim);
  y0[kX1] = x1_0;
  y0[kX2] = x1_0 * (1.0 - o.x3_0) / p.r;
  y0[kX3] = o.x3_0;
  y0[kX3Hat] = o.x3_0;
  y0[kXi] = slip_alpha(y0[kX1], y0[kX2], y0[kX3], p).value;
  y0[kThetaI] = -o.theta_hat0 / gains.gamma;
  y0[kS] = 0.0;

  double x3_star = o.x3_star;
  auto select = [&](const Vector& y) {
    if (o.mode == BrakeMode::adaptive)
      x3_star = optimal_slip(std::clamp(brake_theta_hat(y, gains), 0.05, 2.0), y[kX1], p);
  };

  VectorField field{kBrakeDim, [&](double, const Vector& y) {
                      const double u = brake_control(y, brake_theta_hat(y, gains), x3_star, p);
                      return brake_rhs(y, u, profile.at(y[kS]), p, gains);
                    }};

  std::vector<EventSpec> events;
  EventSpec stop;
  stop.id = "stop";
  stop.guard = [&](double, const Vector& y) { return y[kX1] - o.stop_speed; };
  stop.direction = Direction::falling;
  stop.action = EventAction::stop;
  events.push_back(stop);
  for (std::size_t k = 0; k < profile.s_end.size(); ++k) {
    EventSpec seg;
    seg.id = "segment";
    seg.guard = [s = profile.s_end[k]](double, const Vector& y) { return y[kS] - s; };
    seg.direction = Direction::rising;
    events.push_back(seg);
  }

  BrakeRun run;
  run.K_dom = gains.K_dom;
  IntegrateOptions io;
  io.record_stride = o.record_stride;
  io.pre_step = [&](double, const Vector& y) { select(y); };
  io.observer = [&](double t, const Vector& y) {
    const double th = brake_theta_hat(y, gains);
    run.t.push_back(t);
    run.y.push_back(y);
    run.theta_hat.push_back(th);
    run.theta_road.push_back(profile.at(y[kS]));
    run.x3_star.push_back(x3_star);
    run.u.push_back(brake_control(y, th, x3_star, p));
    run.psi.push_back(y[kX3] - y[kX3Hat]);
    run.xi_err.push_back(y[kXi] - slip_alpha(y[kX1], y[kX2], y[kX3], p).value);
    if (!(th > -0.5 && th < 2.5)) run.diverged = true;
  };

  select(y0);
  const Trajectory tr = integrate(field, y0, 0.0, o.t_max, o.h, events, io);
  run.segment_entry.push_back(0.0);
  for (const auto& ev : tr.events) {
    if (ev.id == "stop") run.stopped = true;
    else run.segment_entry.push_back(ev.time);
  }
  run.distance = tr.samples.back()[kS];
  run.stop_time = tr.times.back();
  return run;
}

double calibrate_initial_speed(const RoadProfile& profile, std::span<const Baseline> baselines,
                               const BrakeParams& p, double h, double tol) {
  if (baselines.empty()) throw ConfigError("calibration: no baselines given");
  BrakeOptions o;
  o.mode = BrakeMode::fixed;
  o.h = h;
  o.record_stride = std::size_t{1} << 30;
  auto balance = [&](double v) {
    o.x1_0 = v;
    double sum = 0.0;
    for (const auto& b : baselines) {
      o.x3_star = b.x3_star;
      const BrakeRun r = brake_experiment(profile, o, p);
      if (!r.stopped) throw ModelFault("calibration run did not reach the stop speed");
      sum += r.distance / b.distance;
    }
    return sum - static_cast<double>(baselines.size());
  };
  double lo = o.stop_speed + 1.0, hi = 40.0;
  if (balance(hi) < 0.0) throw ModelFault("calibration: targets beyond reach from 40 m/s");
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (balance(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<SegmentTracking> segment_tracking(const BrakeRun& run, const RoadProfile& profile,
                                              double rel) {
  std::vector<SegmentTracking> out;
  for (std::size_t k = 0; k < run.segment_entry.size(); ++k) {
    SegmentTracking st;
    st.segment = k;
    st.theta = profile.theta[k];
    st.entry = run.segment_entry[k];
    const double end = k + 1 < run.segment_entry.size() ? run.segment_entry[k + 1] : run.stop_time;
    st.duration = end - st.entry;
    for (std::size_t i = 0; i < run.t.size(); ++i) {
      if (run.t[i] < st.entry || run.t[i] > end) continue;
      if (run.theta_road[i] != st.theta) continue;
      if (std::abs(run.theta_hat[i] - st.theta) < rel * st.theta) {
        st.settle = run.t[i] - st.entry;
        break;
      }
    }
    out.push_back(st);
  }
  return out;
}

}  // namespace monest
