#include "monest/plant_sine.hpp"

#include <cmath>
#include <memory>

namespace monest {

namespace {
constexpr double kHalfWidth = 0.395;  // (3.38 - 2.59) / 2
constexpr double kMid = 2.985;
}  // namespace

ErrorFunctional sine_error(double x1_star, double a, double w) {
  ErrorFunctional e;
  e.psi = [=](const Vector& x, double t) { return x[0] + x[1] - (x1_star + a * std::sin(w * t)); };
  e.grad_x_psi = [](const Vector&, double) { return Vector::Ones(2).eval(); };
  e.dpsi_dt = [=](const Vector&, double t) { return -a * w * std::cos(w * t); };
  e.lg_psi_floor = 0.5;
  return e;
}

MonotoneParametrization sine_parametrization(double x1_star, double a, double w) {
  MonotoneParametrization p;
  p.f = [=](const Vector& x, const Vector& th, double t) {
    return x[1] + std::sin(th[0] * x[0]) + a * w * std::cos(w * t);
  };
  p.df_dtheta = [](const Vector& x, const Vector& th, double) {
    Vector g(1);
    g[0] = x[0] * std::cos(th[0] * x[0]);
    return g;
  };
  p.alpha = [](const Vector& x, double) {
    Vector v(1);
    v[0] = -x[0];
    return v;
  };
  p.dalpha_dx = [](const Vector&, double) {
    Matrix J(1, 2);
    J << -1.0, 0.0;
    return J;
  };
  p.dalpha_dt = [](const Vector&, double) { return Vector::Zero(1).eval(); };
  p.D = 1.0;
  p.D1 = 1.0;
  auto star = [=](double t) { return x1_star + a * std::sin(w * t); };
  p.realizability.Psi = [=](const Vector& x, double t) {
    Vector v(1);
    v[0] = (x[0] - star(t)) * x[1] + 0.5 * x[1] * x[1];
    return v;
  };
  p.realizability.dPsi_dx = [=](const Vector& x, double t) {
    Matrix J(1, 2);
    J << x[1], x[0] - star(t) + x[1];
    return J;
  };
  p.realizability.dPsi_dt = [=](const Vector& x, double t) {
    Vector v(1);
    v[0] = -a * w * std::cos(w * t) * x[1];
    return v;
  };
  p.realizability.beta = [=](const Vector& x, double t) {
    Matrix b(1, 1);
    b(0, 0) = x[0] + x[1] - star(t);
    return b;
  };
  return p;
}

SineScenario build_sine_scenario(double theta_true, const Vector& x0, double tf,
                                 const SineOptions& o) {
  if (!(theta_true >= 0.6 && theta_true <= 1.4))
    throw ModelFault("sine scenario: theta_true must lie in [0.6, 1.4]");
  if (x0.size() != 2) throw ModelFault("sine scenario: initial state must have two entries");

  ParameterBox omega{Vector::Constant(1, 0.6), Vector::Constant(1, 1.4)};
  PlantModel plant(
      1, 1, [](const PartitionedState& s) { return s.x2; },
      [](const PartitionedState& s, const Vector& th) {
        Vector v(1);
        v[0] = std::sin(th[0] * s.x1[0]);
        return v;
      },
      [](const PartitionedState&) { return Vector::Zero(1).eval(); },
      [](const PartitionedState&) { return Vector::Ones(1).eval(); }, omega,
      Vector::Constant(1, theta_true), [](const PartitionedState& s, const Vector& th) {
        Matrix J(1, 1);
        J(0, 0) = s.x1[0] * std::cos(th[0] * s.x1[0]);
        return J;
      });

  LocalMonotoneAtlas atlas;
  auto add_ball = [&](double star) {
    AtlasBall b;
    b.center = Vector(2);
    b.center << star, 0.0;
    b.radius = kHalfWidth;
    b.inner_radius = 0.25 * kHalfWidth;
    b.error = sine_error(star, o.dither_amplitude, o.dither_omega);
    b.parametrization = sine_parametrization(star, o.dither_amplitude, o.dither_omega);
    auto err = b.error;
    b.steering = [err](const Vector& x, double t) { return steering_u1(err, x, t); };
    atlas.balls.push_back(std::move(b));
  };
  add_ball(o.x1_star);
  if (o.include_ball3) add_ball(o.x1_star < 0.0 ? kMid : -kMid);
  atlas.validate();

  // steer toward the nearest ball
  int target = 0;
  double best = (x0 - atlas.balls[0].center).norm();
  for (std::size_t j = 1; j < atlas.balls.size(); ++j) {
    const double dj = (x0 - atlas.balls[j].center).norm();
    if (dj < best) {
      best = dj;
      target = static_cast<int>(j);
    }
  }
  return {std::move(plant), std::move(atlas), Matrix::Constant(1, 1, o.Gamma),
          PhiFunction::linear(o.K), o, x0, tf, target};
}

SineRun simulate_sine(const SineScenario& sc) {
  const auto& o = sc.options;
  const Vector theta_true = sc.plant.theta_true(TruthKey{});
  auto sup = std::make_shared<EstimatorState>(init_switching(
      sc.atlas, sc.Gamma, Vector::Constant(1, o.theta_hat0), sc.x0, 0.0, sc.target));

  struct Eval {
    Vector dx;
    double u;
    Vector dI;
  };
  auto evaluate = [&sc, &o, theta_true, sup](double t, const Vector& y) {
    const Vector x = y.head(2);
    EstimatorState st = *sup;
    st.theta_I = y.tail(1);
    Eval e;
    const int j = active_ball(st);
    if (j >= 0) {
      const Vector th = theta_hat(st, sc.Gamma, sc.atlas, x, t);
      e.u = control_u(sc.plant, sc.atlas.balls[j].error, sc.phi, th, x, t);
      e.dI = theta_I_rhs(st, sc.Gamma, sc.phi, sc.atlas, sc.plant, x, t, e.u);
    } else {
      e.u = sc.atlas.balls[st.target].steering(x, t);
      e.dI = Vector::Zero(1);
    }
    e.dx = sc.plant.drift(x, theta_true) + sc.plant.gain(x) * e.u;
    if (o.kick_amplitude != 0.0)
      e.dx[1] += o.kick_amplitude * impulse_train(t, o.kick_delay, o.kick_period, o.kick_width);
    return e;
  };

  VectorField field{3, [evaluate](double t, const Vector& y) {
                      const Eval e = evaluate(t, y);
                      Vector out(3);
                      out << e.dx, e.dI;
                      return out;
                    }};

  SineRun run;
  run.theta_true = theta_true[0];

  std::vector<EventSpec> events;
  for (std::size_t jb = 0; jb < sc.atlas.balls.size(); ++jb) {
    const auto& b = sc.atlas.balls[jb];
    auto toggle = [&sc, sup, &run](double t, Vector& y) {
      const Vector x = y.head(2);
      sup->theta_I = y.tail(1);
      const double before = theta_hat(*sup, sc.Gamma, sc.atlas, x, t)[0];
      const int was = active_ball(*sup);
      SwitchingOutcome out = switching_step(*sup, sc.atlas, x, t);
      *sup = out.state;
      const double after = theta_hat(*sup, sc.Gamma, sc.atlas, x, t)[0];
      const int now = active_ball(*sup);
      run.toggles.push_back({t, now >= 0 ? now : was, now >= 0, std::abs(after - before)});
    };
    EventSpec on;
    on.id = "enter_" + std::to_string(jb);
    on.guard = [sup, jb, c = b.center, r = b.inner_radius](double, const Vector& y) {
      return sup->sigma[jb] == 0 ? (y.head(2) - c).norm() - r : 1.0;
    };
    on.direction = Direction::falling;
    on.action = EventAction::toggle;
    on.on_toggle = toggle;
    EventSpec off;
    off.id = "leave_" + std::to_string(jb);
    off.guard = [sup, jb, c = b.center, r = b.radius](double, const Vector& y) {
      return sup->sigma[jb] == 1 ? (y.head(2) - c).norm() - r : -1.0;
    };
    off.direction = Direction::rising;
    off.action = EventAction::toggle;
    off.on_toggle = toggle;
    events.push_back(std::move(on));
    events.push_back(std::move(off));
  }

  IntegrateOptions io;
  io.record_stride = o.record_stride;
  io.observer = [&](double t, const Vector& y) {
    const Vector x = y.head(2);
    const Eval e = evaluate(t, y);
    EstimatorState st = *sup;
    st.theta_I = y.tail(1);
    const int j = active_ball(st);
    const auto& ball = sc.atlas.balls[j >= 0 ? j : st.target];
    run.t.push_back(t);
    run.x.push_back(x);
    run.theta_I.push_back(y[2]);
    run.theta_hat.push_back(theta_hat(st, sc.Gamma, sc.atlas, x, t)[0]);
    run.psi.push_back(ball.error.psi(x, t));
    run.psi_dot.push_back(ball.error.grad_x_psi(x, t).dot(e.dx) + ball.error.dpsi_dt(x, t));
    run.u.push_back(e.u);
    run.alpha.push_back(ball.parametrization.alpha(x, t)[0]);
    run.active.push_back(j);
  };

  Vector y0(3);
  y0 << sc.x0, sup->theta_I;
  run.trajectory = integrate(field, y0, 0.0, sc.tf, o.h, events, io);
  return run;
}

}  // namespace monest
