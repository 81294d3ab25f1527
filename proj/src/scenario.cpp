#include "monest/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "monest/csv.hpp"
#include "monest/plant_brake.hpp"
#include "monest/plant_neuro.hpp"

namespace monest {

namespace fs = std::filesystem;

namespace {

Json output_defaults(const std::string& id) {
  return Json{{"dir", "."}, {"prefix", id}, {"write", true}};
}

Json sine_defaults() {
  Json j;
  j["scenario"] = "sine";
  j["seed"] = 1;
  j["run"] = Json{{"tf", 50.0}, {"h", 1e-3}, {"record_stride", 1}};
  j["plant"] = Json{{"theta_true", 1.0},
                    {"x0", Json::array({-2.985, 0.05})},
                    {"x1_star", -2.985},
                    {"dither_amplitude", 0.0},
                    {"dither_omega", 2.0},
                    {"include_ball3", true},
                    {"kick_amplitude", 0.0},
                    {"kick_period", 10.0},
                    {"kick_width", 0.05},
                    {"kick_delay", 5.0}};
  j["estimator"] = Json{{"Gamma", Json::array({0.5})}, {"K", 1.0}, {"theta_hat0", 0.6}};
  j["analysis"] = Json{{"pe_window", 1.0},     {"bounds", true},
                       {"envelope", true},     {"lyapunov", true},
                       {"lyapunov_tol", 1e-9}, {"jump_tol", 1e-6}};
  j["output"] = output_defaults("sine");
  return j;
}

Json brake_defaults() {
  const BrakeParams p;
  const auto road = RoadProfile::reference();
  Json j;
  j["scenario"] = "brake";
  j["seed"] = 1;
  j["run"] = Json{{"tf", 30.0}, {"h", 1e-6}, {"record_stride", 1000}};
  j["plant"] = Json{{"params", Json{{"sigma0", p.sigma0},
                                    {"L", p.L},
                                    {"muC", p.muC},
                                    {"muS", p.muS},
                                    {"vs", p.vs},
                                    {"r", p.r},
                                    {"m", p.m},
                                    {"J", p.J},
                                    {"Fn", p.Fn},
                                    {"Ks", p.Ks}}},
                    {"road", Json{{"s_end", road.s_end}, {"theta", road.theta}}},
                    {"mode", "adaptive"},
                    {"x3_star", 0.1},
                    {"x1_0", kCalibratedSpeed},
                    {"x3_0", 0.02},
                    {"stop_speed", 5.0}};
  j["estimator"] = Json{{"Gamma", Json::array({100.0})},
                        {"K_xi", 10.0},
                        {"eps0", 1e-3},
                        {"theta_hat0", 0.0}};
  j["analysis"] = Json{{"lyapunov", true},     {"lyapunov_tol", 1e-6}, {"tracking", true},
                       {"settle_band", 0.05},  {"settle_window", 0.5}};
  j["output"] = output_defaults("brake");
  return j;
}

Json neuro_defaults() {
  const HRParams p;
  Json j;
  j["scenario"] = "neuro";
  j["seed"] = 1;
  j["run"] = Json{{"tf", 450.0}, {"h", 1e-3}, {"record_stride", 500}};
  j["plant"] = Json{{"N", 20},
                    {"theta1_true", 0.8},
                    {"T", 100.0},
                    {"theta0", p.theta0},
                    {"harmonize_sensory_lag", p.harmonize_sensory_lag},
                    {"hr", Json{{"a", p.a},
                                {"b", p.b},
                                {"c", p.c},
                                {"d", p.d},
                                {"s", p.s},
                                {"x0", p.x0},
                                {"eps", p.eps},
                                {"I0", p.I0}}},
                    {"gamma", p.gamma},
                    {"tau", p.tau},
                    {"beta", p.beta},
                    {"patterns", Json{{"P1", ""}, {"P2", ""}, {"image", ""}}},
                    {"image_noise", 0.0},
                    {"zero_coupling", false}};
  j["estimator"] = Json{{"theta_I0", 1.0}};
  j["analysis"] = Json{{"tolerance", 0.05},
                       {"sync_fraction", 0.2},
                       {"boundedness_rel", 0.01},
                       {"blowup", 1e6}};
  j["output"] = output_defaults("neuro");
  return j;
}

const char* type_name(const Json& j) {
  if (j.is_object()) return "object";
  if (j.is_array()) return "array";
  if (j.is_boolean()) return "boolean";
  if (j.is_string()) return "string";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  return "null";
}

bool same_kind(const Json& user, const Json& def) {
  if (def.is_boolean()) return user.is_boolean();
  if (def.is_string()) return user.is_string();
  if (def.is_number_integer()) return user.is_number_integer();
  if (def.is_number()) return user.is_number();
  return false;
}

void check_against(const Json& user, const Json& def, const std::string& path,
                   std::vector<std::string>& errs) {
  if (def.is_object()) {
    if (!user.is_object()) {
      errs.push_back(path + ": expected object, got " + type_name(user));
      return;
    }
    for (auto it = user.begin(); it != user.end(); ++it) {
      const std::string sub = path.empty() ? it.key() : path + "." + it.key();
      if (!def.contains(it.key()))
        errs.push_back(sub + ": unknown key");
      else
        check_against(it.value(), def[it.key()], sub, errs);
    }
    return;
  }
  if (def.is_array()) {
    if (!user.is_array()) {
      errs.push_back(path + ": expected array, got " + type_name(user));
      return;
    }
    for (std::size_t i = 0; i < user.size() && !def.empty(); ++i)
      check_against(user[i], def[0], path + "." + std::to_string(i), errs);
    return;
  }
  if (!same_kind(user, def))
    errs.push_back(path + ": expected " + type_name(def) + ", got " + type_name(user));
}

void merge(Json& base, const Json& over) {
  for (auto it = over.begin(); it != over.end(); ++it) {
    if (base.contains(it.key()) && base[it.key()].is_object() && it.value().is_object())
      merge(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

void semantic_checks(const Json& e, std::vector<std::string>& errs) {
  const auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  need(e["seed"].get<long long>() >= 0, "seed: must be >= 0");
  need(e["run"]["tf"].get<double>() >= 0.0, "run.tf: must be >= 0");
  need(e["run"]["h"].get<double>() > 0.0, "run.h: must be > 0");
  need(e["run"]["record_stride"].get<long long>() >= 1, "run.record_stride: must be >= 1");
  const auto& G = e["estimator"].contains("Gamma") ? e["estimator"]["Gamma"] : Json::array({1.0});
  need(G.size() == 1, "estimator.Gamma: one diagonal entry expected (scalar parameter)");
  for (const auto& g : G) need(g.get<double>() > 0.0, "estimator.Gamma: entries must be > 0");
  const std::string id = e["scenario"];
  if (id == "sine") {
    need(e["plant"]["x0"].size() == 2, "plant.x0: two entries expected");
    need(e["estimator"]["K"].get<double>() > 0.0, "estimator.K: must be > 0");
    need(e["analysis"]["pe_window"].get<double>() > 0.0, "analysis.pe_window: must be > 0");
  } else if (id == "brake") {
    const std::string mode = e["plant"]["mode"];
    need(mode == "adaptive" || mode == "fixed", "plant.mode: adaptive or fixed");
    try {
      RoadProfile{e["plant"]["road"]["s_end"].get<std::vector<double>>(),
                  e["plant"]["road"]["theta"].get<std::vector<double>>()}
          .validate();
    } catch (const std::exception& ex) {
      errs.push_back(std::string("plant.road: ") + ex.what());
    }
  } else if (id == "neuro") {
    need(e["plant"]["N"].get<long long>() >= 4, "plant.N: must be >= 4");
    need(e["plant"]["T"].get<double>() > 0.0, "plant.T: must be > 0");
    need(e["plant"]["image_noise"].get<double>() >= 0.0, "plant.image_noise: must be >= 0");
    const double frac = e["analysis"]["sync_fraction"];
    need(frac > 0.0 && frac <= 1.0, "analysis.sync_fraction: must be in (0, 1]");
  }
}

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string p;
  while (std::getline(ss, p, '.')) parts.push_back(p);
  if (parts.empty()) throw ConfigError("empty key path");
  return parts;
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

Json* resolve(Json& root, const std::string& dotted) {
  Json* cur = &root;
  for (const auto& part : split_path(dotted)) {
    if (cur->is_object() && cur->contains(part)) {
      cur = &(*cur)[part];
    } else if (cur->is_array() && all_digits(part) && std::stoul(part) < cur->size()) {
      cur = &(*cur)[std::stoul(part)];
    } else {
      return nullptr;
    }
  }
  return cur;
}

std::vector<double> as_vector(const Json& j) { return j.get<std::vector<double>>(); }

std::string out_path(const ScenarioConfig& c, const std::string& suffix) {
  const fs::path dir = c.at("output.dir").get<std::string>();
  return (dir / (c.at("output.prefix").get<std::string>() + suffix)).string();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
  auto f = open_out(path);
  CsvWriter w(f);
  w.header(header);
  for (const auto& r : rows) w.row(r);
}

CheckResult check(std::string name, bool pass, double witness, std::string note = {}) {
  return {std::move(name), pass, witness, std::move(note)};
}

// ---- sine

SineScenario sine_from(const ScenarioConfig& c) {
  SineOptions o;
  o.x1_star = c.get<double>("plant.x1_star");
  o.dither_amplitude = c.get<double>("plant.dither_amplitude");
  o.dither_omega = c.get<double>("plant.dither_omega");
  o.include_ball3 = c.get<bool>("plant.include_ball3");
  o.kick_amplitude = c.get<double>("plant.kick_amplitude");
  o.kick_period = c.get<double>("plant.kick_period");
  o.kick_width = c.get<double>("plant.kick_width");
  o.kick_delay = c.get<double>("plant.kick_delay");
  o.Gamma = c.get<double>("estimator.Gamma.0");
  o.K = c.get<double>("estimator.K");
  o.theta_hat0 = c.get<double>("estimator.theta_hat0");
  o.h = c.get<double>("run.h");
  o.record_stride = c.get<std::size_t>("run.record_stride");
  const auto x0v = as_vector(c.at("plant.x0"));
  Vector x0(2);
  x0 << x0v[0], x0v[1];
  return build_sine_scenario(c.get<double>("plant.theta_true"), x0, c.get<double>("run.tf"), o);
}

const std::vector<std::string> kSineColumns = {"t",     "x1",      "x2", "theta_hat",
                                               "theta_I", "psi",   "psi_dot", "u",
                                               "alpha", "active"};

void run_sine(const ScenarioConfig& c, RunReport& rep, bool write) {
  const bool empty = c.get<double>("run.tf") == 0.0;
  std::vector<std::vector<double>> rows;
  if (!empty) {
    const auto sc = sine_from(c);
    const auto run = simulate_sine(sc);
    rep.samples = run.t.size();
    for (std::size_t k = 0; k < run.t.size(); ++k)
      rows.push_back({run.t[k], run.x[k][0], run.x[k][1], run.theta_hat[k], run.theta_I[k],
                      run.psi[k], run.psi_dot[k], run.u[k], run.alpha[k],
                      static_cast<double>(run.active[k])});
    const auto d = analyze_sine(sc, run, c.get<double>("analysis.pe_window"));
    auto& m = rep.metrics;
    m["final_err"] = d.final_err;
    m["theta_hat_final"] = run.theta_hat.back();
    m["toggles"] = run.toggles.size();
    m["max_toggle_jump"] = d.max_toggle_jump;
    m["max_abs_state"] = d.max_abs_state;
    m["lyapunov_max_increase"] = d.lyapunov.max_increase;
    const bool interval = d.begin < run.t.size();
    if (interval) {
      m["identification_start"] = run.t[d.begin];
      m["envelope_violations"] = d.envelope.violations;
      m["pe_delta"] = d.gramian.delta_est;
      m["rate_lambda"] = d.rate.lambda_est;
      m["rate_floor"] = d.rate_floor;
    }
    if (c.get<bool>("analysis.bounds")) {
      if (interval) {
        const auto& b = d.bounds;
        const double ratio = std::max({b.l2_phi_observed / b.l2_phi_bound,
                                       b.l2_psidot_observed / b.l2_psidot_bound,
                                       b.linf_psi_observed / b.linf_psi_bound});
        rep.checks.push_back(check("bounds", b.satisfied(), ratio, "max observed/bound"));
      } else {
        rep.checks.push_back(check("bounds", false, 0.0, "no identification interval"));
      }
    }
    if (c.get<bool>("analysis.envelope")) {
      if (interval)
        rep.checks.push_back(check("envelope", d.envelope.violations == 0, d.envelope.max_excess,
                                   "max |psi| - envelope"));
      else
        rep.checks.push_back(check("envelope", false, 0.0, "no identification interval"));
    }
    if (c.get<bool>("analysis.lyapunov")) {
      const double tol = c.get<double>("analysis.lyapunov_tol");
      rep.checks.push_back(check("lyapunov", d.lyapunov.max_increase <= tol,
                                 d.lyapunov.max_increase, "max per-step increase"));
    }
    rep.checks.push_back(check("toggle-continuity",
                               d.max_toggle_jump <= c.get<double>("analysis.jump_tol"),
                               d.max_toggle_jump, "max |theta_hat jump|"));
    if (write && interval) {
      const std::string path = out_path(c, "_bounds.dat");
      auto f = open_out(path);
      f << "# t_rel psi abs_psi envelope theta_err\n";
      const Vector err0 = Vector::Constant(1, run.theta_hat[d.begin] - run.theta_true);
      const double D = sc.atlas.balls[static_cast<std::size_t>(run.active.back())].parametrization.D;
      for (std::size_t k = d.begin; k < run.t.size(); ++k) {
        const double tr = run.t[k] - run.t[d.begin];
        f << format_double(tr) << ' ' << format_double(run.psi[k]) << ' '
          << format_double(std::abs(run.psi[k])) << ' '
          << format_double(exp_envelope(run.psi[d.begin], sc.options.K, D, sc.Gamma, err0, tr))
          << ' ' << format_double(run.theta_hat[k] - run.theta_true) << '\n';
      }
      rep.files.push_back(path);
    }
  }
  if (write) {
    const std::string path = out_path(c, ".csv");
    write_table(path, kSineColumns, rows);
    rep.files.insert(rep.files.begin(), path);
  }
}

// ---- brake

void run_brake(const ScenarioConfig& c, RunReport& rep, bool write) {
  const std::vector<std::string> cols = {"t",       "x1",        "x2",         "x3",
                                         "x3_hat",  "xi",        "theta_I",    "s",
                                         "theta_hat", "theta_road", "x3_star",  "u",
                                         "psi",     "xi_err"};
  std::vector<std::vector<double>> rows;
  if (c.get<double>("run.tf") > 0.0) {
    BrakeParams p;
    const auto& pj = c.at("plant.params");
    p.sigma0 = pj["sigma0"];
    p.L = pj["L"];
    p.muC = pj["muC"];
    p.muS = pj["muS"];
    p.vs = pj["vs"];
    p.r = pj["r"];
    p.m = pj["m"];
    p.J = pj["J"];
    p.Fn = pj["Fn"];
    p.Ks = pj["Ks"];
    p.validate();
    const RoadProfile road{as_vector(c.at("plant.road.s_end")),
                           as_vector(c.at("plant.road.theta"))};
    BrakeOptions o;
    o.mode = c.get<std::string>("plant.mode") == "fixed" ? BrakeMode::fixed : BrakeMode::adaptive;
    o.x3_star = c.get<double>("plant.x3_star");
    o.x1_0 = c.get<double>("plant.x1_0");
    o.x3_0 = c.get<double>("plant.x3_0");
    o.stop_speed = c.get<double>("plant.stop_speed");
    o.theta_hat0 = c.get<double>("estimator.theta_hat0");
    o.gains.gamma = c.get<double>("estimator.Gamma.0");
    o.gains.K_xi = c.get<double>("estimator.K_xi");
    o.gains.eps0 = c.get<double>("estimator.eps0");
    o.h = c.get<double>("run.h");
    o.t_max = c.get<double>("run.tf");
    o.record_stride = c.get<std::size_t>("run.record_stride");
    const auto run = brake_experiment(road, o, p);
    rep.samples = run.t.size();
    for (std::size_t k = 0; k < run.t.size(); ++k) {
      const auto& y = run.y[k];
      rows.push_back({run.t[k], y[kX1], y[kX2], y[kX3], y[kX3Hat], y[kXi], y[kThetaI], y[kS],
                      run.theta_hat[k], run.theta_road[k], run.x3_star[k], run.u[k], run.psi[k],
                      run.xi_err[k]});
    }
    auto& m = rep.metrics;
    m["distance"] = run.distance;
    m["stop_time"] = run.stop_time;
    m["stopped"] = run.stopped;
    m["K_dom"] = run.K_dom;
    if (!run.t.empty()) m["final_err"] = std::abs(run.theta_hat.back() - run.theta_road.back());
    rep.checks.push_back(check("stopped", run.stopped, run.stop_time, "stop time"));
    if (c.get<bool>("analysis.lyapunov")) {
      std::vector<Vector> th, tr;
      for (std::size_t k = 0; k < run.t.size(); ++k) {
        th.push_back(Vector::Constant(1, run.theta_hat[k]));
        tr.push_back(Vector::Constant(1, run.theta_road[k]));
      }
      const ParameterBox om{Vector::Constant(1, -1e300), Vector::Constant(1, 1e300)};
      const auto ly = lyapunov_monitor(run.t, th, tr, Matrix::Constant(1, 1, o.gains.gamma), om);
      m["lyapunov_max_increase"] = ly.max_increase;
      rep.checks.push_back(check("lyapunov", ly.max_increase <= c.get<double>("analysis.lyapunov_tol"),
                                 ly.max_increase, "max per-step increase"));
    }
    if (c.get<bool>("analysis.tracking")) {
      const double window = c.get<double>("analysis.settle_window");
      const auto segs = segment_tracking(run, road, c.get<double>("analysis.settle_band"));
      Json sj = Json::array();
      bool ok = !segs.empty();
      double worst = 0.0;
      for (const auto& s : segs) {
        const bool seg_ok = s.settle >= 0.0 && s.settle <= std::min(window, s.duration);
        ok = ok && seg_ok;
        worst = std::max(worst, s.settle < 0.0 ? std::numeric_limits<double>::infinity() : s.settle);
        sj.push_back(Json{{"segment", s.segment},
                          {"theta", s.theta},
                          {"entry", s.entry},
                          {"settle", s.settle},
                          {"duration", s.duration},
                          {"pass", seg_ok}});
      }
      m["segments"] = sj;
      rep.checks.push_back(check("tracking", ok, worst, "worst settle time (s)"));
    }
  }
  if (write) {
    const std::string path = out_path(c, ".csv");
    write_table(path, cols, rows);
    rep.files.insert(rep.files.begin(), path);
  }
}

// ---- neuro

HRParams hr_from(const ScenarioConfig& c) {
  HRParams p;
  const auto& hr = c.at("plant.hr");
  p.a = hr["a"];
  p.b = hr["b"];
  p.c = hr["c"];
  p.d = hr["d"];
  p.s = hr["s"];
  p.x0 = hr["x0"];
  p.eps = hr["eps"];
  p.I0 = hr["I0"];
  p.gamma = c.get<double>("plant.gamma");
  p.tau = c.get<double>("plant.tau");
  p.beta = c.get<double>("plant.beta");
  p.theta0 = c.get<double>("plant.theta0");
  p.harmonize_sensory_lag = c.get<bool>("plant.harmonize_sensory_lag");
  p.validate();
  return p;
}

PatternGrid neuro_grid(const ScenarioConfig& c) {
  const auto N = c.get<std::size_t>("plant.N");
  const double th1 = c.get<double>("plant.theta1_true");
  const auto P1p = c.get<std::string>("plant.patterns.P1");
  const auto P2p = c.get<std::string>("plant.patterns.P2");
  const auto Ip = c.get<std::string>("plant.patterns.image");
  Matrix P1, P2, S;
  if (P1p.empty() && P2p.empty()) {
    const auto sc = square_cross_scene(N, th1);
    P1 = sc.grid.P1;
    P2 = sc.grid.P2;
    S = sc.grid.S;
  } else {
    if (P1p.empty() || P2p.empty())
      throw ConfigError("plant.patterns: P1 and P2 must be given together");
    P1 = load_pattern(P1p);
    P2 = load_pattern(P2p);
    S = blur(P1.cwiseMax(P2), th1);
  }
  if (!Ip.empty()) S = load_image(Ip);
  const double noise = c.get<double>("plant.image_noise");
  if (noise > 0.0) {
    std::mt19937_64 rng(c.get<std::uint64_t>("seed"));
    std::normal_distribution<double> n(0.0, noise);
    for (Eigen::Index j = 0; j < S.cols(); ++j)
      for (Eigen::Index i = 0; i < S.rows(); ++i) S(i, j) += n(rng);
  }
  return PatternGrid::make(P1, P2, S);
}

void run_neuro(const ScenarioConfig& c, RunReport& rep, bool write) {
  const auto grid = neuro_grid(c);
  const std::size_t N = grid.N, cells = N * N;
  std::vector<std::string> cols = {"t", "x1_cell0"};
  for (const char* name : {"theta1", "theta2"})
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t i = 0; i < N; ++i)
        cols.push_back(std::string(name) + "_" + std::to_string(i) + "_" + std::to_string(j));
  std::vector<std::vector<double>> rows;
  const double tf = c.get<double>("run.tf");
  if (tf > 0.0) {
    const auto p = hr_from(c);
    NeuroOptions o;
    o.T = c.get<double>("plant.T");
    o.h = c.get<double>("run.h");
    o.tf = tf;
    o.theta_I0 = c.get<double>("estimator.theta_I0");
    o.sync_fraction = c.get<double>("analysis.sync_fraction");
    o.blowup = c.get<double>("analysis.blowup");
    o.history_dt = o.h * static_cast<double>(c.get<std::size_t>("run.record_stride"));
    o.zero_coupling = c.get<bool>("plant.zero_coupling");
    const double th1 = c.get<double>("plant.theta1_true");
    const auto run = run_recognition(grid, p, o, th1);
    rep.samples = run.t.size();
    for (std::size_t s = 0; s < run.t.size(); ++s) {
      std::vector<double> r = {run.t[s], run.x1_probe[s]};
      r.insert(r.end(), run.theta1[s].begin(), run.theta1[s].end());
      r.insert(r.end(), run.theta2[s].begin(), run.theta2[s].end());
      rows.push_back(std::move(r));
    }

    const double tol = c.get<double>("analysis.tolerance");
    const double rel_b = c.get<double>("analysis.boundedness_rel");
    double local_worst = 0.0, final_worst = 0.0, sync_worst = 0.0;
    std::size_t matched = 0, unscored = 0, background = 0, unbounded = 0;
    std::vector<std::vector<double>> cell_rows;
    for (std::size_t k = 0; k < cells; ++k) {
      const std::size_t i = k % N, j = k / N;
      const bool in1 = grid.P1(i, j) != 0.0, in2 = grid.P2(i, j) != 0.0;
      const double sr = run.signal_rms[k] > 0.0 ? 1.0 / run.signal_rms[k] : 0.0;
      const double s1 = run.sync1[k] * sr, s2 = run.sync2[k] * sr;
      const bool bounded = tf >= 2.0 * o.T && estimates_bounded(run, k, rel_b);
      if ((in1 || in2) && run.local_time[k] < 0.0) {
        ++unscored;
      } else if (in1 || in2) {
        ++matched;
        const double loc = in1 ? run.local_theta1[k] : run.local_theta2[k];
        const double fin = in1 ? run.final_theta1[k] : run.final_theta2[k];
        local_worst = std::max(local_worst, std::abs(loc - th1) / th1);
        final_worst = std::max(final_worst, std::abs(fin - th1) / th1);
        sync_worst = std::max(sync_worst, in1 ? s1 : s2);
      } else if (!in1 && !in2) {
        ++background;
        if (!bounded) ++unbounded;
      }
      cell_rows.push_back({static_cast<double>(i), static_cast<double>(j), in1 ? 1.0 : 0.0,
                           in2 ? 1.0 : 0.0, grid.S(i, j), run.final_theta1[k],
                           run.final_theta2[k], run.local_theta1[k], run.local_theta2[k],
                           run.local_time[k], s1, s2, bounded ? 1.0 : 0.0,
                           run.lyapunov_max_increase1[k]});
    }
    auto& m = rep.metrics;
    m["cells"] = cells;
    m["matched_cells"] = matched;
    m["unscored_cells"] = unscored;  // own pulse not yet seen
    m["background_cells"] = background;
    m["local_rel_err_max"] = local_worst;
    m["final_rel_err_max"] = final_worst;
    m["sync_rel_max"] = sync_worst;
    if (tf >= 2.0 * o.T) m["unbounded_background_cells"] = unbounded;
    if (matched > 0) {
      rep.checks.push_back(check("identification", local_worst < tol, local_worst,
                                 "max relative error at own pulse"));
      rep.checks.push_back(check("synchrony", sync_worst < tol, sync_worst,
                                 "max relative synchrony RMS"));
    }
    if (background > 0 && tf >= 2.0 * o.T)
      rep.checks.push_back(check("background-bounded", unbounded == 0,
                                 static_cast<double>(unbounded), "unbounded background cells"));
    if (write) {
      const std::string path = out_path(c, "_cells.csv");
      write_table(path,
                  {"i", "j", "in_P1", "in_P2", "image", "final_theta1", "final_theta2",
                   "local_theta1", "local_theta2", "local_time", "sync1_rel", "sync2_rel",
                   "bounded", "lyapunov_max_increase1"},
                  cell_rows);
      rep.files.push_back(path);
    }
  }
  if (write) {
    const std::string path = out_path(c, ".csv");
    write_table(path, cols, rows);
    rep.files.insert(rep.files.begin(), path);
  }
}

}  // namespace

std::vector<std::string> scenario_ids() { return {"sine", "brake", "neuro"}; }

Json default_config(const std::string& scenario) {
  if (scenario == "sine") return sine_defaults();
  if (scenario == "brake") return brake_defaults();
  if (scenario == "neuro") return neuro_defaults();
  throw ConfigError("scenario: unknown scenario '" + scenario + "' (sine, brake, neuro)");
}

const Json& ScenarioConfig::at(const std::string& dotted) const {
  const Json* j = resolve(const_cast<Json&>(effective), dotted);
  if (!j) throw ConfigError(dotted + ": no such key");
  return *j;
}

ScenarioConfig parse_config(const Json& user) {
  if (!user.is_object()) throw ConfigError("config: top level must be an object");
  if (!user.contains("scenario") || !user["scenario"].is_string())
    throw ConfigError("invalid config:\n  scenario: missing (sine, brake, neuro)");
  const std::string id = user["scenario"];
  const auto ids = scenario_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end())
    throw ConfigError("invalid config:\n  scenario: unknown scenario '" + id +
                      "' (sine, brake, neuro)");
  Json eff = default_config(id);
  std::vector<std::string> errs;
  check_against(user, eff, "", errs);
  if (errs.empty()) {
    merge(eff, user);
    semantic_checks(eff, errs);
  }
  if (!errs.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return {id, std::move(eff)};
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(f);
  } catch (const Json::parse_error& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  return parse_config(j);
}

void set_path(Json& config, const std::string& dotted, const Json& value) {
  Json* j = resolve(config, dotted);
  if (!j) throw ConfigError(dotted + ": not a key of this scenario");
  if (j->is_number_integer() && value.is_number_float()) {
    const double v = value.get<double>();
    if (v != std::floor(v)) throw ConfigError(dotted + ": integer value expected");
    *j = static_cast<long long>(v);
  } else {
    *j = value;
  }
}

bool RunReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

Json RunReport::to_json() const {
  Json j;
  j["config"] = scenario;
  j["pass"] = all_pass();
  j["samples"] = samples;
  Json cj = Json::array();
  for (const auto& c : checks)
    cj.push_back(Json{{"name", c.name}, {"pass", c.pass}, {"witness", c.witness}, {"note", c.note}});
  j["checks"] = cj;
  j["metrics"] = metrics;
  j["files"] = files;
  return j;
}

RunReport run_scenario(const ScenarioConfig& config) {
  RunReport rep;
  rep.scenario = config.effective;
  const bool write = config.get<bool>("output.write");
  if (write) fs::create_directories(config.get<std::string>("output.dir"));
  if (config.scenario == "sine")
    run_sine(config, rep, write);
  else if (config.scenario == "brake")
    run_brake(config, rep, write);
  else
    run_neuro(config, rep, write);
  if (write) {
    const std::string path = out_path(config, ".json");
    rep.files.push_back(path);
    auto f = open_out(path);
    f << rep.to_json().dump(2) << '\n';
  }
  return rep;
}

SweepResult run_sweep(const Json& user, const std::string& axis, const std::vector<double>& values) {
  const auto base = parse_config(user);
  base.at(axis);
  if (values.empty()) throw ConfigError("sweep: no values");
  const auto prefix = base.get<std::string>("output.prefix");
  std::vector<ScenarioConfig> cfgs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Json e = base.effective;
    set_path(e, axis, values[i]);
    e["output"]["prefix"] = prefix + "_" + std::to_string(i);
    cfgs.push_back(parse_config(e));
  }
  SweepResult res;
  res.axis = axis;
  res.values = values;
  res.reports.resize(values.size());
  std::vector<std::string> errors(values.size());
  const auto n = static_cast<long>(values.size());
#pragma omp parallel for schedule(dynamic) num_threads(monest_threads())
  for (long i = 0; i < n; ++i) {
    try {
      res.reports[static_cast<std::size_t>(i)] = run_scenario(cfgs[static_cast<std::size_t>(i)]);
    } catch (const std::exception& ex) {
      errors[static_cast<std::size_t>(i)] = ex.what();
    }
  }

  std::vector<std::string> metric_keys, check_names;
  for (const auto& r : res.reports) {
    for (auto it = r.metrics.begin(); it != r.metrics.end(); ++it)
      if ((it.value().is_number() || it.value().is_boolean()) &&
          std::find(metric_keys.begin(), metric_keys.end(), it.key()) == metric_keys.end())
        metric_keys.push_back(it.key());
    for (const auto& c : r.checks)
      if (std::find(check_names.begin(), check_names.end(), c.name) == check_names.end())
        check_names.push_back(c.name);
  }
  std::vector<std::string> header = {axis, "status"};
  header.insert(header.end(), metric_keys.begin(), metric_keys.end());
  for (const auto& c : check_names) header.push_back("pass_" + c);

  std::ostringstream table;
  CsvWriter w(table);
  w.header(header);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& r = res.reports[i];
    std::vector<std::string> row = {format_double(values[i]),
                                    errors[i].empty() ? "ok" : "fault: " + errors[i]};
    for (const auto& k : metric_keys) {
      if (!errors[i].empty() || !r.metrics.contains(k)) {
        row.push_back("");
      } else {
        const auto& v = r.metrics[k];
        row.push_back(v.is_boolean() ? (v.get<bool>() ? "1" : "0") : format_double(v.get<double>()));
      }
    }
    for (const auto& name : check_names) {
      std::string cell;
      for (const auto& c : r.checks)
        if (c.name == name) cell = c.pass ? "1" : "0";
      row.push_back(cell);
    }
    w.row(row);
  }
  if (base.get<bool>("output.write")) {
    fs::create_directories(base.get<std::string>("output.dir"));
    res.table_path = out_path(base, "_sweep.csv");
    auto f = open_out(res.table_path);
    f << table.str();
  }
  return res;
}

EstimatorConfig sine_estimator_config(const SineScenario& scenario, int ball) {
  const auto& b = scenario.atlas.balls.at(static_cast<std::size_t>(ball));
  return {scenario.Gamma, scenario.phi, b.parametrization, b.error};
}

SineDiagnostics analyze_sine(const SineScenario& scenario, const SineRun& run, double pe_window) {
  SineDiagnostics d;
  const std::size_t n = run.t.size();
  d.begin = n;
  for (const auto& tg : run.toggles) d.max_toggle_jump = std::max(d.max_toggle_jump, tg.jump);
  for (const auto& x : run.x) d.max_abs_state = std::max(d.max_abs_state, x.cwiseAbs().maxCoeff());
  if (n == 0) return d;
  d.final_err = std::abs(run.theta_hat.back() - run.theta_true);

  // Kicks are outside the model; a sample is off when a kick overlaps the step leading to it.
  const auto& o = scenario.options;
  const auto kicked = [&](double a, double b) {
    if (o.kick_amplitude == 0.0) return false;
    double phase = std::fmod(a - o.kick_delay, o.kick_period);
    if (phase < 0.0) phase += o.kick_period;
    return phase < o.kick_width || b - a >= o.kick_period - phase;
  };
  std::vector<Vector> th, tr;
  std::vector<bool> on;
  for (std::size_t k = 0; k < n; ++k) {
    th.push_back(Vector::Constant(1, run.theta_hat[k]));
    tr.push_back(Vector::Constant(1, run.theta_true));
    on.push_back(run.active[k] >= 0 && !kicked(k ? run.t[k - 1] : run.t[0], run.t[k]));
  }
  auto omega = scenario.plant.theta_domain();
  omega.lower.array() -= 1e-9;
  omega.upper.array() += 1e-9;
  d.lyapunov = lyapunov_monitor(run.t, th, tr, scenario.Gamma, omega, on);

  const int ball = run.active.back();
  if (ball < 0) return d;
  std::size_t b = n - 1;
  while (b > 0 && run.active[b - 1] == ball) --b;
  d.begin = b;

  std::vector<double> ts, psi, psi_dot, err;
  std::vector<Vector> alpha;
  for (std::size_t k = b; k < n; ++k) {
    ts.push_back(run.t[k] - run.t[b]);
    psi.push_back(run.psi[k]);
    psi_dot.push_back(run.psi_dot[k]);
    err.push_back(std::abs(run.theta_hat[k] - run.theta_true));
    alpha.push_back(Vector::Constant(1, run.alpha[k]));
  }
  const auto& par = scenario.atlas.balls[static_cast<std::size_t>(ball)].parametrization;
  const Vector err0 = Vector::Constant(1, run.theta_hat[b] - run.theta_true);
  d.bounds = performance_bounds(scenario.phi, psi.front(), err0, scenario.Gamma, par.D);
  observe_performance(d.bounds, scenario.phi, ts, psi, psi_dot);
  d.envelope = check_envelope(ts, psi, scenario.options.K, par.D, scenario.Gamma, err0);
  if (ts.back() > pe_window) {
    d.gramian = pe_gramian(ts, alpha, pe_window);
    d.rate_floor = theoretical_rate_floor(scenario.Gamma, par.D1, d.gramian.delta_est, pe_window);
  }
  // Fit only above the round-off floor.
  std::vector<double> fit_t, fit_e;
  for (std::size_t k = 0; k < ts.size(); ++k)
    if (err[k] > 1e-9) {
      fit_t.push_back(ts[k]);
      fit_e.push_back(err[k]);
    }
  if (fit_t.size() >= 10) d.rate = exp_rate_fit(fit_t, fit_e);
  return d;
}

}  // namespace monest
