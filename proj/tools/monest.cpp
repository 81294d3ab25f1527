#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monest/acceptance.hpp"
#include "monest/csv.hpp"
#include "monest/plant_neuro.hpp"
#include "monest/scenario.hpp"

using namespace monest;

namespace {

enum Exit { kOk = 0, kFail = 1, kConfig = 2, kFault = 3 };

Json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
}

// path=value; the value is parsed as JSON, falling back to a plain string.
Json apply_sets(const Json& user, const std::vector<std::string>& sets) {
  if (sets.empty()) return user;
  Json eff = parse_config(user).effective;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects path=value, got " + s);
    const std::string value = s.substr(eq + 1);
    Json v;
    try {
      v = Json::parse(value);
    } catch (const Json::parse_error&) {
      v = value;
    }
    set_path(eff, s.substr(0, eq), v);
  }
  return eff;
}

// "0.1,0.12,0.2" or "start:step:stop"
std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double a, step, b;
    char c1, c2;
    std::istringstream s(text);
    if (!(s >> a >> c1 >> step >> c2 >> b) || c1 != ':' || c2 != ':' || step <= 0.0 || b < a)
      throw ConfigError("--values range must be start:step:stop with step > 0");
    const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(a + step * static_cast<double>(i));
    return out;
  }
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--values: not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("--values: empty list");
  return out;
}

void print_report(const RunReport& r) {
  std::cout << "samples " << r.samples << '\n';
  for (auto it = r.metrics.begin(); it != r.metrics.end(); ++it)
    if (!it.value().is_structured()) std::cout << "  " << it.key() << " = " << it.value() << '\n';
  for (const auto& c : r.checks)
    std::cout << (c.pass ? "  PASS " : "  FAIL ") << c.name << "  " << format_double(c.witness)
              << "  (" << c.note << ")\n";
  for (const auto& f : r.files) std::cout << "  wrote " << f << '\n';
}

int fault(const std::exception& ex) {
  Json rec{{"fault", "runtime"}, {"message", ex.what()}};
  if (const auto* n = dynamic_cast<const NeuroBlowup*>(&ex)) {
    rec["fault"] = "neuro-blowup";
    rec["cell"] = n->cell();
    rec["time"] = n->time();
  } else if (const auto* i = dynamic_cast<const IntegrationFault*>(&ex)) {
    rec["fault"] = "integration";
    rec["time"] = i->time();
  } else if (dynamic_cast<const ModelFault*>(&ex)) {
    rec["fault"] = "model";
  }
  std::cerr << rec.dump() << '\n';
  return kFault;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monotone-parametrization estimator simulations"};
  app.require_subcommand(1);

  std::string config_path, axis, values_text, out_dir;
  std::vector<std::string> sets, only, overrides;

  auto* run = app.add_subcommand("run", "Simulate one scenario config");
  run->add_option("config", config_path, "Config JSON")->required();
  run->add_option("--set", sets, "Override a key: path=value (repeatable)");
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  auto* sweep = app.add_subcommand("sweep", "One run per value of a config key");
  sweep->add_option("config", config_path, "Config JSON")->required();
  sweep->add_option("--axis", axis, "Dotted key path, e.g. plant.x3_star")->required();
  sweep->add_option("--values", values_text, "a,b,c or start:step:stop")->required();
  sweep->add_option("--set", sets, "Override a key: path=value (repeatable)");
  sweep->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  auto* accept = app.add_subcommand("accept", "Run the acceptance criteria");
  accept->add_option("--only", only, "Criterion id (repeatable)");
  accept->add_option("--tolerance", overrides, "Override a pinned tolerance: id=value");

  auto* list = app.add_subcommand("list-scenarios", "List scenario ids");
  bool show_defaults = false;
  list->add_flag("--defaults", show_defaults, "Print each scenario's default config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& id : scenario_ids()) {
        if (show_defaults)
          std::cout << default_config(id).dump(2) << '\n';
        else
          std::cout << id << '\n';
      }
      return kOk;
    }
    if (*accept) {
      AcceptanceOptions o;
      for (const auto& s : overrides) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--tolerance expects id=value");
        const std::string id = s.substr(0, eq);
        default_tolerance(id);
        o.tolerance[id] = std::stod(s.substr(eq + 1));
      }
      for (const auto& id : only) default_tolerance(id);
      return run_acceptance(std::cout, only, o) == 0 ? kOk : kFail;
    }
    Json user = apply_sets(read_json(config_path), sets);
    if (!out_dir.empty()) {
      user = parse_config(user).effective;
      user["output"]["dir"] = out_dir;
    }
    if (*run) {
      const auto cfg = parse_config(user);
      try {
        print_report(run_scenario(cfg));
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& ex) {
        return fault(ex);
      }
      return kOk;
    }
    const auto values = parse_values(values_text);
    try {
      const auto res = run_sweep(user, axis, values);
      bool any_fault = false;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& r = res.reports[i];
        if (r.scenario.is_null()) any_fault = true;
        std::cout << axis << " = " << format_double(values[i])
                  << (r.scenario.is_null() ? "  fault" : (r.all_pass() ? "  pass" : "  fail"))
                  << '\n';
      }
      if (!res.table_path.empty()) std::cout << "wrote " << res.table_path << '\n';
      return any_fault ? kFault : kOk;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      return fault(ex);
    }
  } catch (const ConfigError& ex) {
    std::cerr << ex.what() << '\n';
    return kConfig;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kConfig;
  }
}
