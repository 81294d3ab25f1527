#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "monest/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Acceptance scoreboard"};
  std::vector<std::string> only, overrides;
  monest::AcceptanceOptions options;
  app.add_option("--only", only, "Criterion id (repeatable)");
  app.add_option("--tolerance", overrides, "Override a pinned tolerance: id=value");
  app.add_option("--work-dir", options.work_dir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  try {
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("--tolerance expects id=value");
      const std::string id = o.substr(0, eq);
      monest::default_tolerance(id);
      options.tolerance[id] = std::stod(o.substr(eq + 1));
    }
    for (const auto& id : only) monest::default_tolerance(id);
    return monest::run_acceptance(std::cout, only, options);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
}
