#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace monest {

struct CriterionResult {
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  // Replaces a criterion's pinned tolerance; used by the harness self-test.
  std::map<std::string, double> tolerance;
  // Scratch directory for criteria that write files; empty selects a temp directory.
  std::string work_dir;
};

std::vector<std::string> criterion_ids();

// Pinned tolerance of a criterion (the value the pass/fail line compares against).
double default_tolerance(const std::string& id);

CriterionResult run_criterion(const std::string& id, const AcceptanceOptions& options = {});

// One scoreboard line per criterion and a summary; 0 iff every selected criterion passes.
int run_acceptance(std::ostream& out, const std::vector<std::string>& only,
                   const AcceptanceOptions& options = {});

}  // namespace monest
