#pragma once

#include <string>
#include <vector>

#include "otbridge/bridge.hpp"
#include "otbridge/problem.hpp"

namespace otbridge {

struct ProbeGridSpec {
  double lo = 0.0;
  double hi = 0.0;
  int points = 33;
};

struct OutputConfig {
  std::string directory = "out";
  bool save_trajectory = true;
  bool save_fields = false;
  std::vector<int> slices;  // resolved to quartile slices when unset
  ProbeGridSpec probe_grid;
};

struct RunConfig {
  ProblemSpec problem;
  SolverConfig solver;
  OutputConfig output;
};

/// Parses the plain-text run configuration (nested sections problem / solver /
/// output; scalars, bracketed vectors, row-list matrices; '#' comments).
/// Unknown keys are hard errors with the nearest valid key suggested; problem
/// invariants are checked via validate_spec. Throws SpecError with a line
/// number on syntax errors.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Canonical resolved form: every default filled in, fixed key order, doubles
/// at full round-trip precision. parse(print_config(c)) reproduces c.
std::string print_config(const RunConfig& config);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

}  // namespace otbridge
