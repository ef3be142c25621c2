#include "otbridge/driver.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <tuple>

#include <CLI11.hpp>

#include "otbridge/config.hpp"
#include "otbridge/oracle.hpp"
#include "otbridge/output.hpp"

namespace otbridge {

namespace {

struct MomentRow {
  double t;
  double mean;
  double variance;
};

std::vector<double> slice_times(const RunConfig& cfg) {
  const TimeGrid grid{cfg.solver.steps, cfg.problem.horizon};
  std::vector<double> times;
  times.reserve(cfg.output.slices.size());
  for (int k : cfg.output.slices) times.push_back(grid.time(k));
  return times;
}

std::vector<MomentRow> oracle_moments(const RunConfig& cfg) {
  const ProblemSpec& spec = cfg.problem;
  if (spec.d_x != 1)
    throw SpecError("oracle: reference solutions are implemented for 1-D problems only");
  const std::vector<double> times = slice_times(cfg);
  std::vector<MomentRow> rows;
  const double sigma2 = spec.sigma(0, 0);
  if (sigma2 <= 0.0) {
    const QuantileInterpolation interp(spec.pi0, spec.piT, spec.horizon);
    for (double t : times) {
      const auto [m, v] = interp.moments(t);
      rows.push_back({t, m, v});
    }
    return rows;
  }
  const auto [lo, hi] = sinkhorn_grid_range(spec.pi0, spec.piT, sigma2, spec.horizon);
  const GridBridge bridge =
      grid_sinkhorn_bridge(spec.pi0, spec.piT, sigma2, spec.horizon, lo, hi, 1025, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto [m, v] = bridge.moments(i);
    rows.push_back({times[i], m, v});
  }
  return rows;
}

std::vector<MomentRow> solver_moments(const SolveReport& report, const RunConfig& cfg) {
  std::vector<MomentRow> rows;
  for (int k : cfg.output.slices) {
    const Moments m = empirical_moments(report.record.states[std::size_t(k)]);
    rows.push_back({report.record.grid.time(k), m.mean[0], m.cov(0, 0)});
  }
  return rows;
}

void write_moment_csv(const std::string& path, const std::vector<MomentRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot open output file for writing: " + path);
  out << "t,mean,variance\n";
  for (const auto& r : rows)
    out << format_double(r.t) << ',' << format_double(r.mean) << ','
        << format_double(r.variance) << '\n';
  if (!out) throw SpecError("write failed: " + path);
}

void print_solve_summary(const SolveReport& report) {
  const auto& h = report.history;
  std::cout << "outer iterations: " << h.size() << (report.converged ? " (converged)" : " (max_outer reached)")
            << "\n";
  if (!h.empty()) {
    std::cout << "terminal residual: " << format_double(h.back().terminal_residual) << "\n";
    std::cout << "field change:      " << format_double(h.back().field_change) << "\n";
    std::cout << "gauss-kl to piT:   " << format_double(h.back().gauss_kl) << "\n";
    std::cout << "control cost:      " << format_double(h.back().control_cost) << "\n";
    std::cout << "action:            " << format_double(h.back().action) << "\n";
  }
}

int command_validate(const std::string& path) {
  const RunConfig cfg = parse_config_file(path);
  std::cout << print_config(cfg);
  return 0;
}

int command_solve(const std::string& path, const std::string& output_dir) {
  RunConfig cfg = parse_config_file(path);
  if (!output_dir.empty()) cfg.output.directory = output_dir;
  const SolveReport report = solve(cfg.problem, cfg.solver);
  const EmittedFiles files = emit_outputs(report, cfg);
  print_solve_summary(report);
  std::cout << "metrics: " << files.metrics_json << "\n";
  if (!files.trajectory_csv.empty()) std::cout << "trajectory: " << files.trajectory_csv << "\n";
  if (!files.fields_csv.empty()) std::cout << "fields: " << files.fields_csv << "\n";
  return report.converged ? 0 : 1;
}

int command_oracle(const std::string& path, const std::string& output_dir) {
  RunConfig cfg = parse_config_file(path);
  if (!output_dir.empty()) cfg.output.directory = output_dir;
  const std::vector<MomentRow> rows = oracle_moments(cfg);
  std::filesystem::create_directories(cfg.output.directory);
  const std::string out_path =
      (std::filesystem::path(cfg.output.directory) / "oracle_moments.csv").string();
  write_moment_csv(out_path, rows);
  std::cout << "oracle moments: " << out_path << "\n";
  return 0;
}

int command_compare(const std::string& path, const std::string& output_dir, double mean_tol,
                    double var_tol) {
  RunConfig cfg = parse_config_file(path);
  if (!output_dir.empty()) cfg.output.directory = output_dir;

  const SolveReport report = solve(cfg.problem, cfg.solver);
  emit_outputs(report, cfg);
  const std::vector<MomentRow> solver_rows = solver_moments(report, cfg);
  const std::vector<MomentRow> oracle_rows = oracle_moments(cfg);

  std::filesystem::create_directories(cfg.output.directory);
  const std::string out_path =
      (std::filesystem::path(cfg.output.directory) / "compare.csv").string();
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw SpecError("cannot open output file for writing: " + out_path);
  out << "t,solver_mean,solver_variance,oracle_mean,oracle_variance,mean_error,variance_error\n";

  bool pass = true;
  for (std::size_t i = 0; i < solver_rows.size(); ++i) {
    const double me = std::abs(solver_rows[i].mean - oracle_rows[i].mean);
    const double ve = std::abs(solver_rows[i].variance - oracle_rows[i].variance);
    pass = pass && me <= mean_tol && ve <= var_tol;
    out << format_double(solver_rows[i].t) << ',' << format_double(solver_rows[i].mean) << ','
        << format_double(solver_rows[i].variance) << ',' << format_double(oracle_rows[i].mean)
        << ',' << format_double(oracle_rows[i].variance) << ',' << format_double(me) << ','
        << format_double(ve) << '\n';
    std::cout << "t=" << format_double(solver_rows[i].t) << " mean_error=" << format_double(me)
              << " variance_error=" << format_double(ve) << "\n";
  }
  if (!out) throw SpecError("write failed: " + out_path);
  if (!report.converged) pass = false;
  std::cout << (pass ? "PASS" : "FAIL") << " (mean tol " << format_double(mean_tol)
            << ", variance tol " << format_double(var_tol) << ")\n";
  return pass ? 0 : 1;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  CLI::App app{"Particle solver for dynamic optimal transport and Schrodinger bridges"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  double mean_tol = 0.02;
  double var_tol = 0.05;

  CLI::App* validate = app.add_subcommand(
      "validate", "Parse and validate a config; print the canonical resolved form");
  validate->add_option("config", config_path, "configuration file")->required();

  CLI::App* solve_cmd =
      app.add_subcommand("solve", "Run the bridge solver and write trajectory + metrics");
  solve_cmd->add_option("config", config_path, "configuration file")->required();
  solve_cmd->add_option("--output-dir", output_dir, "override output.directory");

  CLI::App* oracle_cmd =
      app.add_subcommand("oracle", "Write reference marginal moments for a config");
  oracle_cmd->add_option("config", config_path, "configuration file")->required();
  oracle_cmd->add_option("--output-dir", output_dir, "override output.directory");

  CLI::App* compare_cmd = app.add_subcommand(
      "compare", "Run solver and oracle; report per-time moment differences");
  compare_cmd->add_option("config", config_path, "configuration file")->required();
  compare_cmd->add_option("--output-dir", output_dir, "override output.directory");
  compare_cmd->add_option("--mean-tol", mean_tol, "per-time mean tolerance");
  compare_cmd->add_option("--var-tol", var_tol, "per-time variance tolerance");

  std::vector<const char*> argv;
  argv.push_back("otbridge");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (validate->parsed()) return command_validate(config_path);
    if (solve_cmd->parsed()) return command_solve(config_path, output_dir);
    if (oracle_cmd->parsed()) return command_oracle(config_path, output_dir);
    if (compare_cmd->parsed()) return command_compare(config_path, output_dir, mean_tol, var_tol);
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace otbridge
