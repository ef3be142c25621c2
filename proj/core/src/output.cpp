#include "otbridge/output.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace otbridge {

namespace {

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot open output file for writing: " + path);
  return out;
}

void write_trajectory(const std::string& path, const SolveReport& report,
                      const RunConfig& config) {
  std::ofstream out = open_for_write(path);
  const int d = config.problem.d_x;
  out << "t,particle";
  for (int j = 0; j < d; ++j) out << ",x_" << j;
  for (int j = 0; j < d; ++j) out << ",p_" << j;
  out << "\n";
  const TrajectoryRecord& rec = report.record;
  for (int k : config.output.slices) {
    const std::string t = format_double(rec.grid.time(k));
    const Eigen::MatrixXd& x = rec.states[std::size_t(k)];
    const Eigen::MatrixXd& p = rec.costates[std::size_t(k)];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out << t << ',' << i;
      for (int j = 0; j < d; ++j) out << ',' << format_double(x(i, j));
      for (int j = 0; j < d; ++j) out << ',' << format_double(p(i, j));
      out << '\n';
    }
  }
  if (!out) throw SpecError("write failed: " + path);
}

void write_metrics(const std::string& path, const SolveReport& report,
                   const RunConfig& config) {
  nlohmann::ordered_json doc;
  doc["converged"] = report.converged;
  doc["seed"] = config.solver.seed;
  doc["iterations"] = report.history.size();

  nlohmann::ordered_json history;
  const auto series = [&](auto member) {
    std::vector<double> v;
    v.reserve(report.history.size());
    for (const auto& h : report.history) v.push_back(h.*member);
    return v;
  };
  history["terminal_residual"] = series(&OuterIterate::terminal_residual);
  history["field_change"] = series(&OuterIterate::field_change);
  history["gauss_kl"] = series(&OuterIterate::gauss_kl);
  history["control_cost"] = series(&OuterIterate::control_cost);
  history["action"] = series(&OuterIterate::action);
  doc["history"] = std::move(history);

  doc["energy_trace"] = report.energy_trace;
  doc["hjb_residual"] =
      hjb_gradient_residual(report.record.fields, report.record.grid,
                            solver_probe_grid(config.problem), config.problem);
  doc["config"] = print_config(config);

  std::ofstream out = open_for_write(path);
  out << doc.dump(2) << '\n';
  if (!out) throw SpecError("write failed: " + path);
}

void write_fields(const std::string& path, const SolveReport& report,
                  const RunConfig& config) {
  std::ofstream out = open_for_write(path);
  const ProbeGridSpec& pg = config.output.probe_grid;
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(pg.points, pg.lo, pg.hi);
  const Eigen::MatrixXd rgt = config.problem.r * config.problem.g.transpose();
  out << "t,x,u,grad_psi\n";
  Eigen::VectorXd x(1), grad(1);
  for (int k : config.output.slices) {
    const std::string t = format_double(report.record.grid.time(k));
    const PotentialModel& psi = report.record.fields.psi[std::size_t(k)];
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      x[0] = grid[i];
      psi.grad_into(x, grad);
      const double u = (rgt * grad)(0);
      out << t << ',' << format_double(grid[i]) << ',' << format_double(u) << ','
          << format_double(grad[0]) << '\n';
    }
  }
  if (!out) throw SpecError("write failed: " + path);
}

}  // namespace

EmittedFiles emit_outputs(const SolveReport& report, const RunConfig& config) {
  namespace fs = std::filesystem;
  const fs::path dir(config.output.directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw SpecError("cannot create output directory: " + dir.string());

  EmittedFiles files;
  if (config.output.save_trajectory) {
    files.trajectory_csv = (dir / "trajectory.csv").string();
    write_trajectory(files.trajectory_csv, report, config);
  }
  files.metrics_json = (dir / "metrics.json").string();
  write_metrics(files.metrics_json, report, config);
  if (config.output.save_fields) {
    files.fields_csv = (dir / "fields.csv").string();
    write_fields(files.fields_csv, report, config);
  }
  return files;
}

}  // namespace otbridge
