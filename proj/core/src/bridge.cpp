#include "otbridge/bridge.hpp"

#include <cmath>
#include <string>

namespace otbridge {

namespace {

constexpr double kBlowupLimit = 1e8;

void validate_config(const SolverConfig& config) {
  if (config.steps < 1) throw SpecError("solver.steps must be >= 1");
  if (config.n_particles < 2) throw SpecError("solver.n_particles must be >= 2");
  if (config.ipf.max_outer < 1) throw SpecError("solver.ipf.max_outer must be >= 1");
  if (!(config.ipf.damping > 0.0) || config.ipf.damping > 1.0)
    throw SpecError("solver.ipf.damping must lie in (0, 1]");
  if (!(config.ipf.tol_terminal > 0.0)) throw SpecError("solver.ipf.tol_terminal must be > 0");
  if (!(config.ipf.tol_fields > 0.0)) throw SpecError("solver.ipf.tol_fields must be > 0");
}

BetaField slice_beta(const FieldStack& fields, std::size_t k, const ProblemSpec& spec) {
  if (fields.gauge == GaugeMode::Natural)
    return beta_field(fields.score[k], spec.sigma, GaugeMode::Natural);
  return BetaField::zero(spec.d_x);
}

double terminal_score_residual(const ScoreField& terminal_score, const Eigen::MatrixXd& states,
                               const DistributionSpec& piT) {
  Eigen::VectorXd s(states.cols());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    const Eigen::VectorXd x = states.row(i);
    terminal_score.score_into(x, s);
    sum += (dist_log_density_score(piT, x).score - s).squaredNorm();
  }
  return std::sqrt(sum / double(states.rows()));
}

// RMS over slices and probe rows of |u_new(x) - u_old(x)|.
double control_field_change(const FieldStack& old_fields, const FieldStack& new_fields,
                            const Eigen::MatrixXd& probes, const ProblemSpec& spec) {
  const Eigen::MatrixXd rgt = spec.r * spec.g.transpose();
  Eigen::VectorXd grad_old, grad_new;
  double sum = 0.0;
  const int slices = old_fields.slices();
  for (int k = 0; k < slices; ++k) {
    for (Eigen::Index p = 0; p < probes.rows(); ++p) {
      const Eigen::VectorXd x = probes.row(p);
      old_fields.psi[std::size_t(k)].grad_into(x, grad_old);
      new_fields.psi[std::size_t(k)].grad_into(x, grad_new);
      sum += (rgt * (grad_new - grad_old)).squaredNorm();
    }
  }
  return std::sqrt(sum / double(slices * probes.rows()));
}

}  // namespace

Eigen::MatrixXd solver_probe_grid(const ProblemSpec& spec) {
  const Eigen::VectorXd mean0 = spec.pi0.moment_mean();
  const Eigen::VectorXd meanT = spec.piT.moment_mean();
  const Eigen::VectorXd sd0 = spec.pi0.moment_cov().diagonal().array().sqrt();
  const Eigen::VectorXd sdT = spec.piT.moment_cov().diagonal().array().sqrt();
  const Eigen::VectorXd lo =
      (mean0 - 4.0 * sd0).cwiseMin(meanT - 4.0 * sdT);
  const Eigen::VectorXd hi =
      (mean0 + 4.0 * sd0).cwiseMax(meanT + 4.0 * sdT);
  if (spec.d_x == 1) {
    Eigen::MatrixXd probes(33, 1);
    probes.col(0) = Eigen::VectorXd::LinSpaced(33, lo[0], hi[0]);
    return probes;
  }
  // Low-discrepancy-ish deterministic fill of the bounding box (Weyl sequence).
  const int count = 64;
  Eigen::MatrixXd probes(count, spec.d_x);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < spec.d_x; ++j) {
      const double frac = std::fmod(0.5 + (i + 1) * std::pow(0.7548776662466927, j + 1), 1.0);
      probes(i, j) = lo[j] + frac * (hi[j] - lo[j]);
    }
  return probes;
}

TrajectoryRecord forward_sweep(const ProblemSpec& spec, const FieldStack& fields,
                               const Ensemble& ens0, const SolverConfig& config) {
  const int slices = config.steps + 1;
  if (fields.slices() != slices)
    throw SpecError("forward_sweep: field stack length must be steps + 1");

  TrajectoryRecord record;
  record.grid = TimeGrid{config.steps, spec.horizon};
  record.fields = fields;
  record.fields.gauge = config.gauge;
  record.states.resize(std::size_t(slices));
  record.costates.resize(std::size_t(slices));
  record.terminal_potential = PotentialModel::zero(spec.d_x);

  Ensemble ens = ens0;
  for (int k = 0; k < slices; ++k) {
    if (ens.states.cwiseAbs().maxCoeff() > kBlowupLimit)
      throw NumericalError("forward_sweep: particle blow-up at slice " + std::to_string(k));
    record.states[std::size_t(k)] = ens.states;
    record.costates[std::size_t(k)] = ens.costates;
    record.fields.score[std::size_t(k)] =
        estimate_score(ens.states, config.score_method, config.kde_bandwidth);
    if (k == config.steps) break;
    const double dt = record.grid.time(k + 1) - record.grid.time(k);
    switch (config.mode) {
      case DynamicsMode::MeanField: {
        const BetaField beta = slice_beta(record.fields, std::size_t(k), spec);
        ens = step_meanfield(ens, fields.psi[std::size_t(k)], beta, dt, spec);
        break;
      }
      case DynamicsMode::FbsdeIto:
        ens = step_fbsde(ens, fields.psi[std::size_t(k)], dt, config.seed, k,
                         FbsdeScheme::Ito, spec);
        break;
      case DynamicsMode::FbsdeStratonovich:
        ens = step_fbsde(ens, fields.psi[std::size_t(k)], dt, config.seed, k,
                         FbsdeScheme::Stratonovich, spec);
        break;
    }
  }
  return record;
}

FieldStack backward_sweep(TrajectoryRecord& record, const PotentialModel& terminal_model,
                          const ProblemSpec& spec, const SolverConfig& config) {
  const int steps = record.grid.steps;
  const Eigen::Index n = record.particles();
  const int d = spec.d_x;

  FieldStack out;
  out.gauge = record.fields.gauge;
  out.score = record.fields.score;
  out.psi.assign(std::size_t(steps + 1), PotentialModel::zero(d));

  // P_M = grad psi_acc(X_M).
  Eigen::MatrixXd p_terminal(n, d);
  Eigen::VectorXd grad(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    terminal_model.grad_into(record.states[std::size_t(steps)].row(i), grad);
    p_terminal.row(i) = grad;
  }
  record.costates[std::size_t(steps)] = std::move(p_terminal);

  const auto fit_at = [&](int k) {
    try {
      return fit_potential(record.states[std::size_t(k)], record.costates[std::size_t(k)],
                           config.basis);
    } catch (const NumericalError& err) {
      throw NumericalError(std::string(err.what()) + " at slice " + std::to_string(k));
    }
  };

  for (int k = steps - 1; k >= 0; --k) {
    out.psi[std::size_t(k + 1)] = fit_at(k + 1);
    const double dt = record.grid.time(k + 1) - record.grid.time(k);
    switch (config.mode) {
      case DynamicsMode::MeanField: {
        const BetaField beta = slice_beta(record.fields, std::size_t(k + 1), spec);
        record.costates[std::size_t(k)] = backward_step_costate(
            record.states[std::size_t(k)], record.states[std::size_t(k + 1)],
            record.costates[std::size_t(k + 1)], out.psi[std::size_t(k + 1)], beta, dt, spec);
        break;
      }
      case DynamicsMode::FbsdeIto:
        record.costates[std::size_t(k)] = backward_step_costate_fbsde(
            record.states[std::size_t(k)], record.states[std::size_t(k + 1)],
            record.costates[std::size_t(k + 1)], out.psi[std::size_t(k + 1)], dt, config.seed,
            k, FbsdeScheme::Ito, spec);
        break;
      case DynamicsMode::FbsdeStratonovich:
        record.costates[std::size_t(k)] = backward_step_costate_fbsde(
            record.states[std::size_t(k)], record.states[std::size_t(k + 1)],
            record.costates[std::size_t(k + 1)], out.psi[std::size_t(k + 1)], dt, config.seed,
            k, FbsdeScheme::Stratonovich, spec);
        break;
    }
  }
  out.psi[0] = fit_at(0);
  return out;
}

SolveReport solve(const ProblemSpec& spec, const SolverConfig& config) {
  return solve(spec, config,
               FieldStack::zero(config.steps + 1, spec.d_x, config.gauge),
               PotentialModel::zero(spec.d_x));
}

SolveReport solve(const ProblemSpec& spec, const SolverConfig& config,
                  FieldStack initial_fields, PotentialModel initial_terminal) {
  validate_config(config);
  if (initial_fields.slices() != config.steps + 1)
    throw SpecError("solve: initial field stack length must be steps + 1");

  const Ensemble ens0 = init_ensemble(spec, config.n_particles, config.seed);
  const Eigen::MatrixXd probes = solver_probe_grid(spec);

  FieldStack fields = std::move(initial_fields);
  fields.gauge = config.gauge;
  PotentialModel terminal_acc = std::move(initial_terminal);

  SolveReport report;
  for (int outer = 0; outer < config.ipf.max_outer; ++outer) {
    TrajectoryRecord record = forward_sweep(spec, fields, ens0, config);

    OuterIterate it;
    const std::size_t last = std::size_t(config.steps);
    it.terminal_residual =
        terminal_score_residual(record.fields.score[last], record.states[last], spec.piT);
    it.gauss_kl = [&] {
      Ensemble terminal;
      terminal.states = record.states[last];
      return marginal_divergence(terminal, spec.piT, DivergenceMetric::GaussKl);
    }();
    it.control_cost = control_cost(record, spec);

    terminal_acc = accumulate_terminal(terminal_acc, spec.piT, record.fields.score[last],
                                       config.ipf.damping, record.states[last], config.basis);
    record.terminal_potential = terminal_acc;

    FieldStack new_fields = backward_sweep(record, terminal_acc, spec, config);
    it.action = action_value(record, spec);
    it.field_change = control_field_change(fields, new_fields, probes, spec);
    report.history.push_back(it);

    const bool done = it.terminal_residual <= config.ipf.tol_terminal &&
                      it.field_change <= config.ipf.tol_fields;
    if (done || outer + 1 == config.ipf.max_outer) {
      report.converged = done;
      report.energy_trace.resize(record.states.size());
      for (std::size_t k = 0; k < record.states.size(); ++k)
        report.energy_trace[k] =
            hamiltonian_energy(record.states[k], record.fields.psi[k], spec);
      report.record = std::move(record);
      break;
    }
    fields = std::move(new_fields);
  }
  return report;
}

}  // namespace otbridge
