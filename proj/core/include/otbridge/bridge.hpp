#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "otbridge/dynamics.hpp"
#include "otbridge/ensemble.hpp"
#include "otbridge/potential.hpp"
#include "otbridge/problem.hpp"
#include "otbridge/score.hpp"

namespace otbridge {

enum class DynamicsMode { MeanField, FbsdeIto, FbsdeStratonovich };

struct IpfConfig {
  int max_outer = 30;
  double damping = 1.0;          // alpha in (0, 1]
  double tol_terminal = 1e-3;    // RMS terminal score residual
  double tol_fields = 1e-3;      // RMS control-field change on the probe grid
};

struct SolverConfig {
  Eigen::Index n_particles = 4096;
  int steps = 200;               // M
  std::uint64_t seed = 0;
  ScoreMethod score_method = ScoreMethod::Gaussian;
  double kde_bandwidth = 0.0;    // <= 0: Silverman
  BasisConfig basis;
  GaugeMode gauge = GaugeMode::Natural;
  DynamicsMode mode = DynamicsMode::MeanField;
  IpfConfig ipf;
  std::vector<int> record_slices;  // persisted by the CLI; empty = quartiles
};

struct OuterIterate {
  double terminal_residual = 0.0;
  double field_change = 0.0;
  double gauss_kl = 0.0;
  double control_cost = 0.0;
  double action = 0.0;
};

struct SolveReport {
  std::vector<OuterIterate> history;
  std::vector<double> energy_trace;  // per slice, final iteration
  bool converged = false;
  TrajectoryRecord record;
};

/// Fixed probe points used for control-field change norms and field dumps:
/// a deterministic grid spanning both marginals (no dependence on the run seed).
Eigen::MatrixXd solver_probe_grid(const ProblemSpec& spec);

/// Propagates the ensemble slice to slice with the per-slice potentials,
/// re-estimating the score at every slice and recording states and score
/// fields. Costates are carried forward only as diagnostics. Throws
/// NumericalError with the slice index on particle blow-up (|X| > 1e8).
TrajectoryRecord forward_sweep(const ProblemSpec& spec, const FieldStack& fields,
                               const Ensemble& ens0, const SolverConfig& config);

/// Terminal condition P_M = grad psi_acc(X_M), then for k = M-1 .. 0: fit
/// psi_{k+1} from (X_{k+1}, P_{k+1}), step the costates back along the
/// recorded path (recorded beta; regenerated noise in FBSDE modes), and
/// finally fit psi_0. Fills record.costates; returns the new stack.
FieldStack backward_sweep(TrajectoryRecord& record, const PotentialModel& terminal_model,
                          const ProblemSpec& spec, const SolverConfig& config);

/// Outer loop: forward sweep, terminal score-residual correction with damping,
/// backward refit; stops when the residual and the control-field change both
/// meet their tolerances, or at max_outer (converged = false, not an error).
SolveReport solve(const ProblemSpec& spec, const SolverConfig& config);

/// Warm start from a known field stack and accumulated terminal potential.
SolveReport solve(const ProblemSpec& spec, const SolverConfig& config,
                  FieldStack initial_fields, PotentialModel initial_terminal);

}  // namespace otbridge
