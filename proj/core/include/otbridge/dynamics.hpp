#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "otbridge/ensemble.hpp"
#include "otbridge/potential.hpp"
#include "otbridge/problem.hpp"
#include "otbridge/score.hpp"

namespace otbridge {

/// Uniform grid t_k = k T / M with the endpoint pinned to T exactly.
struct TimeGrid {
  int steps = 1;
  double horizon = 0.0;

  double dt() const { return horizon / steps; }
  double time(int k) const {
    return k >= steps ? horizon : horizon * (double(k) / double(steps));
  }
};

/// Per-slice potentials psi_k and score fields s_k, k = 0..M.
struct FieldStack {
  std::vector<PotentialModel> psi;
  std::vector<ScoreField> score;
  GaugeMode gauge = GaugeMode::Natural;

  int slices() const { return int(psi.size()); }
  static FieldStack zero(int slices, int dim, GaugeMode gauge);
};

/// Discrete realization of (X_t, P_t, psi_t): states per slice, costates
/// filled by the backward sweep, the field stack that produced the states,
/// and the accumulated terminal potential.
struct TrajectoryRecord {
  TimeGrid grid;
  std::vector<Eigen::MatrixXd> states;
  std::vector<Eigen::MatrixXd> costates;
  FieldStack fields;
  PotentialModel terminal_potential;

  Eigen::Index particles() const { return states.empty() ? 0 : states.front().rows(); }
};

/// Optimal control law u(x) = R G^T grad psi(x); reduces to R grad psi at G = I.
class ControlField {
 public:
  ControlField(const PotentialModel& psi, const Eigen::MatrixXd& r, const Eigen::MatrixXd& g);
  void eval_into(const Eigen::VectorXd& x, Eigen::VectorXd& out, Eigen::VectorXd& work) const;
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;

 private:
  const PotentialModel* psi_;
  Eigen::MatrixXd rgt_;  // R G^T
};

ControlField control_field(const PotentialModel& psi, const Eigen::MatrixXd& r,
                           const Eigen::MatrixXd& g);

/// One classical RK4 step of the coupled per-particle system
///   dX/dt = b(X) + G u(X) + beta(X),   dP/dt = -grad(S:D^2 psi)(X) + D^2 psi(X) beta(X)
/// with the fields frozen over the step. Throws NumericalError naming the
/// particle and time when a state goes non-finite.
Ensemble step_meanfield(const Ensemble& ens, const PotentialModel& psi, const BetaField& beta,
                        double dt, const ProblemSpec& spec);

/// Stage-resolved RK4: fields evaluated at the stage times t, t + dt/2, t + dt.
/// Used when time-accurate (e.g. analytic) fields are available; the frozen
/// overload forwards here with all three slots equal.
Ensemble step_meanfield(const Ensemble& ens, const PotentialModel& psi0, const BetaField& beta0,
                        const PotentialModel& psi_half, const BetaField& beta_half,
                        const PotentialModel& psi1, const BetaField& beta1, double dt,
                        const ProblemSpec& spec);

/// Heun (trapezoidal) reverse step of the costate equation along the stored
/// state path, with psi_next and beta frozen over the step.
Eigen::MatrixXd backward_step_costate(const Eigen::MatrixXd& states_k,
                                      const Eigen::MatrixXd& states_k1,
                                      const Eigen::MatrixXd& costates_k1,
                                      const PotentialModel& psi_next, const BetaField& beta,
                                      double dt, const ProblemSpec& spec);

enum class FbsdeScheme { Ito, Stratonovich };

/// Pathwise step with the stochastic gauge: shared noise increments
/// dbeta_i = sqrt(2 dt) Sigma^{1/2} xi_i, xi addressed per (seed, step, particle).
/// Forward: X += (b + G u(X)) dt + dbeta. Costate:
///   Ito:          P += D^2 psi(X) dbeta
///   Stratonovich: P += -grad(S:D^2 psi)(X) dt + D^2 psi(X_mid) dbeta.
Ensemble step_fbsde(const Ensemble& ens, const PotentialModel& psi, double dt,
                    std::uint64_t seed, int step_index, FbsdeScheme scheme,
                    const ProblemSpec& spec);

/// Reverse of the step_fbsde costate update along recorded states,
/// regenerating the identical noise increments from (seed, step, particle).
Eigen::MatrixXd backward_step_costate_fbsde(const Eigen::MatrixXd& states_k,
                                            const Eigen::MatrixXd& states_k1,
                                            const Eigen::MatrixXd& costates_k1,
                                            const PotentialModel& psi_next, double dt,
                                            std::uint64_t seed, int step_index,
                                            FbsdeScheme scheme, const ProblemSpec& spec);

/// Heun step of the value-tracking system
///   dX/dt = G u(X) - Sigma s(X),
///   dY/dt = |u(X)|^2_R / 2 - S:D^2 psi(X) - <grad psi(X), Sigma s(X)>.
struct LagrangianState {
  Eigen::MatrixXd states;
  Eigen::VectorXd values;
};
LagrangianState step_lagrangian_value(const Eigen::MatrixXd& states,
                                      const Eigen::VectorXd& values,
                                      const PotentialModel& psi, const ScoreField& score,
                                      double dt, const ProblemSpec& spec);

/// Conserved value (1/n) sum_i [ |u(X_i)|^2_R / 2 + S : D^2 psi(X_i) ].
double hamiltonian_energy(const Eigen::MatrixXd& states, const PotentialModel& psi,
                          const ProblemSpec& spec);
double hamiltonian_energy(const Ensemble& ens, const PotentialModel& psi,
                          const ProblemSpec& spec);

/// Trapezoidal quadrature in t of (1/n) sum_i |u_k(X_{k,i})|^2_R / 2.
double control_cost(const TrajectoryRecord& record, const ProblemSpec& spec);

/// Seed of the fresh target draws used for the boundary terms of the action.
inline constexpr std::uint64_t kActionBoundarySeed = 0xac7104;

/// Discretized action: time-trapezoid of
///   (1/n) sum_i [ <P, Xdot - b - G u> - S:D^2 psi + |u|^2_R / 2 - <P - grad psi, beta> ]
/// with Xdot from stored-state finite differences, plus the boundary terms
/// -mean psi_T(X_T) + piT[psi_T] + mean psi_0(X_0) - pi0[psi_0] (Monte Carlo
/// with kActionBoundarySeed).
double action_value(const TrajectoryRecord& record, const ProblemSpec& spec);

/// Max over interior steps and probe rows of
///   | (grad psi_{k+1} - grad psi_k)/dt + avg_k,k+1[ D^2 psi u + grad(S:D^2 psi) ] |
/// i.e. the time-centered residual of the gradient form of the HJB equation.
double hjb_gradient_residual(const FieldStack& fields, const TimeGrid& grid,
                             const Eigen::MatrixXd& probes, const ProblemSpec& spec);

}  // namespace otbridge
