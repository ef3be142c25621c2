#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "otbridge/problem.hpp"
#include "otbridge/score.hpp"

namespace otbridge {

enum class BasisFamily { Quadratic, QuadraticRbf };

struct BasisConfig {
  BasisFamily family = BasisFamily::Quadratic;
  int n_centers = 64;        // rbf centers (subsampled from the states)
  double bandwidth = 0.0;    // <= 0: median pairwise distance among centers
  double ridge = 0.0;        // gamma, penalizes each stored coefficient once
  std::uint64_t center_seed = 0;
};

/// Finite-basis potential psi(x) = c + l.x + x.Q x / 2 + sum_j w_j
/// exp(-|x-c_j|^2 / 2h^2) with exact symmetric Q and closed-form first,
/// second, and contracted third derivatives. The constant is gauge (only
/// grad/hess enter the dynamics) and is fixed to 0 by the fitters.
class PotentialModel {
 public:
  struct RbfBlock {
    Eigen::MatrixXd centers;  // m x d
    Eigen::VectorXd weights;
    double bandwidth = 1.0;
  };

  PotentialModel() = default;
  PotentialModel(Eigen::VectorXd linear, Eigen::MatrixXd quadratic);
  static PotentialModel zero(int dim);

  int dim() const { return int(linear_.size()); }
  bool has_rbf() const { return !rbf_.empty(); }
  const Eigen::VectorXd& linear() const { return linear_; }
  const Eigen::MatrixXd& quadratic() const { return quad_; }
  const std::vector<RbfBlock>& rbf_blocks() const { return rbf_; }
  double constant() const { return constant_; }

  void append_rbf(RbfBlock block);

  double value(const Eigen::VectorXd& x) const;
  void grad_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  void hess_into(const Eigen::VectorXd& x, Eigen::MatrixXd& out) const;
  /// grad_x (Sigma : D^2 psi)(x); identically zero for the quadratic part.
  void grad_sigma_trace_into(const Eigen::VectorXd& x, const Eigen::MatrixXd& sigma,
                             Eigen::VectorXd& out) const;

  Eigen::VectorXd grad(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd hess(const Eigen::VectorXd& x) const;

 private:
  double constant_ = 0.0;
  Eigen::VectorXd linear_;
  Eigen::MatrixXd quad_;
  std::vector<RbfBlock> rbf_;
};

struct PotentialEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  Eigen::VectorXd grad_trace;  // grad(Sigma : D^2 psi)
};

PotentialEval eval_potential(const PotentialModel& model, const Eigen::VectorXd& x,
                             const Eigen::MatrixXd& sigma);

/// Adjoint matching: minimizes (1/n) sum_i |P_i - grad psi(X_i)|^2 + gamma
/// |coeffs|^2 over the basis coefficients by linear least squares. RBF centers
/// are a uniform subsample of the states drawn with the config seed.
/// Throws NumericalError for a rank-deficient normal system at gamma = 0.
PotentialModel fit_potential(const Eigen::MatrixXd& states, const Eigen::MatrixXd& costates,
                             const BasisConfig& basis);

/// One outer-loop terminal correction: fits an increment whose gradient
/// matches grad log piT - s_T at the terminal states and returns
/// acc + damping * increment (coefficient-wise; RBF blocks concatenated).
PotentialModel accumulate_terminal(const PotentialModel& acc, const DistributionSpec& piT,
                                   const ScoreField& terminal_score, double damping,
                                   const Eigen::MatrixXd& states_T, const BasisConfig& basis);

/// acc + scale * delta, coefficient-wise.
PotentialModel add_scaled(PotentialModel acc, const PotentialModel& delta, double scale);

}  // namespace otbridge
