#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "otbridge/potential.hpp"
#include "otbridge/problem.hpp"
#include "otbridge/score.hpp"

// Independent 1-D reference solutions used by tests and the compare command.
// Nothing here shares code with the particle solver.

namespace otbridge {

/// CDF of a 1-D Gaussian (mixture), Phi-based.
double dist_cdf_1d(const DistributionSpec& dist, double x);
/// Quantile by bisection on the CDF; u must lie in (0, 1).
double dist_quantile_1d(const DistributionSpec& dist, double u);

/// Monotone-rearrangement displacement interpolation between 1-D marginals:
/// X_t = (1 - t/T) F_0^{-1}(u) + (t/T) F_T^{-1}(u). Gaussian pairs use the
/// closed form; mixtures go through numeric quantiles.
class QuantileInterpolation {
 public:
  QuantileInterpolation(DistributionSpec pi0, DistributionSpec piT, double horizon);

  /// Transport position of a particle starting at x0.
  double map(double x0, double t) const;
  /// (mean, variance) of the time-t marginal.
  std::pair<double, double> moments(double t) const;
  double horizon() const { return horizon_; }

 private:
  DistributionSpec pi0_, piT_;
  double horizon_;
  bool gaussian_pair_;
};

/// Entropic bridge on a uniform 1-D grid: Gibbs kernel = heat kernel with
/// variance 2 sigma^2 T, log-domain Sinkhorn scaling to a fixed point,
/// intermediate marginals from the partial-horizon potentials phi, phi_hat.
struct GridBridge {
  Eigen::VectorXd grid;
  double dx = 0.0;
  double sigma2 = 0.0;
  double horizon = 0.0;
  std::vector<double> times;
  std::vector<Eigen::VectorXd> marginals;     // normalized densities per time
  std::vector<Eigen::VectorXd> log_phi;       // backward potential per time
  std::vector<Eigen::VectorXd> log_phi_hat;   // forward potential per time
  Eigen::VectorXd log_scaling_0;              // log a on the grid
  Eigen::VectorXd log_scaling_T;              // log b on the grid
  int iterations = 0;

  std::pair<double, double> moments(std::size_t time_index) const;
  /// Row/column marginals of the transport plan (densities on the grid),
  /// for checking the Sinkhorn fixed point against pi0 / piT.
  std::pair<Eigen::VectorXd, Eigen::VectorXd> plan_marginals() const;
};

/// Grid range covering both marginals (>= 8 standard deviations) plus the
/// diffusive spread of the Gibbs kernel.
std::pair<double, double> sinkhorn_grid_range(const DistributionSpec& pi0,
                                              const DistributionSpec& piT, double sigma2,
                                              double horizon);

GridBridge grid_sinkhorn_bridge(const DistributionSpec& pi0, const DistributionSpec& piT,
                                double sigma2, double horizon, double lo, double hi,
                                int points, const std::vector<double>& times);

/// Closed-form 1-D Gaussian bridge under dX = u dt + sqrt(2 sigma^2) dB with
/// u_t = grad psi_t and R = 1. The quadratic ansatz grad psi_t(x) = a_t x +
/// b_t reduces the coupled density/potential equations to
///   da/dt = -a^2,  db/dt = -a b,  dm/dt = a m + b,  dv/dt = 2 a v + 2 sigma^2,
/// a scalar boundary-value problem in the initial coefficient a_0 (solved by
/// bisection on the monotone terminal-variance shooting map).
class GaussianBridgeCoeffs {
 public:
  GaussianBridgeCoeffs(double m0, double v0, double mT, double vT, double sigma2,
                       double horizon);

  double a(double t) const { return a0_ / lam(t); }
  double b(double t) const { return b0_ / lam(t); }
  double mean(double t) const { return lam(t) * m0_ + b0_ * t; }
  double variance(double t) const { return lam(t) * lam(t) * v0_ + 2.0 * sigma2_ * t * lam(t); }
  double grad_psi(double t, double x) const { return a(t) * x + b(t); }
  /// Natural gauge field sigma^2 (x - m_t) / v_t.
  double beta(double t, double x) const {
    return sigma2_ * (x - mean(t)) / variance(t);
  }

  /// Quadratic potential slice and moment-matched Gaussian score at time t.
  PotentialModel psi_model(double t) const;
  ScoreField score_field(double t) const;

  double a0() const { return a0_; }
  double b0() const { return b0_; }
  double sigma2() const { return sigma2_; }
  double horizon() const { return horizon_; }

 private:
  double lam(double t) const { return 1.0 + a0_ * t; }
  double m0_, v0_, mT_, vT_, sigma2_, horizon_;
  double a0_ = 0.0, b0_ = 0.0;
};

/// Throws SpecError for non-1-D or non-Gaussian marginals and NumericalError
/// on bisection bracket failure.
GaussianBridgeCoeffs gaussian_sb_closed_form(const DistributionSpec& pi0,
                                             const DistributionSpec& piT, double sigma2,
                                             double horizon);

}  // namespace otbridge
