#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "otbridge/errors.hpp"

namespace otbridge {

enum class DistKind { Gaussian, GaussianMixture };

struct GaussianComponent {
  double weight = 1.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Gaussian or Gaussian-mixture marginal. Restricting to this class keeps
/// log-densities and scores closed-form, so the terminal correction of the
/// outer loop carries no density-estimation error.
struct DistributionSpec {
  DistKind kind = DistKind::Gaussian;
  std::vector<GaussianComponent> components;

  int dim() const { return components.empty() ? 0 : int(components.front().mean.size()); }

  /// Mean and covariance of the full distribution (mixture moments folded in).
  Eigen::VectorXd moment_mean() const;
  Eigen::MatrixXd moment_cov() const;

  static DistributionSpec gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  static DistributionSpec mixture(std::vector<GaussianComponent> components);
};

/// Throws SpecError naming `path` when covariances are not symmetric positive
/// definite (eigenvalue tolerance 1e-12) or mixture weights are malformed.
void validate_dist(const DistributionSpec& dist, const std::string& path);

enum class DriftKind { Zero, Linear, Langevin };

/// Bridge problem: marginals pi0/piT, horizon, diffusion Sigma (PSD), control
/// weight R (PD), actuation G, and base drift b(x).
struct ProblemSpec {
  int d_x = 0;
  int d_u = 0;
  double horizon = 0.0;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd r;
  Eigen::MatrixXd g;
  DriftKind drift = DriftKind::Zero;
  Eigen::MatrixXd drift_matrix;  // A for DriftKind::Linear, unused otherwise
  DistributionSpec pi0;
  DistributionSpec piT;

  /// b(x) appended to `out`.
  void drift_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
};

/// Validates all structural invariants and returns the spec unchanged
/// (idempotent). Throws SpecError with the offending field path.
ProblemSpec validate_spec(ProblemSpec spec);

struct LogDensityScore {
  double log_density = 0.0;
  Eigen::VectorXd score;
};

/// Exact log pi(x) and grad log pi(x); mixture scores combine component
/// scores with posterior responsibilities. Rejects non-finite x.
LogDensityScore dist_log_density_score(const DistributionSpec& dist, const Eigen::VectorXd& x);

/// n i.i.d. samples, one row per draw. Counter-based per-index streams:
/// bit-reproducible for a fixed seed independent of evaluation order.
Eigen::MatrixXd sample_dist(const DistributionSpec& dist, Eigen::Index n, std::uint64_t seed);

}  // namespace otbridge
