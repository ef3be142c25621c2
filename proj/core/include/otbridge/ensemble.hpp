#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "otbridge/problem.hpp"

namespace otbridge {

/// Labeled particle system: rows of `labels` are the labels a (fixed for all
/// t), rows of `states`/`costates` are X_t(a) and P_t(a). A value type; the
/// integrators produce new ensembles and never touch labels.
struct Ensemble {
  Eigen::MatrixXd labels;
  Eigen::MatrixXd states;
  Eigen::MatrixXd costates;
  double time = 0.0;

  Eigen::Index size() const { return states.rows(); }
  int dim() const { return int(states.cols()); }
};

/// Realizes the initial weak constraint with b_0(a) = a: labels and states are
/// the same pi0 sample, costates start at zero (the U = 0 initial guess).
/// Rejects n < 2 (covariance undefined).
Ensemble init_ensemble(const ProblemSpec& spec, Eigen::Index n, std::uint64_t seed);

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // 1/(n-1) normalization, symmetrized exactly
};

Moments empirical_moments(const Eigen::MatrixXd& states);
Moments empirical_moments(const Ensemble& ens);

/// KL(N(m0,C0) || N(m1,C1)), closed form.
double gaussian_kl(const Eigen::VectorXd& m0, const Eigen::MatrixXd& c0,
                   const Eigen::VectorXd& m1, const Eigen::MatrixXd& c1);

enum class DivergenceMetric { GaussKl, EnergyDistance };

/// Seed of the internal target draw used by the energy-distance metric.
inline constexpr std::uint64_t kEnergyDistanceSeed = 0x5eed;

/// GaussKl: KL of the moment-matched Gaussians (exact for Gaussian targets).
/// EnergyDistance: V-statistic against `n` fresh target samples drawn with
/// kEnergyDistanceSeed; O(n^2), intended for diagnostics at desk scale.
double marginal_divergence(const Ensemble& ens, const DistributionSpec& target,
                           DivergenceMetric metric);

}  // namespace otbridge
