#include "otbridge/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace otbridge {

namespace {

double gaussian_cdf(double x, double mean, double stddev) {
  return 0.5 * std::erfc(-(x - mean) / (stddev * std::sqrt(2.0)));
}

void require_1d(const DistributionSpec& dist, const char* who) {
  if (dist.dim() != 1) throw SpecError(std::string(who) + ": requires 1-D marginals");
}

bool is_single_gaussian(const DistributionSpec& d) { return d.components.size() == 1; }

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

double dist_cdf_1d(const DistributionSpec& dist, double x) {
  require_1d(dist, "dist_cdf_1d");
  double f = 0.0;
  for (const auto& c : dist.components)
    f += c.weight * gaussian_cdf(x, c.mean[0], std::sqrt(c.cov(0, 0)));
  return f;
}

double dist_quantile_1d(const DistributionSpec& dist, double u) {
  require_1d(dist, "dist_quantile_1d");
  if (!(u > 0.0 && u < 1.0)) throw SpecError("dist_quantile_1d: u must lie in (0, 1)");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : dist.components) {
    const double s = std::sqrt(c.cov(0, 0));
    lo = std::min(lo, c.mean[0] - 14.0 * s);
    hi = std::max(hi, c.mean[0] + 14.0 * s);
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dist_cdf_1d(dist, mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

QuantileInterpolation::QuantileInterpolation(DistributionSpec pi0, DistributionSpec piT,
                                             double horizon)
    : pi0_(std::move(pi0)), piT_(std::move(piT)), horizon_(horizon) {
  require_1d(pi0_, "QuantileInterpolation");
  require_1d(piT_, "QuantileInterpolation");
  if (!(horizon_ > 0.0)) throw SpecError("QuantileInterpolation: horizon must be > 0");
  gaussian_pair_ = is_single_gaussian(pi0_) && is_single_gaussian(piT_);
}

double QuantileInterpolation::map(double x0, double t) const {
  const double tau = t / horizon_;
  if (gaussian_pair_) {
    const double m0 = pi0_.components[0].mean[0], s0 = std::sqrt(pi0_.components[0].cov(0, 0));
    const double mT = piT_.components[0].mean[0], sT = std::sqrt(piT_.components[0].cov(0, 0));
    const double target = mT + (sT / s0) * (x0 - m0);
    return (1.0 - tau) * x0 + tau * target;
  }
  const double u = std::clamp(dist_cdf_1d(pi0_, x0), 1e-15, 1.0 - 1e-15);
  return (1.0 - tau) * x0 + tau * dist_quantile_1d(piT_, u);
}

std::pair<double, double> QuantileInterpolation::moments(double t) const {
  const double tau = t / horizon_;
  if (gaussian_pair_) {
    const double m0 = pi0_.components[0].mean[0], s0 = std::sqrt(pi0_.components[0].cov(0, 0));
    const double mT = piT_.components[0].mean[0], sT = std::sqrt(piT_.components[0].cov(0, 0));
    const double m = (1.0 - tau) * m0 + tau * mT;
    const double s = (1.0 - tau) * s0 + tau * sT;
    return {m, s * s};
  }
  // Pushforward moments by quadrature over the quantile variable.
  const int quad_points = 4096;
  double mean = 0.0, second = 0.0;
  for (int i = 0; i < quad_points; ++i) {
    const double u = (i + 0.5) / quad_points;
    const double x =
        (1.0 - tau) * dist_quantile_1d(pi0_, u) + tau * dist_quantile_1d(piT_, u);
    mean += x;
    second += x * x;
  }
  mean /= quad_points;
  second /= quad_points;
  return {mean, second - mean * mean};
}

std::pair<double, double> sinkhorn_grid_range(const DistributionSpec& pi0,
                                              const DistributionSpec& piT, double sigma2,
                                              double horizon) {
  const double spread = 2.0 * std::sqrt(std::max(2.0 * sigma2 * horizon, 0.0));
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const DistributionSpec* d : {&pi0, &piT}) {
    for (const auto& c : d->components) {
      const double s = std::sqrt(c.cov(0, 0));
      lo = std::min(lo, c.mean[0] - 8.0 * s);
      hi = std::max(hi, c.mean[0] + 8.0 * s);
    }
  }
  return {lo - spread, hi + spread};
}

namespace {

// log heat-kernel density with the given variance, on grid offsets.
Eigen::MatrixXd log_heat_kernel(const Eigen::VectorXd& grid, double variance) {
  const Eigen::Index g = grid.size();
  Eigen::MatrixXd lk(g, g);
  const double norm = -0.5 * std::log(2.0 * M_PI * variance);
  for (Eigen::Index i = 0; i < g; ++i)
    for (Eigen::Index j = 0; j < g; ++j) {
      const double diff = grid[i] - grid[j];
      lk(i, j) = norm - 0.5 * diff * diff / variance;
    }
  return lk;
}

Eigen::VectorXd log_density_on_grid(const DistributionSpec& dist, const Eigen::VectorXd& grid,
                                    double dx) {
  Eigen::VectorXd ld(grid.size());
  Eigen::VectorXd x(1);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    x[0] = grid[i];
    ld[i] = dist_log_density_score(dist, x).log_density;
  }
  // Normalize the discrete mass to one.
  Eigen::VectorXd shifted = ld;
  const double log_mass = log_sum_exp(shifted) + std::log(dx);
  return ld.array() - log_mass;
}

}  // namespace

std::pair<double, double> GridBridge::moments(std::size_t time_index) const {
  const Eigen::VectorXd& rho = marginals.at(time_index);
  const double mean = (grid.array() * rho.array()).sum() * dx;
  const double var = ((grid.array() - mean).square() * rho.array()).sum() * dx;
  return {mean, var};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> GridBridge::plan_marginals() const {
  const Eigen::Index g = grid.size();
  const Eigen::MatrixXd lk = log_heat_kernel(grid, 2.0 * sigma2 * horizon);
  Eigen::VectorXd row(g), col(g), tmp(g);
  for (Eigen::Index i = 0; i < g; ++i) {
    tmp = lk.row(i).transpose() + log_scaling_T;
    row[i] = std::exp(log_scaling_0[i] + log_sum_exp(tmp) + std::log(dx));
  }
  for (Eigen::Index j = 0; j < g; ++j) {
    tmp = lk.col(j) + log_scaling_0;
    col[j] = std::exp(log_scaling_T[j] + log_sum_exp(tmp) + std::log(dx));
  }
  return {row, col};
}

GridBridge grid_sinkhorn_bridge(const DistributionSpec& pi0, const DistributionSpec& piT,
                                double sigma2, double horizon, double lo, double hi,
                                int points, const std::vector<double>& times) {
  require_1d(pi0, "grid_sinkhorn_bridge");
  require_1d(piT, "grid_sinkhorn_bridge");
  if (!(sigma2 > 0.0)) throw SpecError("grid_sinkhorn_bridge: sigma2 must be > 0");
  if (!(horizon > 0.0)) throw SpecError("grid_sinkhorn_bridge: horizon must be > 0");
  if (points < 8) throw SpecError("grid_sinkhorn_bridge: need at least 8 grid points");
  if (!(hi > lo)) throw SpecError("grid_sinkhorn_bridge: empty grid range");
  // Grid must cover at least 6 standard deviations of both marginals.
  for (const DistributionSpec* d : {&pi0, &piT})
    for (const auto& c : d->components) {
      const double s = std::sqrt(c.cov(0, 0));
      if (c.mean[0] - 6.0 * s < lo || c.mean[0] + 6.0 * s > hi)
        throw SpecError("grid_sinkhorn_bridge: grid does not cover 6 std of the marginals");
    }

  GridBridge bridge;
  bridge.sigma2 = sigma2;
  bridge.horizon = horizon;
  bridge.grid = Eigen::VectorXd::LinSpaced(points, lo, hi);
  bridge.dx = bridge.grid[1] - bridge.grid[0];
  bridge.times = times;

  const Eigen::Index g = points;
  const double kernel_var = 2.0 * sigma2 * horizon;
  const Eigen::MatrixXd lk = log_heat_kernel(bridge.grid, kernel_var);
  if (!lk.allFinite())
    throw NumericalError("grid_sinkhorn_bridge: grid underflow in the Gibbs kernel");

  const Eigen::VectorXd lp0 = log_density_on_grid(pi0, bridge.grid, bridge.dx);
  const Eigen::VectorXd lpT = log_density_on_grid(piT, bridge.grid, bridge.dx);
  const double ldx = std::log(bridge.dx);

  Eigen::VectorXd lf = Eigen::VectorXd::Zero(g);
  Eigen::VectorXd lg = Eigen::VectorXd::Zero(g);
  Eigen::VectorXd tmp(g), lf_new(g), lg_new(g);
  constexpr int kMaxIterations = 10000;
  constexpr double kTol = 1e-12;
  int it = 0;
  for (; it < kMaxIterations; ++it) {
    for (Eigen::Index i = 0; i < g; ++i) {
      tmp = lk.row(i).transpose() + lg;
      lf_new[i] = lp0[i] - (log_sum_exp(tmp) + ldx);
    }
    for (Eigen::Index j = 0; j < g; ++j) {
      tmp = lk.col(j) + lf_new;
      lg_new[j] = lpT[j] - (log_sum_exp(tmp) + ldx);
    }
    const double change = std::max((lf_new - lf).cwiseAbs().maxCoeff(),
                                   (lg_new - lg).cwiseAbs().maxCoeff());
    lf = lf_new;
    lg = lg_new;
    if (change <= kTol) break;
  }
  if (it >= kMaxIterations)
    throw NumericalError("grid_sinkhorn_bridge: Sinkhorn did not converge");
  bridge.iterations = it + 1;
  bridge.log_scaling_0 = lf;
  bridge.log_scaling_T = lg;

  // Intermediate marginals: rho_t = phi_hat_t * phi_t with the potentials
  // propagated through the partial-horizon heat kernels.
  for (double t : times) {
    if (t < -1e-12 || t > horizon + 1e-12)
      throw SpecError("grid_sinkhorn_bridge: requested time outside [0, T]");
    Eigen::VectorXd lphi_hat(g), lphi(g);
    if (t <= 1e-12 * horizon) {
      lphi_hat = lf;
    } else {
      const Eigen::MatrixXd lka = log_heat_kernel(bridge.grid, 2.0 * sigma2 * t);
      for (Eigen::Index z = 0; z < g; ++z) {
        tmp = lka.col(z) + lf;
        lphi_hat[z] = log_sum_exp(tmp) + ldx;
      }
    }
    if (t >= horizon * (1.0 - 1e-12)) {
      lphi = lg;
    } else {
      const Eigen::MatrixXd lkb = log_heat_kernel(bridge.grid, 2.0 * sigma2 * (horizon - t));
      for (Eigen::Index z = 0; z < g; ++z) {
        tmp = lkb.row(z).transpose() + lg;
        lphi[z] = log_sum_exp(tmp) + ldx;
      }
    }
    Eigen::VectorXd lrho = lphi_hat + lphi;
    const double shift = lrho.maxCoeff();
    Eigen::VectorXd rho = (lrho.array() - shift).exp();
    rho /= rho.sum() * bridge.dx;
    bridge.marginals.push_back(std::move(rho));
    bridge.log_phi.push_back(std::move(lphi));
    bridge.log_phi_hat.push_back(std::move(lphi_hat));
  }
  return bridge;
}

GaussianBridgeCoeffs::GaussianBridgeCoeffs(double m0, double v0, double mT, double vT,
                                           double sigma2, double horizon)
    : m0_(m0), v0_(v0), mT_(mT), vT_(vT), sigma2_(sigma2), horizon_(horizon) {
  if (!(v0 > 0.0) || !(vT > 0.0))
    throw SpecError("GaussianBridgeCoeffs: marginal variances must be > 0");
  if (sigma2 < 0.0) throw SpecError("GaussianBridgeCoeffs: sigma2 must be >= 0");
  if (!(horizon > 0.0)) throw SpecError("GaussianBridgeCoeffs: horizon must be > 0");

  // Shooting map lamT -> terminal variance, strictly increasing on lamT > 0:
  //   v(lamT) = lamT^2 v0 + 2 sigma^2 T lamT.
  const auto terminal_variance = [&](double lam_T) {
    return lam_T * lam_T * v0_ + 2.0 * sigma2_ * horizon_ * lam_T;
  };
  double lo = 1e-12;
  double hi = 1.0;
  int guard = 0;
  while (terminal_variance(hi) < vT_) {
    hi *= 2.0;
    if (++guard > 200)
      throw NumericalError("gaussian_sb_closed_form: bisection bracket failure");
  }
  if (terminal_variance(lo) > vT_)
    throw NumericalError("gaussian_sb_closed_form: bisection bracket failure");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (terminal_variance(mid) < vT_ ? lo : hi) = mid;
  }
  const double lam_T = 0.5 * (lo + hi);
  a0_ = (lam_T - 1.0) / horizon_;
  b0_ = (mT_ - lam_T * m0_) / horizon_;
}

PotentialModel GaussianBridgeCoeffs::psi_model(double t) const {
  Eigen::VectorXd linear(1);
  Eigen::MatrixXd quad(1, 1);
  linear[0] = b(t);
  quad(0, 0) = a(t);
  return PotentialModel(std::move(linear), std::move(quad));
}

ScoreField GaussianBridgeCoeffs::score_field(double t) const {
  Eigen::VectorXd mean(1);
  Eigen::MatrixXd cov(1, 1);
  mean[0] = this->mean(t);
  cov(0, 0) = variance(t);
  return ScoreField::gaussian_moments(std::move(mean), std::move(cov));
}

GaussianBridgeCoeffs gaussian_sb_closed_form(const DistributionSpec& pi0,
                                             const DistributionSpec& piT, double sigma2,
                                             double horizon) {
  require_1d(pi0, "gaussian_sb_closed_form");
  require_1d(piT, "gaussian_sb_closed_form");
  if (!is_single_gaussian(pi0) || !is_single_gaussian(piT))
    throw SpecError("gaussian_sb_closed_form: requires plain Gaussian marginals");
  return GaussianBridgeCoeffs(pi0.components[0].mean[0], pi0.components[0].cov(0, 0),
                              piT.components[0].mean[0], piT.components[0].cov(0, 0), sigma2,
                              horizon);
}

}  // namespace otbridge
