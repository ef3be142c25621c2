#include "otbridge/ensemble.hpp"

#include <cmath>

namespace otbridge {

Ensemble init_ensemble(const ProblemSpec& spec, Eigen::Index n, std::uint64_t seed) {
  if (n < 2) throw SpecError("init_ensemble: need n >= 2 particles");
  Ensemble ens;
  ens.labels = sample_dist(spec.pi0, n, seed);
  ens.states = ens.labels;
  ens.costates = Eigen::MatrixXd::Zero(n, spec.d_x);
  ens.time = 0.0;
  return ens;
}

Moments empirical_moments(const Eigen::MatrixXd& states) {
  const Eigen::Index n = states.rows();
  if (n < 2) throw SpecError("empirical_moments: need n >= 2");
  Moments m;
  m.mean = states.colwise().mean();
  const Eigen::MatrixXd centered = states.rowwise() - m.mean.transpose();
  m.cov = (centered.transpose() * centered) / double(n - 1);
  m.cov = (0.5 * (m.cov + m.cov.transpose())).eval();
  return m;
}

Moments empirical_moments(const Ensemble& ens) { return empirical_moments(ens.states); }

double gaussian_kl(const Eigen::VectorXd& m0, const Eigen::MatrixXd& c0,
                   const Eigen::VectorXd& m1, const Eigen::MatrixXd& c1) {
  const Eigen::Index d = m0.size();
  const Eigen::LLT<Eigen::MatrixXd> llt1(c1);
  if (llt1.info() != Eigen::Success)
    throw NumericalError("gaussian_kl: reference covariance not positive definite");
  const Eigen::LLT<Eigen::MatrixXd> llt0(c0);
  if (llt0.info() != Eigen::Success)
    throw NumericalError("gaussian_kl: degenerate ensemble covariance");
  const double log_det1 = 2.0 * llt1.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_det0 = 2.0 * llt0.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const Eigen::VectorXd diff = m1 - m0;
  const double trace = llt1.solve(c0).trace();
  const double quad = diff.dot(llt1.solve(diff));
  return 0.5 * (trace + quad - double(d) + log_det1 - log_det0);
}

namespace {

double energy_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = y.rows();
  double cross = 0.0, within_x = 0.0, within_y = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) cross += (x.row(i) - y.row(j)).norm();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) within_x += (x.row(i) - x.row(j)).norm();
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) within_y += (y.row(i) - y.row(j)).norm();
  const double ed = 2.0 * cross / double(n * m) - within_x / double(n * n) -
                    within_y / double(m * m);
  return std::max(ed, 0.0);
}

}  // namespace

double marginal_divergence(const Ensemble& ens, const DistributionSpec& target,
                           DivergenceMetric metric) {
  switch (metric) {
    case DivergenceMetric::GaussKl: {
      const Moments m = empirical_moments(ens);
      if (Eigen::LLT<Eigen::MatrixXd>(m.cov).info() != Eigen::Success)
        throw NumericalError("marginal_divergence: degenerate ensemble covariance");
      return gaussian_kl(m.mean, m.cov, target.moment_mean(), target.moment_cov());
    }
    case DivergenceMetric::EnergyDistance: {
      const Eigen::MatrixXd fresh = sample_dist(target, ens.size(), kEnergyDistanceSeed);
      return energy_distance(ens.states, fresh);
    }
  }
  throw SpecError("marginal_divergence: unknown metric");
}

}  // namespace otbridge
