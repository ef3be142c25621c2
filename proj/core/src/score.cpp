#include "otbridge/score.hpp"

#include <cmath>
#include <limits>

namespace otbridge {

ScoreField ScoreField::gaussian_moments(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  ScoreField f;
  f.method_ = ScoreMethod::Gaussian;
  f.dim_ = int(mean.size());
  f.mean_ = std::move(mean);
  f.cov_llt_.compute(cov);
  if (f.cov_llt_.info() != Eigen::Success)
    throw NumericalError("estimate_score: degenerate ensemble covariance");
  return f;
}

ScoreField ScoreField::kde(std::shared_ptr<const Eigen::MatrixXd> points, double bandwidth) {
  if (!points || points->rows() < 2) throw SpecError("kde score: need n >= 2 points");
  ScoreField f;
  f.method_ = ScoreMethod::Kde;
  f.dim_ = int(points->cols());
  f.points_ = std::move(points);
  if (bandwidth > 0.0) {
    f.bandwidth_ = bandwidth;
  } else {
    // Silverman's rule with the per-dimension standard deviations averaged
    // into the single isotropic bandwidth.
    const Eigen::MatrixXd& p = *f.points_;
    const Eigen::Index n = p.rows();
    const Eigen::VectorXd mean = p.colwise().mean();
    const Eigen::VectorXd var =
        ((p.rowwise() - mean.transpose()).array().square().colwise().sum() / double(n - 1))
            .transpose();
    const double sigma_bar = var.array().sqrt().mean();
    const double d = double(f.dim_);
    f.bandwidth_ = sigma_bar * std::pow(4.0 / ((d + 2.0) * double(n)), 1.0 / (d + 4.0));
  }
  if (!(f.bandwidth_ > 0.0)) throw NumericalError("kde score: bandwidth collapsed to zero");
  return f;
}

void ScoreField::score_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  if (method_ == ScoreMethod::Gaussian) {
    out = x - mean_;
    cov_llt_.solveInPlace(out);
    out = -out;
    return;
  }
  // KDE: softmax-weighted sum of (c_i - x) / h^2 via log-sum-exp.
  const Eigen::MatrixXd& p = *points_;
  const double inv_h2 = 1.0 / (bandwidth_ * bandwidth_);
  double max_log = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd logs(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    logs[i] = -0.5 * inv_h2 * (p.row(i).transpose() - x).squaredNorm();
    max_log = std::max(max_log, logs[i]);
  }
  out.setZero(x.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double w = std::exp(logs[i] - max_log);
    total += w;
    out += w * (p.row(i).transpose() - x);
  }
  out *= inv_h2 / total;
}

Eigen::VectorXd ScoreField::score(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out;
  score_into(x, out);
  return out;
}

Eigen::MatrixXd ScoreField::covariance() const {
  const Eigen::MatrixXd l = cov_llt_.matrixL();
  return l * l.transpose();
}

ScoreField estimate_score(const Eigen::MatrixXd& states, ScoreMethod method,
                          double kde_bandwidth) {
  if (states.rows() < 2) throw SpecError("estimate_score: need n >= 2 particles");
  if (method == ScoreMethod::Gaussian) {
    Moments m = empirical_moments(states);
    return ScoreField::gaussian_moments(std::move(m.mean), std::move(m.cov));
  }
  return ScoreField::kde(std::make_shared<Eigen::MatrixXd>(states), kde_bandwidth);
}

ScoreField estimate_score(const Ensemble& ens, ScoreMethod method, double kde_bandwidth) {
  return estimate_score(ens.states, method, kde_bandwidth);
}

BetaField::BetaField(GaugeMode mode, ScoreField score, Eigen::MatrixXd sigma)
    : mode_(mode), dim_(int(sigma.rows())), score_(std::move(score)), sigma_(std::move(sigma)) {}

BetaField BetaField::zero(int dim) {
  BetaField b;
  b.mode_ = GaugeMode::Zero;
  b.dim_ = dim;
  return b;
}

void BetaField::eval_into(const Eigen::VectorXd& x, Eigen::VectorXd& out,
                          Eigen::VectorXd& work) const {
  if (mode_ == GaugeMode::Zero) {
    out.setZero(x.size());
    return;
  }
  score_.score_into(x, work);
  out.noalias() = -(sigma_ * work);
}

Eigen::VectorXd BetaField::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out, work;
  eval_into(x, out, work);
  return out;
}

BetaField beta_field(const ScoreField& score, const Eigen::MatrixXd& sigma, GaugeMode gauge) {
  if (gauge == GaugeMode::Zero) return BetaField::zero(int(sigma.rows()));
  return BetaField(GaugeMode::Natural, score, sigma);
}

}  // namespace otbridge
