#pragma once

#include <Eigen/Dense>
#include <memory>

#include "otbridge/ensemble.hpp"

namespace otbridge {

enum class ScoreMethod { Gaussian, Kde };
enum class GaugeMode { Natural, Zero };

/// Estimate of grad log rho from particles, evaluable anywhere. Immutable
/// after construction; evaluation is pure and thread-safe.
///   Gaussian: s(x) = -Chat^{-1} (x - mhat) from empirical moments.
///   Kde:      gradient of the log of an isotropic Gaussian-kernel density.
class ScoreField {
 public:
  ScoreField() = default;

  /// Throws NumericalError("degenerate ensemble covariance") when cov is not PD.
  static ScoreField gaussian_moments(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  /// bandwidth <= 0 selects Silverman's rule from the reference points.
  static ScoreField kde(std::shared_ptr<const Eigen::MatrixXd> points, double bandwidth = 0.0);

  void score_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const;
  Eigen::VectorXd score(const Eigen::VectorXd& x) const;

  ScoreMethod method() const { return method_; }
  int dim() const { return dim_; }
  double bandwidth() const { return bandwidth_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  /// Covariance reproduced from the stored factor (Gaussian method).
  Eigen::MatrixXd covariance() const;

 private:
  ScoreMethod method_ = ScoreMethod::Gaussian;
  int dim_ = 0;
  Eigen::VectorXd mean_;
  Eigen::LLT<Eigen::MatrixXd> cov_llt_;
  std::shared_ptr<const Eigen::MatrixXd> points_;
  double bandwidth_ = 0.0;
};

ScoreField estimate_score(const Eigen::MatrixXd& states, ScoreMethod method,
                          double kde_bandwidth = 0.0);
ScoreField estimate_score(const Ensemble& ens, ScoreMethod method, double kde_bandwidth = 0.0);

/// Gauge field beta(x): Natural -> -Sigma s(x); Zero -> 0.
class BetaField {
 public:
  BetaField() = default;
  BetaField(GaugeMode mode, ScoreField score, Eigen::MatrixXd sigma);
  static BetaField zero(int dim);

  /// `work` is caller-provided scratch (resized as needed).
  void eval_into(const Eigen::VectorXd& x, Eigen::VectorXd& out, Eigen::VectorXd& work) const;
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;
  GaugeMode mode() const { return mode_; }
  int dim() const { return dim_; }

 private:
  GaugeMode mode_ = GaugeMode::Zero;
  int dim_ = 0;
  ScoreField score_;
  Eigen::MatrixXd sigma_;
};

BetaField beta_field(const ScoreField& score, const Eigen::MatrixXd& sigma, GaugeMode gauge);

}  // namespace otbridge
