#include "otbridge/problem.hpp"

#include <cmath>
#include <limits>

#include "otbridge/rng.hpp"

namespace otbridge {

namespace {

constexpr double kSymTol = 1e-12;
constexpr double kEigTol = 1e-12;

bool is_symmetric(const Eigen::MatrixXd& m, double tol) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void check_covariance(const Eigen::MatrixXd& cov, const std::string& path) {
  if (cov.rows() != cov.cols()) throw SpecError(path + " not square");
  if (!cov.allFinite()) throw SpecError(path + " has non-finite entries");
  if (!is_symmetric(cov, kSymTol)) throw SpecError(path + " not symmetric");
  if (min_eigenvalue(cov) <= kEigTol) throw SpecError(path + " not positive definite");
}

// log N(x; mean, cov) and the solved residual cov^{-1}(x - mean).
std::pair<double, Eigen::VectorXd> gaussian_log_density(const GaussianComponent& c,
                                                        const Eigen::VectorXd& x) {
  const Eigen::LLT<Eigen::MatrixXd> llt(c.cov);
  if (llt.info() != Eigen::Success)
    throw NumericalError("gaussian component covariance not positive definite");
  const Eigen::VectorXd diff = x - c.mean;
  const Eigen::VectorXd solved = llt.solve(diff);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double d = double(x.size());
  const double log_density =
      -0.5 * diff.dot(solved) - 0.5 * log_det - 0.5 * d * std::log(2.0 * M_PI);
  return {log_density, solved};
}

}  // namespace

Eigen::VectorXd DistributionSpec::moment_mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim());
  for (const auto& c : components) m += c.weight * c.mean;
  return m;
}

Eigen::MatrixXd DistributionSpec::moment_cov() const {
  const Eigen::VectorXd m = moment_mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim(), dim());
  for (const auto& c : components)
    cov += c.weight * (c.cov + (c.mean - m) * (c.mean - m).transpose());
  return cov;
}

DistributionSpec DistributionSpec::gaussian(Eigen::VectorXd mean, Eigen::MatrixXd cov) {
  DistributionSpec dist;
  dist.kind = DistKind::Gaussian;
  dist.components.push_back({1.0, std::move(mean), std::move(cov)});
  return dist;
}

DistributionSpec DistributionSpec::mixture(std::vector<GaussianComponent> components) {
  DistributionSpec dist;
  dist.kind = DistKind::GaussianMixture;
  dist.components = std::move(components);
  return dist;
}

void validate_dist(const DistributionSpec& dist, const std::string& path) {
  if (dist.components.empty()) throw SpecError(path + " has no components");
  if (dist.kind == DistKind::Gaussian && dist.components.size() != 1)
    throw SpecError(path + ": gaussian kind must have exactly one component");
  const int d = dist.dim();
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < dist.components.size(); ++i) {
    const auto& c = dist.components[i];
    const std::string cpath = dist.kind == DistKind::Gaussian
                                  ? path
                                  : path + ".component[" + std::to_string(i) + "]";
    if (c.mean.size() != d) throw SpecError(cpath + ".mean dimension mismatch");
    if (!c.mean.allFinite()) throw SpecError(cpath + ".mean has non-finite entries");
    check_covariance(c.cov, cpath + ".cov");
    if (c.cov.rows() != d) throw SpecError(cpath + ".cov dimension mismatch");
    if (c.weight < 0.0) throw SpecError(cpath + ".weight negative");
    weight_sum += c.weight;
  }
  if (std::abs(weight_sum - 1.0) > 1e-12)
    throw SpecError(path + ".weights do not sum to 1");
}

void ProblemSpec::drift_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  switch (drift) {
    case DriftKind::Zero:
      out.setZero(x.size());
      return;
    case DriftKind::Linear:
      out.noalias() = drift_matrix * x;
      return;
    case DriftKind::Langevin: {
      // b(q, v) = (v, 0)
      const Eigen::Index half = x.size() / 2;
      out.resize(x.size());
      out.head(half) = x.tail(half);
      out.tail(half).setZero();
      return;
    }
  }
}

ProblemSpec validate_spec(ProblemSpec spec) {
  if (spec.d_x < 1) throw SpecError("d_x must be >= 1");
  if (spec.d_u < 1) throw SpecError("d_u must be >= 1");
  if (!(spec.horizon > 0.0)) throw SpecError("T must be > 0");

  if (spec.sigma.rows() != spec.d_x || spec.sigma.cols() != spec.d_x)
    throw SpecError("sigma dimension mismatch (expected d_x x d_x)");
  if (!is_symmetric(spec.sigma, kSymTol)) throw SpecError("sigma not symmetric");
  if (min_eigenvalue(spec.sigma) < -kEigTol)
    throw SpecError("sigma not positive semi-definite");

  if (spec.r.rows() != spec.d_u || spec.r.cols() != spec.d_u)
    throw SpecError("r dimension mismatch (expected d_u x d_u)");
  if (!is_symmetric(spec.r, kSymTol)) throw SpecError("r not symmetric");
  if (min_eigenvalue(spec.r) <= kEigTol) throw SpecError("r not positive definite");

  if (spec.g.size() == 0 && spec.d_u == spec.d_x)
    spec.g = Eigen::MatrixXd::Identity(spec.d_x, spec.d_u);
  if (spec.g.rows() != spec.d_x || spec.g.cols() != spec.d_u)
    throw SpecError("g dimension mismatch (expected d_x x d_u)");
  if (!spec.g.allFinite()) throw SpecError("g has non-finite entries");

  if (spec.drift == DriftKind::Linear) {
    if (spec.drift_matrix.rows() != spec.d_x || spec.drift_matrix.cols() != spec.d_x)
      throw SpecError("drift.a dimension mismatch (expected d_x x d_x)");
    if (!spec.drift_matrix.allFinite()) throw SpecError("drift.a has non-finite entries");
  }

  if (spec.drift == DriftKind::Langevin) {
    if (spec.d_x % 2 != 0) throw SpecError("langevin requires even state dimension");
    const int half = spec.d_x / 2;
    if (spec.d_u != half) throw SpecError("langevin requires d_u = d_x / 2");
    // G = (0; I) and Sigma = blkdiag(0, sigma_tilde * I).
    if (spec.g.topRows(half).cwiseAbs().maxCoeff() > kSymTol ||
        (spec.g.bottomRows(half) - Eigen::MatrixXd::Identity(half, half))
                .cwiseAbs()
                .maxCoeff() > kSymTol)
      throw SpecError("langevin requires g = (0; I) block form");
    const double sigma_tilde = spec.sigma(half, half);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(spec.d_x, spec.d_x);
    expected.bottomRightCorner(half, half) =
        sigma_tilde * Eigen::MatrixXd::Identity(half, half);
    if ((spec.sigma - expected).cwiseAbs().maxCoeff() > kSymTol)
      throw SpecError("langevin requires sigma = blkdiag(0, sigma_tilde I) block form");
  }

  validate_dist(spec.pi0, "pi0");
  validate_dist(spec.piT, "piT");
  if (spec.pi0.dim() != spec.d_x) throw SpecError("pi0 dimension != d_x");
  if (spec.piT.dim() != spec.d_x) throw SpecError("piT dimension != d_x");
  return spec;
}

LogDensityScore dist_log_density_score(const DistributionSpec& dist, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw SpecError("dist_log_density_score: non-finite input point");
  if (x.size() != dist.dim())
    throw SpecError("dist_log_density_score: point dimension mismatch");

  // Responsibilities via log-sum-exp; score is the responsibility-weighted
  // combination of component scores -cov^{-1}(x - mean).
  const std::size_t m = dist.components.size();
  std::vector<double> log_terms(m);
  std::vector<Eigen::VectorXd> solved(m);
  double max_term = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    const auto& c = dist.components[i];
    auto [ld, sv] = gaussian_log_density(c, x);
    log_terms[i] = (c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity()) + ld;
    solved[i] = std::move(sv);
    max_term = std::max(max_term, log_terms[i]);
  }
  double sum = 0.0;
  for (double lt : log_terms) sum += std::exp(lt - max_term);
  const double log_density = max_term + std::log(sum);

  LogDensityScore out;
  out.log_density = log_density;
  out.score = Eigen::VectorXd::Zero(x.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double resp = std::exp(log_terms[i] - log_density);
    out.score -= resp * solved[i];
  }
  return out;
}

Eigen::MatrixXd sample_dist(const DistributionSpec& dist, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw SpecError("sample_dist: n must be >= 1");
  const int d = dist.dim();
  const rng::CounterRng gen(seed);

  // Cholesky factors per component, computed once.
  std::vector<Eigen::MatrixXd> chol(dist.components.size());
  for (std::size_t c = 0; c < dist.components.size(); ++c) {
    Eigen::LLT<Eigen::MatrixXd> llt(dist.components[c].cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("sample_dist: component covariance not positive definite");
    chol[c] = llt.matrixL();
  }

  Eigen::MatrixXd out(n, d);
  Eigen::VectorXd z(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    if (dist.components.size() > 1) {
      const double u = gen.uniform(rng::kStreamSampleComponent, std::uint64_t(i), 0);
      double acc = 0.0;
      for (std::size_t j = 0; j < dist.components.size(); ++j) {
        acc += dist.components[j].weight;
        if (u < acc || j + 1 == dist.components.size()) {
          c = j;
          break;
        }
      }
    }
    for (int j = 0; j < d; ++j)
      z[j] = gen.normal(rng::kStreamSampleNormal, std::uint64_t(i), std::uint32_t(j));
    out.row(i) = (dist.components[c].mean + chol[c] * z).transpose();
  }
  return out;
}

}  // namespace otbridge
