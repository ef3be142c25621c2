#include <doctest.h>

#include <cmath>

#include "otbridge/problem.hpp"
#include "otbridge/rng.hpp"

using namespace otbridge;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v << x;
  return v;
}

Eigen::MatrixXd mat1(double x) {
  Eigen::MatrixXd m(1, 1);
  m << x;
  return m;
}

ProblemSpec basic_1d_spec() {
  ProblemSpec spec;
  spec.d_x = 1;
  spec.d_u = 1;
  spec.horizon = 1.0;
  spec.sigma = mat1(0.5);
  spec.r = mat1(1.0);
  spec.pi0 = DistributionSpec::gaussian(vec1(0.0), mat1(1.0));
  spec.piT = DistributionSpec::gaussian(vec1(2.0), mat1(1.0));
  return spec;
}

}  // namespace

TEST_CASE("validate_spec accepts a well-formed 1-D bridge") {
  const ProblemSpec spec = validate_spec(basic_1d_spec());
  CHECK(spec.d_x == 1);
  CHECK(spec.g(0, 0) == 1.0);  // default identity filled in
}

TEST_CASE("validate_spec is idempotent") {
  const ProblemSpec once = validate_spec(basic_1d_spec());
  const ProblemSpec twice = validate_spec(once);
  CHECK(once.sigma == twice.sigma);
  CHECK(once.g == twice.g);
  CHECK(once.pi0.components[0].mean == twice.pi0.components[0].mean);
}

TEST_CASE("negative covariance is rejected with the field path") {
  ProblemSpec spec = basic_1d_spec();
  spec.pi0 = DistributionSpec::gaussian(vec1(0.0), mat1(-1.0));
  CHECK_THROWS_WITH_AS(validate_spec(spec), doctest::Contains("pi0.cov not positive definite"),
                       SpecError);
}

TEST_CASE("langevin structural rules") {
  ProblemSpec spec;
  spec.d_x = 3;
  spec.d_u = 1;
  spec.horizon = 1.0;
  spec.sigma = Eigen::MatrixXd::Zero(3, 3);
  spec.r = mat1(1.0);
  spec.g = Eigen::MatrixXd::Zero(3, 1);
  spec.drift = DriftKind::Langevin;
  spec.pi0 = DistributionSpec::gaussian(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  spec.piT = spec.pi0;
  CHECK_THROWS_WITH_AS(validate_spec(spec),
                       doctest::Contains("langevin requires even state dimension"), SpecError);

  // Valid 2-D (q, v) system with sigma = blkdiag(0, 0.3) and g = (0; 1).
  ProblemSpec ok;
  ok.d_x = 2;
  ok.d_u = 1;
  ok.horizon = 1.0;
  ok.sigma = Eigen::MatrixXd::Zero(2, 2);
  ok.sigma(1, 1) = 0.3;
  ok.r = mat1(1.0);
  ok.g = Eigen::MatrixXd::Zero(2, 1);
  ok.g(1, 0) = 1.0;
  ok.drift = DriftKind::Langevin;
  ok.pi0 = DistributionSpec::gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  ok.piT = ok.pi0;
  CHECK_NOTHROW(validate_spec(ok));

  Eigen::VectorXd x(2), b(2);
  x << 1.5, -0.25;
  validate_spec(ok).drift_into(x, b);
  CHECK(b[0] == -0.25);  // b(q, v) = (v, 0)
  CHECK(b[1] == 0.0);

  ProblemSpec bad_sigma = ok;
  bad_sigma.sigma(0, 0) = 0.1;
  CHECK_THROWS_AS(validate_spec(bad_sigma), SpecError);
}

TEST_CASE("mixture weights must sum to one") {
  ProblemSpec spec = basic_1d_spec();
  spec.pi0 = DistributionSpec::mixture(
      {{0.5, vec1(-1.0), mat1(1.0)}, {0.6, vec1(1.0), mat1(1.0)}});
  CHECK_THROWS_WITH_AS(validate_spec(spec), doctest::Contains("weights do not sum to 1"),
                       SpecError);
}

TEST_CASE("log density and score of a standard normal") {
  const DistributionSpec dist = DistributionSpec::gaussian(vec1(0.0), mat1(1.0));
  const auto [ld, score] = dist_log_density_score(dist, vec1(1.0));
  CHECK(ld == doctest::Approx(-0.5 - 0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));
  CHECK(score[0] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("score vanishes at the mode") {
  const DistributionSpec dist = DistributionSpec::gaussian(vec1(3.5), mat1(2.0));
  CHECK(dist_log_density_score(dist, vec1(3.5)).score[0] == doctest::Approx(0.0));
}

TEST_CASE("symmetric mixture score vanishes at the symmetry point") {
  const DistributionSpec dist = DistributionSpec::mixture(
      {{0.5, vec1(-1.0), mat1(1.0)}, {0.5, vec1(1.0), mat1(1.0)}});
  CHECK(dist_log_density_score(dist, vec1(0.0)).score[0] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("non-finite evaluation points are rejected") {
  const DistributionSpec dist = DistributionSpec::gaussian(vec1(0.0), mat1(1.0));
  CHECK_THROWS_AS(dist_log_density_score(dist, vec1(std::nan(""))), SpecError);
}

TEST_CASE("score matches central differences of the log density") {
  // 2-D mixture probed at counter-generated points.
  const Eigen::VectorXd m1 = (Eigen::VectorXd(2) << -1.0, 0.5).finished();
  const Eigen::VectorXd m2 = (Eigen::VectorXd(2) << 1.5, -0.3).finished();
  Eigen::MatrixXd c1(2, 2), c2(2, 2);
  c1 << 1.0, 0.3, 0.3, 0.8;
  c2 << 0.6, -0.2, -0.2, 1.4;
  const DistributionSpec dist = DistributionSpec::mixture({{0.3, m1, c1}, {0.7, m2, c2}});

  const rng::CounterRng gen(2024);
  const double eps = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x(2);
    x << 3.0 * gen.normal(0, trial, 0), 3.0 * gen.normal(0, trial, 1);
    const Eigen::VectorXd score = dist_log_density_score(dist, x).score;
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += eps;
      xm[j] -= eps;
      const double fd = (dist_log_density_score(dist, xp).log_density -
                         dist_log_density_score(dist, xm).log_density) /
                        (2.0 * eps);
      CHECK(std::abs(score[j] - fd) < 1e-6);
    }
  }
}

TEST_CASE("sampling is reproducible and matches the law") {
  const DistributionSpec dist = DistributionSpec::gaussian(vec1(0.0), mat1(1.0));
  const Eigen::Index n = 100000;
  const Eigen::MatrixXd a = sample_dist(dist, n, 7);
  const Eigen::MatrixXd b = sample_dist(dist, n, 7);
  CHECK(a == b);  // identical bytes for identical seed

  const double mean = a.col(0).mean();
  const double var = (a.col(0).array() - mean).square().sum() / double(n - 1);
  CHECK(std::abs(mean) < 3.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("sampling moments match within four standard errors") {
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.5, 0.5, 1.0;
  const Eigen::VectorXd mean = (Eigen::VectorXd(2) << 1.0, -2.0).finished();
  const DistributionSpec dist = DistributionSpec::gaussian(mean, cov);
  const Eigen::Index n = 100000;
  const Eigen::MatrixXd x = sample_dist(dist, n, 11);
  for (int j = 0; j < 2; ++j) {
    const double se = std::sqrt(cov(j, j) / double(n));
    CHECK(std::abs(x.col(j).mean() - mean[j]) < 4.0 * se);
    const double var = (x.col(j).array() - x.col(j).mean()).square().sum() / double(n - 1);
    // Var of the sample variance of a Gaussian is 2 sigma^4 / (n - 1).
    const double se_var = std::sqrt(2.0 * cov(j, j) * cov(j, j) / double(n - 1));
    CHECK(std::abs(var - cov(j, j)) < 4.0 * se_var);
  }
}

TEST_CASE("balanced mixture splits its mass evenly") {
  const DistributionSpec dist = DistributionSpec::mixture(
      {{0.5, vec1(-3.0), mat1(1.0)}, {0.5, vec1(3.0), mat1(1.0)}});
  const Eigen::Index n = 100000;
  const Eigen::MatrixXd x = sample_dist(dist, n, 5);
  const double frac_negative = double((x.col(0).array() < 0.0).count()) / double(n);
  CHECK(std::abs(frac_negative - 0.5) < 0.01);
}
