#include <doctest.h>

#include <cmath>
#include <vector>

#include "otbridge/potential.hpp"
#include "otbridge/rng.hpp"

using namespace otbridge;

namespace {

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }
Eigen::MatrixXd mat1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

// Penalized objective in the fitter's own parametrization: linear entries,
// upper-triangular quadratic entries (off-diagonals once), rbf weights.
double fit_objective(const PotentialModel& model, const Eigen::MatrixXd& states,
                     const Eigen::MatrixXd& costates, double ridge) {
  double data = 0.0;
  Eigen::VectorXd grad;
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    model.grad_into(states.row(i), grad);
    data += (costates.row(i).transpose() - grad).squaredNorm();
  }
  data /= double(states.rows());
  double penalty = model.linear().squaredNorm();
  for (int u = 0; u < model.dim(); ++u)
    for (int v = u; v < model.dim(); ++v)
      penalty += model.quadratic()(u, v) * model.quadratic()(u, v);
  for (const auto& blk : model.rbf_blocks()) penalty += blk.weights.squaredNorm();
  return data + ridge * penalty;
}

PotentialModel perturbed(const PotentialModel& model, int which, double delta) {
  Eigen::VectorXd linear = model.linear();
  Eigen::MatrixXd quad = model.quadratic();
  const int d = model.dim();
  int idx = 0;
  for (int j = 0; j < d; ++j, ++idx)
    if (idx == which) linear[j] += delta;
  for (int u = 0; u < d; ++u)
    for (int v = u; v < d; ++v, ++idx)
      if (idx == which) {
        quad(u, v) += delta;
        if (u != v) quad(v, u) += delta;
      }
  PotentialModel out(linear, quad);
  for (auto blk : model.rbf_blocks()) {
    for (Eigen::Index j = 0; j < blk.weights.size(); ++j, ++idx)
      if (idx == which) blk.weights[j] += delta;
    out.append_rbf(blk);
  }
  return out;
}

int coefficient_count(const PotentialModel& model) {
  int count = model.dim() + model.dim() * (model.dim() + 1) / 2;
  for (const auto& blk : model.rbf_blocks()) count += int(blk.weights.size());
  return count;
}

}  // namespace

TEST_CASE("linear costates recover the exact quadratic part") {
  Eigen::MatrixXd a(2, 2);
  a << 1.2, -0.4, -0.4, 0.7;
  const Eigen::MatrixXd states = sample_dist(
      DistributionSpec::gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)),
      512, 3);
  const Eigen::MatrixXd costates = states * a.transpose();
  const PotentialModel model = fit_potential(states, costates, BasisConfig{});
  CHECK((model.quadratic() - a).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(model.linear().cwiseAbs().maxCoeff() < 1e-10);

  // Control law R grad psi reproduces R A x at probe points.
  const Eigen::MatrixXd r = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  for (int trial = 0; trial < 8; ++trial) {
    const Eigen::VectorXd x = states.row(trial);
    CHECK((r * model.grad(x) - r * (a * x)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("zero costates give the zero model") {
  const Eigen::MatrixXd states = sample_dist(
      DistributionSpec::gaussian(vec1(0.0), mat1(1.0)), 64, 5);
  const PotentialModel model =
      fit_potential(states, Eigen::MatrixXd::Zero(64, 1), BasisConfig{});
  CHECK(model.linear().cwiseAbs().maxCoeff() == 0.0);
  CHECK(model.quadratic().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rbf basis fits a sine gradient field") {
  const Eigen::Index n = 10000;
  Eigen::MatrixXd states(n, 1), costates(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    states(i, 0) = -2.0 + 4.0 * double(i) / double(n - 1);
    costates(i, 0) = std::sin(states(i, 0));
  }
  BasisConfig basis;
  basis.family = BasisFamily::QuadraticRbf;
  basis.n_centers = 64;
  basis.ridge = 1e-8;
  basis.center_seed = 2;
  const PotentialModel model = fit_potential(states, costates, basis);

  double rms = 0.0;
  Eigen::VectorXd grad;
  for (Eigen::Index i = 0; i < n; ++i) {
    model.grad_into(states.row(i), grad);
    rms += std::pow(grad[0] - costates(i, 0), 2);
  }
  rms = std::sqrt(rms / double(n));
  CHECK(rms <= 0.05);

  // Independent dense least-squares solve over the same basis functions.
  const auto& blk = model.rbf_blocks().at(0);
  const int p = 2 + int(blk.centers.rows());
  Eigen::MatrixXd design(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = states(i, 0);
    design(i, 0) = 1.0;  // d/dx of linear term
    design(i, 1) = x;    // d/dx of quadratic term
    for (Eigen::Index j = 0; j < blk.centers.rows(); ++j) {
      const double diff = x - blk.centers(j, 0);
      const double inv_h2 = 1.0 / (blk.bandwidth * blk.bandwidth);
      design(i, 2 + j) = -inv_h2 * diff * std::exp(-0.5 * inv_h2 * diff * diff);
    }
  }
  Eigen::MatrixXd normal = design.transpose() * design / double(n);
  normal.diagonal().array() += basis.ridge;
  const Eigen::VectorXd theta =
      normal.ldlt().solve(design.transpose() * costates.col(0) / double(n));
  const double dense_rms =
      std::sqrt((design * theta - costates.col(0)).squaredNorm() / double(n));
  CHECK(rms == doctest::Approx(dense_rms).epsilon(1e-6));
}

TEST_CASE("identifiability precondition and rank-deficiency error") {
  CHECK_THROWS_AS(fit_potential(Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2),
                                BasisConfig{}),
                  SpecError);

  // All points on the x-axis in 2-D: the quadratic normal system is singular.
  Eigen::MatrixXd states(32, 2);
  states.setZero();
  for (int i = 0; i < 32; ++i) states(i, 0) = double(i) / 31.0;
  const Eigen::MatrixXd costates = states;
  CHECK_THROWS_WITH_AS(fit_potential(states, costates, BasisConfig{}),
                       doctest::Contains("ridge"), NumericalError);
}

TEST_CASE("analytic derivatives of a pure quadratic") {
  Eigen::MatrixXd a(2, 2);
  a << 0.9, 0.2, 0.2, 1.5;
  const PotentialModel model(Eigen::VectorXd::Zero(2), a);
  const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.3, -1.2).finished();
  const Eigen::MatrixXd sigma = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  const PotentialEval e = eval_potential(model, x, sigma);
  CHECK((e.hess - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK(e.grad_trace.cwiseAbs().maxCoeff() == 0.0);
  CHECK(e.value == doctest::Approx(0.5 * x.dot(a * x)));
}

TEST_CASE("single gaussian bump curvature") {
  PotentialModel model = PotentialModel::zero(1);
  PotentialModel::RbfBlock blk;
  blk.centers = Eigen::MatrixXd::Zero(1, 1);
  blk.weights = vec1(1.0);
  blk.bandwidth = 1.0;
  model.append_rbf(blk);
  CHECK(model.grad(vec1(0.0))[0] == 0.0);
  CHECK(model.hess(vec1(0.0))(0, 0) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("derivatives agree with finite differences") {
  // Quadratic plus rbf model with counter-generated coefficients.
  const rng::CounterRng gen(31);
  Eigen::MatrixXd quad(2, 2);
  quad << 0.8, 0.1, 0.1, -0.3;
  PotentialModel model((Eigen::VectorXd(2) << 0.4, -0.2).finished(), quad);
  PotentialModel::RbfBlock blk;
  blk.centers.resize(3, 2);
  blk.weights.resize(3);
  for (int j = 0; j < 3; ++j) {
    blk.centers(j, 0) = gen.normal(0, j, 0);
    blk.centers(j, 1) = gen.normal(0, j, 1);
    blk.weights[j] = 0.5 * gen.normal(1, j, 0);
  }
  blk.bandwidth = 0.9;
  model.append_rbf(blk);

  Eigen::MatrixXd sigma(2, 2);
  sigma << 0.7, 0.2, 0.2, 0.4;

  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(2);
    x << 1.5 * gen.normal(2, trial, 0), 1.5 * gen.normal(2, trial, 1);
    const PotentialEval e = eval_potential(model, x, sigma);

    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      const double eps_grad = 1e-5;
      xp[j] += eps_grad;
      xm[j] -= eps_grad;
      const double fd_grad = (model.value(xp) - model.value(xm)) / (2.0 * eps_grad);
      CHECK(std::abs(e.grad[j] - fd_grad) < 1e-6);

      const double eps = 1e-4;
      xp = x;
      xm = x;
      xp[j] += eps;
      xm[j] -= eps;
      // Hessian column via gradient differences.
      const Eigen::VectorXd fd_hess = (model.grad(xp) - model.grad(xm)) / (2.0 * eps);
      CHECK((e.hess.col(j) - fd_hess).cwiseAbs().maxCoeff() < 1e-4);
      // grad(S : D^2 psi) via differences of the contracted hessian.
      const double fd_trace = ((sigma.array() * model.hess(xp).array()).sum() -
                               (sigma.array() * model.hess(xm).array()).sum()) /
                              (2.0 * eps);
      CHECK(std::abs(e.grad_trace[j] - fd_trace) < 1e-5);
    }
  }
}

TEST_CASE("fitted coefficients sit at a local minimum of the objective") {
  const Eigen::MatrixXd states = sample_dist(
      DistributionSpec::gaussian(vec1(0.0), mat1(1.0)), 2000, 11);
  Eigen::MatrixXd costates(2000, 1);
  for (Eigen::Index i = 0; i < 2000; ++i) costates(i, 0) = std::tanh(states(i, 0));

  BasisConfig basis;
  basis.family = BasisFamily::QuadraticRbf;
  basis.n_centers = 16;
  basis.ridge = 1e-6;
  basis.center_seed = 4;
  const PotentialModel model = fit_potential(states, costates, basis);
  const double base = fit_objective(model, states, costates, basis.ridge);
  for (int which = 0; which < coefficient_count(model); ++which)
    for (double delta : {-1e-3, 1e-3}) {
      const double moved =
          fit_objective(perturbed(model, which, delta), states, costates, basis.ridge);
      CHECK(moved >= base - 1e-12);
    }
}

TEST_CASE("terminal accumulation at the converged fixed point is a no-op") {
  const DistributionSpec target = DistributionSpec::gaussian(vec1(1.0), mat1(2.0));
  const Eigen::MatrixXd states = sample_dist(target, 4096, 3);
  // Score field with the target's exact moments: the gradient gap vanishes
  // identically, so the increment model is exactly zero.
  const ScoreField exact = ScoreField::gaussian_moments(vec1(1.0), mat1(2.0));
  PotentialModel acc(vec1(0.25), mat1(-0.5));
  const PotentialModel out = accumulate_terminal(acc, target, exact, 1.0, states, BasisConfig{});
  CHECK(std::abs(out.linear()[0] - 0.25) < 1e-12);
  CHECK(std::abs(out.quadratic()(0, 0) + 0.5) < 1e-12);
}

TEST_CASE("terminal accumulation learns the heat-flow correction") {
  // rho_T = N(0, 1 + 2 sigma^2 T) = N(0, 2) under pure diffusion; the target
  // is N(0,1), so the increment gradient is (1/2 - 1) x = -x/2.
  const Eigen::MatrixXd states_T =
      sample_dist(DistributionSpec::gaussian(vec1(0.0), mat1(2.0)), 10000, 12);
  const ScoreField terminal = estimate_score(states_T, ScoreMethod::Gaussian);
  const DistributionSpec piT = DistributionSpec::gaussian(vec1(0.0), mat1(1.0));
  const PotentialModel out = accumulate_terminal(PotentialModel::zero(1), piT, terminal, 1.0,
                                                 states_T, BasisConfig{});
  for (double x : {-2.0, -0.5, 0.5, 2.0})
    CHECK(std::abs(out.grad(vec1(x))[0] + 0.5 * x) < 1e-2);
}

TEST_CASE("damping scales the increment linearly") {
  const Eigen::MatrixXd states_T =
      sample_dist(DistributionSpec::gaussian(vec1(0.5), mat1(1.5)), 2048, 8);
  const ScoreField terminal = estimate_score(states_T, ScoreMethod::Gaussian);
  const DistributionSpec piT = DistributionSpec::gaussian(vec1(0.0), mat1(1.0));
  const PotentialModel zero = PotentialModel::zero(1);
  const PotentialModel full = accumulate_terminal(zero, piT, terminal, 1.0, states_T, BasisConfig{});
  const PotentialModel half = accumulate_terminal(zero, piT, terminal, 0.5, states_T, BasisConfig{});
  CHECK(half.quadratic()(0, 0) == 0.5 * full.quadratic()(0, 0));
  CHECK(half.linear()[0] == 0.5 * full.linear()[0]);
}

TEST_CASE("repeated terminal accumulation telescopes exactly") {
  const DistributionSpec piT = DistributionSpec::gaussian(vec1(0.0), mat1(1.0));
  PotentialModel acc = PotentialModel::zero(1);
  double sum_quad = 0.0, sum_lin = 0.0;
  for (int k = 0; k < 4; ++k) {
    const Eigen::MatrixXd states =
        sample_dist(DistributionSpec::gaussian(vec1(0.2 * k), mat1(1.0 + 0.1 * k)), 1024,
                    std::uint64_t(40 + k));
    const ScoreField s = estimate_score(states, ScoreMethod::Gaussian);
    const PotentialModel increment =
        accumulate_terminal(PotentialModel::zero(1), piT, s, 1.0, states, BasisConfig{});
    acc = accumulate_terminal(acc, piT, s, 1.0, states, BasisConfig{});
    sum_quad += increment.quadratic()(0, 0);
    sum_lin += increment.linear()[0];
  }
  CHECK(acc.quadratic()(0, 0) == sum_quad);
  CHECK(acc.linear()[0] == sum_lin);
}
