#include "otbridge/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "otbridge/rng.hpp"

namespace otbridge {

PotentialModel::PotentialModel(Eigen::VectorXd linear, Eigen::MatrixXd quadratic)
    : linear_(std::move(linear)), quad_(std::move(quadratic)) {
  if (quad_.rows() != linear_.size() || quad_.cols() != linear_.size())
    throw SpecError("PotentialModel: quadratic part dimension mismatch");
  quad_ = (0.5 * (quad_ + quad_.transpose())).eval();
}

PotentialModel PotentialModel::zero(int dim) {
  return PotentialModel(Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim));
}

void PotentialModel::append_rbf(RbfBlock block) {
  if (block.centers.cols() != dim()) throw SpecError("PotentialModel: rbf center dimension mismatch");
  if (block.centers.rows() != block.weights.size())
    throw SpecError("PotentialModel: rbf weight count mismatch");
  if (!(block.bandwidth > 0.0)) throw SpecError("PotentialModel: rbf bandwidth must be > 0");
  rbf_.push_back(std::move(block));
}

double PotentialModel::value(const Eigen::VectorXd& x) const {
  double v = constant_ + linear_.dot(x) + 0.5 * x.dot(quad_ * x);
  for (const auto& blk : rbf_) {
    const double inv_h2 = 1.0 / (blk.bandwidth * blk.bandwidth);
    for (Eigen::Index j = 0; j < blk.centers.rows(); ++j)
      v += blk.weights[j] *
           std::exp(-0.5 * inv_h2 * (x - blk.centers.row(j).transpose()).squaredNorm());
  }
  return v;
}

void PotentialModel::grad_into(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
  out = linear_;
  out.noalias() += quad_ * x;
  for (const auto& blk : rbf_) {
    const double inv_h2 = 1.0 / (blk.bandwidth * blk.bandwidth);
    for (Eigen::Index j = 0; j < blk.centers.rows(); ++j) {
      const Eigen::VectorXd diff = x - blk.centers.row(j).transpose();
      const double phi = std::exp(-0.5 * inv_h2 * diff.squaredNorm());
      out.noalias() += blk.weights[j] * phi * (-inv_h2) * diff;
    }
  }
}

void PotentialModel::hess_into(const Eigen::VectorXd& x, Eigen::MatrixXd& out) const {
  out = quad_;
  for (const auto& blk : rbf_) {
    const double inv_h2 = 1.0 / (blk.bandwidth * blk.bandwidth);
    for (Eigen::Index j = 0; j < blk.centers.rows(); ++j) {
      const Eigen::VectorXd diff = x - blk.centers.row(j).transpose();
      const double phi = std::exp(-0.5 * inv_h2 * diff.squaredNorm());
      out.noalias() += blk.weights[j] * phi *
                       (inv_h2 * inv_h2 * diff * diff.transpose() -
                        inv_h2 * Eigen::MatrixXd::Identity(dim(), dim()));
    }
  }
}

void PotentialModel::grad_sigma_trace_into(const Eigen::VectorXd& x,
                                           const Eigen::MatrixXd& sigma,
                                           Eigen::VectorXd& out) const {
  // Third derivative of the quadratic part vanishes; Gaussian bumps give
  // grad(S:D^2 phi) = phi [ -(d/h^2)(d.S d/h^4 - tr S/h^2) + 2 S d/h^4 ].
  out.setZero(dim());
  const double trace_sigma = sigma.trace();
  for (const auto& blk : rbf_) {
    const double inv_h2 = 1.0 / (blk.bandwidth * blk.bandwidth);
    for (Eigen::Index j = 0; j < blk.centers.rows(); ++j) {
      const Eigen::VectorXd diff = x - blk.centers.row(j).transpose();
      const double phi = std::exp(-0.5 * inv_h2 * diff.squaredNorm());
      const Eigen::VectorXd sdiff = sigma * diff;
      const double contraction = inv_h2 * inv_h2 * diff.dot(sdiff) - inv_h2 * trace_sigma;
      out.noalias() +=
          blk.weights[j] * phi *
          (-inv_h2 * contraction * diff + 2.0 * inv_h2 * inv_h2 * sdiff);
    }
  }
}

Eigen::VectorXd PotentialModel::grad(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out;
  grad_into(x, out);
  return out;
}

Eigen::MatrixXd PotentialModel::hess(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd out;
  hess_into(x, out);
  return out;
}

PotentialEval eval_potential(const PotentialModel& model, const Eigen::VectorXd& x,
                             const Eigen::MatrixXd& sigma) {
  PotentialEval e;
  e.value = model.value(x);
  model.grad_into(x, e.grad);
  model.hess_into(x, e.hess);
  model.grad_sigma_trace_into(x, sigma, e.grad_trace);
  return e;
}

namespace {

// Coefficient layout: [ linear (d) | upper-triangular quadratic incl. diagonal
// (d(d+1)/2) | rbf weights (m) ]. Off-diagonal quadratic entries appear once
// and drive both symmetric slots of Q.
struct BasisLayout {
  int d = 0;
  int n_rbf = 0;
  int quad_offset() const { return d; }
  int rbf_offset() const { return d + d * (d + 1) / 2; }
  int size() const { return rbf_offset() + n_rbf; }
  int quad_index(int u, int v) const {  // requires u <= v
    return quad_offset() + u * d - u * (u - 1) / 2 + (v - u);
  }
};

// Design rows for grad psi at x: one row per output dimension r, accumulated
// directly into the normal matrix. rbf_grads is m x d (gradients of each
// basis bump at x), empty when no rbf part.
void accumulate_point(const BasisLayout& lay, const Eigen::VectorXd& x,
                      const Eigen::VectorXd& target, const Eigen::MatrixXd& rbf_grads,
                      Eigen::MatrixXd& normal, Eigen::VectorXd& rhs,
                      Eigen::VectorXd& row) {
  for (int r = 0; r < lay.d; ++r) {
    row.setZero(lay.size());
    row[r] = 1.0;
    for (int v = 0; v < lay.d; ++v) {
      const int u = std::min(r, v);
      const int w = std::max(r, v);
      row[lay.quad_index(u, w)] += x[v];
    }
    for (int j = 0; j < lay.n_rbf; ++j) row[lay.rbf_offset() + j] = rbf_grads(j, r);
    normal.selfadjointView<Eigen::Lower>().rankUpdate(row, 1.0);
    rhs.noalias() += target[r] * row;
  }
}

std::vector<Eigen::Index> select_centers(Eigen::Index n, int m, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(n);
  std::iota(idx.begin(), idx.end(), Eigen::Index(0));
  const rng::CounterRng gen(seed);
  for (int j = 0; j < m; ++j) {
    const double u = gen.uniform(rng::kStreamCenterSelect, std::uint64_t(j), 0);
    const Eigen::Index k = j + Eigen::Index(u * double(n - j));
    std::swap(idx[j], idx[std::min(k, n - 1)]);
  }
  idx.resize(m);
  return idx;
}

double median_pairwise_distance(const Eigen::MatrixXd& centers) {
  std::vector<double> dist;
  dist.reserve(std::size_t(centers.rows()) * (centers.rows() - 1) / 2);
  for (Eigen::Index i = 0; i < centers.rows(); ++i)
    for (Eigen::Index j = i + 1; j < centers.rows(); ++j)
      dist.push_back((centers.row(i) - centers.row(j)).norm());
  if (dist.empty()) throw NumericalError("rbf bandwidth: need at least two centers");
  auto mid = dist.begin() + dist.size() / 2;
  std::nth_element(dist.begin(), mid, dist.end());
  if (!(*mid > 0.0)) throw NumericalError("rbf bandwidth: coincident centers");
  return *mid;
}

}  // namespace

PotentialModel fit_potential(const Eigen::MatrixXd& states, const Eigen::MatrixXd& costates,
                             const BasisConfig& basis) {
  const Eigen::Index n = states.rows();
  const int d = int(states.cols());
  if (costates.rows() != n || costates.cols() != d)
    throw SpecError("fit_potential: states/costates shape mismatch");
  if (n < d * (d + 3) / 2 + 1)
    throw SpecError("fit_potential: too few points for a quadratic basis");
  if (basis.ridge < 0.0) throw SpecError("fit_potential: ridge must be >= 0");

  BasisLayout lay;
  lay.d = d;

  Eigen::MatrixXd centers;
  double bandwidth = basis.bandwidth;
  if (basis.family == BasisFamily::QuadraticRbf) {
    if (basis.n_centers < 1 || basis.n_centers > n)
      throw SpecError("fit_potential: n_centers must be in [1, n]");
    const auto idx = select_centers(n, basis.n_centers, basis.center_seed);
    centers.resize(basis.n_centers, d);
    for (int j = 0; j < basis.n_centers; ++j) centers.row(j) = states.row(idx[j]);
    if (!(bandwidth > 0.0)) bandwidth = median_pairwise_distance(centers);
    lay.n_rbf = basis.n_centers;
  }

  const int p = lay.size();
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd row(p);
  Eigen::MatrixXd rbf_grads(lay.n_rbf, d);
  const double inv_h2 = lay.n_rbf > 0 ? 1.0 / (bandwidth * bandwidth) : 0.0;

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = states.row(i);
    for (int j = 0; j < lay.n_rbf; ++j) {
      const Eigen::VectorXd diff = x - centers.row(j).transpose();
      const double phi = std::exp(-0.5 * inv_h2 * diff.squaredNorm());
      rbf_grads.row(j) = (-inv_h2 * phi) * diff.transpose();
    }
    accumulate_point(lay, x, costates.row(i), rbf_grads, normal, rhs, row);
  }
  normal = normal.selfadjointView<Eigen::Lower>();
  normal /= double(n);
  rhs /= double(n);

  if (basis.ridge == 0.0) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal, Eigen::EigenvaluesOnly);
    const double max_eig = es.eigenvalues().maxCoeff();
    if (max_eig <= 0.0 || es.eigenvalues().minCoeff() <= 1e-12 * max_eig)
      throw NumericalError(
          "fit_potential: normal system rank-deficient; set basis ridge > 0");
  } else {
    normal.diagonal().array() += basis.ridge;
  }

  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("fit_potential: normal system factorization failed");
  const Eigen::VectorXd theta = ldlt.solve(rhs);

  Eigen::VectorXd linear = theta.head(d);
  Eigen::MatrixXd quad(d, d);
  for (int u = 0; u < d; ++u)
    for (int v = u; v < d; ++v) quad(u, v) = quad(v, u) = theta[lay.quad_index(u, v)];

  PotentialModel model(std::move(linear), std::move(quad));
  if (lay.n_rbf > 0) {
    PotentialModel::RbfBlock blk;
    blk.centers = std::move(centers);
    blk.weights = theta.tail(lay.n_rbf);
    blk.bandwidth = bandwidth;
    model.append_rbf(std::move(blk));
  }
  return model;
}

PotentialModel accumulate_terminal(const PotentialModel& acc, const DistributionSpec& piT,
                                   const ScoreField& terminal_score, double damping,
                                   const Eigen::MatrixXd& states_T, const BasisConfig& basis) {
  if (!(damping > 0.0) || damping > 1.0)
    throw SpecError("accumulate_terminal: damping must be in (0, 1]");
  const Eigen::Index n = states_T.rows();
  const int d = int(states_T.cols());
  Eigen::MatrixXd grad_gap(n, d);
  Eigen::VectorXd s(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = states_T.row(i);
    terminal_score.score_into(x, s);
    grad_gap.row(i) = (dist_log_density_score(piT, x).score - s).transpose();
  }
  const PotentialModel increment = fit_potential(states_T, grad_gap, basis);
  return add_scaled(acc, increment, damping);
}

PotentialModel add_scaled(PotentialModel acc, const PotentialModel& delta, double scale) {
  if (acc.dim() != delta.dim()) throw SpecError("add_scaled: dimension mismatch");
  PotentialModel out(acc.linear() + scale * delta.linear(),
                     acc.quadratic() + scale * delta.quadratic());
  for (const auto& blk : acc.rbf_blocks()) out.append_rbf(blk);
  for (const auto& blk : delta.rbf_blocks()) {
    PotentialModel::RbfBlock scaled = blk;
    scaled.weights *= scale;
    out.append_rbf(std::move(scaled));
  }
  return out;
}

}  // namespace otbridge
