#include "otbridge/dynamics.hpp"

#include <cmath>
#include <string>

#include "otbridge/rng.hpp"

namespace otbridge {

namespace {

double sigma_colon(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& hess) {
  return (sigma.array() * hess.array()).sum();
}

// Symmetric PSD square root; eigenvalues within tolerance of zero are clamped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success)
    throw NumericalError("psd_sqrt: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-10) throw NumericalError("psd_sqrt: matrix has a negative eigenvalue");
    ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void check_finite(const Eigen::MatrixXd& states, double time, const char* who) {
  if (states.allFinite()) return;
  for (Eigen::Index i = 0; i < states.rows(); ++i)
    if (!states.row(i).allFinite())
      throw NumericalError(std::string(who) + ": non-finite state for particle " +
                           std::to_string(i) + " at t=" + std::to_string(time));
  throw NumericalError(std::string(who) + ": non-finite state");
}

// Shared scratch for the per-particle right-hand sides.
struct RhsWork {
  Eigen::VectorXd grad, u, beta, bdrift, gt, score_work;
  Eigen::MatrixXd hess;
};

// kx = b(x) + G u(x) + beta(x); kp = -grad(S:D^2 psi)(x) + D^2 psi(x) beta(x).
void meanfield_rhs(const Eigen::VectorXd& x, const PotentialModel& psi, const BetaField& beta,
                   const ProblemSpec& spec, const Eigen::MatrixXd& rgt, RhsWork& w,
                   Eigen::VectorXd& kx, Eigen::VectorXd& kp) {
  psi.grad_into(x, w.grad);
  w.u.noalias() = rgt * w.grad;
  beta.eval_into(x, w.beta, w.score_work);
  spec.drift_into(x, w.bdrift);
  kx = w.bdrift;
  kx.noalias() += spec.g * w.u;
  kx += w.beta;
  psi.hess_into(x, w.hess);
  psi.grad_sigma_trace_into(x, spec.sigma, w.gt);
  kp = -w.gt;
  kp.noalias() += w.hess * w.beta;
}

}  // namespace

FieldStack FieldStack::zero(int slices, int dim, GaugeMode gauge) {
  FieldStack stack;
  stack.gauge = gauge;
  stack.psi.assign(std::size_t(slices), PotentialModel::zero(dim));
  stack.score.assign(std::size_t(slices), ScoreField());
  return stack;
}

ControlField::ControlField(const PotentialModel& psi, const Eigen::MatrixXd& r,
                           const Eigen::MatrixXd& g)
    : psi_(&psi), rgt_(r * g.transpose()) {}

void ControlField::eval_into(const Eigen::VectorXd& x, Eigen::VectorXd& out,
                             Eigen::VectorXd& work) const {
  psi_->grad_into(x, work);
  out.noalias() = rgt_ * work;
}

Eigen::VectorXd ControlField::eval(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out, work;
  eval_into(x, out, work);
  return out;
}

ControlField control_field(const PotentialModel& psi, const Eigen::MatrixXd& r,
                           const Eigen::MatrixXd& g) {
  return ControlField(psi, r, g);
}

Ensemble step_meanfield(const Ensemble& ens, const PotentialModel& psi0, const BetaField& beta0,
                        const PotentialModel& psi_half, const BetaField& beta_half,
                        const PotentialModel& psi1, const BetaField& beta1, double dt,
                        const ProblemSpec& spec) {
  const Eigen::Index n = ens.size();
  const int d = ens.dim();
  const Eigen::MatrixXd rgt = spec.r * spec.g.transpose();

  Ensemble out = ens;
  out.time = ens.time + dt;

  RhsWork w;
  Eigen::VectorXd x(d), p(d), stage_x(d);
  Eigen::VectorXd kx1(d), kx2(d), kx3(d), kx4(d), kp1(d), kp2(d), kp3(d), kp4(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x = ens.states.row(i);
    p = ens.costates.row(i);
    meanfield_rhs(x, psi0, beta0, spec, rgt, w, kx1, kp1);
    stage_x = x + 0.5 * dt * kx1;
    meanfield_rhs(stage_x, psi_half, beta_half, spec, rgt, w, kx2, kp2);
    stage_x = x + 0.5 * dt * kx2;
    meanfield_rhs(stage_x, psi_half, beta_half, spec, rgt, w, kx3, kp3);
    stage_x = x + dt * kx3;
    meanfield_rhs(stage_x, psi1, beta1, spec, rgt, w, kx4, kp4);
    out.states.row(i) = x + (dt / 6.0) * (kx1 + 2.0 * (kx2 + kx3) + kx4);
    out.costates.row(i) = p + (dt / 6.0) * (kp1 + 2.0 * (kp2 + kp3) + kp4);
  }
  check_finite(out.states, out.time, "step_meanfield");
  check_finite(out.costates, out.time, "step_meanfield");
  return out;
}

Ensemble step_meanfield(const Ensemble& ens, const PotentialModel& psi, const BetaField& beta,
                        double dt, const ProblemSpec& spec) {
  return step_meanfield(ens, psi, beta, psi, beta, psi, beta, dt, spec);
}

Eigen::MatrixXd backward_step_costate(const Eigen::MatrixXd& states_k,
                                      const Eigen::MatrixXd& states_k1,
                                      const Eigen::MatrixXd& costates_k1,
                                      const PotentialModel& psi_next, const BetaField& beta,
                                      double dt, const ProblemSpec& spec) {
  const Eigen::Index n = states_k.rows();
  const int d = int(states_k.cols());
  Eigen::MatrixXd out(n, d);
  RhsWork w;
  Eigen::VectorXd x(d), pdot0(d), pdot1(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    // dP/dt = -grad(S:D^2 psi) + D^2 psi beta, averaged over both endpoint
    // states of the stored path.
    x = states_k1.row(i);
    psi_next.hess_into(x, w.hess);
    psi_next.grad_sigma_trace_into(x, spec.sigma, w.gt);
    beta.eval_into(x, w.beta, w.score_work);
    pdot1 = -w.gt;
    pdot1.noalias() += w.hess * w.beta;

    x = states_k.row(i);
    psi_next.hess_into(x, w.hess);
    psi_next.grad_sigma_trace_into(x, spec.sigma, w.gt);
    beta.eval_into(x, w.beta, w.score_work);
    pdot0 = -w.gt;
    pdot0.noalias() += w.hess * w.beta;

    out.row(i) = costates_k1.row(i) - (0.5 * dt) * (pdot0 + pdot1).transpose();
  }
  if (!out.allFinite()) throw NumericalError("backward_step_costate: non-finite costate");
  return out;
}

Ensemble step_fbsde(const Ensemble& ens, const PotentialModel& psi, double dt,
                    std::uint64_t seed, int step_index, FbsdeScheme scheme,
                    const ProblemSpec& spec) {
  const Eigen::Index n = ens.size();
  const int d = ens.dim();
  const Eigen::MatrixXd rgt = spec.r * spec.g.transpose();
  const Eigen::MatrixXd sqrt_sigma = psd_sqrt(spec.sigma);
  const double noise_scale = std::sqrt(2.0 * dt);
  const rng::CounterRng gen(seed);

  Ensemble out = ens;
  out.time = ens.time + dt;

  RhsWork w;
  Eigen::VectorXd x(d), xi(d), dbeta(d), drift(d), x_new(d), x_mid(d), pdelta(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    x = ens.states.row(i);
    for (int j = 0; j < d; ++j)
      xi[j] = gen.normal(rng::kStreamFbsde + std::uint32_t(step_index), std::uint64_t(i),
                         std::uint32_t(j));
    dbeta.noalias() = noise_scale * (sqrt_sigma * xi);

    psi.grad_into(x, w.grad);
    w.u.noalias() = rgt * w.grad;
    spec.drift_into(x, w.bdrift);
    drift = w.bdrift;
    drift.noalias() += spec.g * w.u;
    x_new = x + dt * drift + dbeta;
    out.states.row(i) = x_new;

    switch (scheme) {
      case FbsdeScheme::Ito:
        psi.hess_into(x, w.hess);
        pdelta.noalias() = w.hess * dbeta;
        break;
      case FbsdeScheme::Stratonovich:
        psi.grad_sigma_trace_into(x, spec.sigma, w.gt);
        x_mid = 0.5 * (x + x_new);
        psi.hess_into(x_mid, w.hess);
        pdelta = -dt * w.gt;
        pdelta.noalias() += w.hess * dbeta;
        break;
    }
    out.costates.row(i) = ens.costates.row(i) + pdelta.transpose();
  }
  check_finite(out.states, out.time, "step_fbsde");
  check_finite(out.costates, out.time, "step_fbsde");
  return out;
}

Eigen::MatrixXd backward_step_costate_fbsde(const Eigen::MatrixXd& states_k,
                                            const Eigen::MatrixXd& states_k1,
                                            const Eigen::MatrixXd& costates_k1,
                                            const PotentialModel& psi_next, double dt,
                                            std::uint64_t seed, int step_index,
                                            FbsdeScheme scheme, const ProblemSpec& spec) {
  const Eigen::Index n = states_k.rows();
  const int d = int(states_k.cols());
  const Eigen::MatrixXd sqrt_sigma = psd_sqrt(spec.sigma);
  const double noise_scale = std::sqrt(2.0 * dt);
  const rng::CounterRng gen(seed);

  Eigen::MatrixXd out(n, d);
  RhsWork w;
  Eigen::VectorXd x(d), xi(d), dbeta(d), x_mid(d), pdelta(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j)
      xi[j] = gen.normal(rng::kStreamFbsde + std::uint32_t(step_index), std::uint64_t(i),
                         std::uint32_t(j));
    dbeta.noalias() = noise_scale * (sqrt_sigma * xi);
    x = states_k.row(i);
    switch (scheme) {
      case FbsdeScheme::Ito:
        psi_next.hess_into(x, w.hess);
        pdelta.noalias() = w.hess * dbeta;
        break;
      case FbsdeScheme::Stratonovich:
        psi_next.grad_sigma_trace_into(x, spec.sigma, w.gt);
        x_mid = 0.5 * (x + states_k1.row(i).transpose());
        psi_next.hess_into(x_mid, w.hess);
        pdelta = -dt * w.gt;
        pdelta.noalias() += w.hess * dbeta;
        break;
    }
    out.row(i) = costates_k1.row(i) - pdelta.transpose();
  }
  if (!out.allFinite()) throw NumericalError("backward_step_costate_fbsde: non-finite costate");
  return out;
}

LagrangianState step_lagrangian_value(const Eigen::MatrixXd& states,
                                      const Eigen::VectorXd& values,
                                      const PotentialModel& psi, const ScoreField& score,
                                      double dt, const ProblemSpec& spec) {
  const Eigen::Index n = states.rows();
  const int d = int(states.cols());
  const Eigen::MatrixXd rgt = spec.r * spec.g.transpose();
  const Eigen::LLT<Eigen::MatrixXd> r_llt(spec.r);

  LagrangianState out;
  out.states.resize(n, d);
  out.values.resize(n);

  RhsWork w;
  Eigen::VectorXd x(d), s(d), sig_s(d), kx1(d), kx2(d), x_tilde(d);
  auto rhs = [&](const Eigen::VectorXd& pt, Eigen::VectorXd& kx, double& ky) {
    psi.grad_into(pt, w.grad);
    w.u.noalias() = rgt * w.grad;
    score.score_into(pt, s);
    sig_s.noalias() = spec.sigma * s;
    spec.drift_into(pt, w.bdrift);
    kx = w.bdrift;
    kx.noalias() += spec.g * w.u;
    kx -= sig_s;
    psi.hess_into(pt, w.hess);
    const double u_norm2 = w.u.dot(r_llt.solve(w.u));
    ky = 0.5 * u_norm2 - sigma_colon(spec.sigma, w.hess) - w.grad.dot(sig_s);
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    x = states.row(i);
    double ky1 = 0.0, ky2 = 0.0;
    rhs(x, kx1, ky1);
    x_tilde = x + dt * kx1;
    rhs(x_tilde, kx2, ky2);
    out.states.row(i) = x + (0.5 * dt) * (kx1 + kx2);
    out.values[i] = values[i] + (0.5 * dt) * (ky1 + ky2);
  }
  if (!out.states.allFinite() || !out.values.allFinite())
    throw NumericalError("step_lagrangian_value: non-finite result");
  return out;
}

double hamiltonian_energy(const Eigen::MatrixXd& states, const PotentialModel& psi,
                          const ProblemSpec& spec) {
  // |u|^2_R with u = R G^T grad psi collapses to grad psi . (G R G^T) grad psi.
  const Eigen::MatrixXd grg = spec.g * spec.r * spec.g.transpose();
  const Eigen::Index n = states.rows();
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd x = states.row(i);
    psi.grad_into(x, grad);
    psi.hess_into(x, hess);
    total += 0.5 * grad.dot(grg * grad) + sigma_colon(spec.sigma, hess);
  }
  return total / double(n);
}

double hamiltonian_energy(const Ensemble& ens, const PotentialModel& psi,
                          const ProblemSpec& spec) {
  return hamiltonian_energy(ens.states, psi, spec);
}

double control_cost(const TrajectoryRecord& record, const ProblemSpec& spec) {
  const int slices = int(record.states.size());
  if (slices < 2 || record.fields.slices() != slices)
    throw SpecError("control_cost: incomplete trajectory record");
  const Eigen::MatrixXd grg = spec.g * spec.r * spec.g.transpose();
  const double dt = record.grid.dt();
  Eigen::VectorXd grad;
  double cost = 0.0;
  for (int k = 0; k < slices; ++k) {
    const Eigen::MatrixXd& x = record.states[std::size_t(k)];
    const PotentialModel& psi = record.fields.psi[std::size_t(k)];
    double slice = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      psi.grad_into(x.row(i), grad);
      slice += 0.5 * grad.dot(grg * grad);
    }
    slice /= double(x.rows());
    cost += dt * ((k == 0 || k == slices - 1) ? 0.5 : 1.0) * slice;
  }
  return cost;
}

double action_value(const TrajectoryRecord& record, const ProblemSpec& spec) {
  const int slices = int(record.states.size());
  if (slices < 2 || record.fields.slices() != slices ||
      int(record.costates.size()) != slices)
    throw SpecError("action_value: incomplete trajectory record");
  const Eigen::Index n = record.particles();
  const int d = int(record.states.front().cols());
  const double dt = record.grid.dt();
  const Eigen::MatrixXd rgt = spec.r * spec.g.transpose();
  const Eigen::LLT<Eigen::MatrixXd> r_llt(spec.r);

  RhsWork w;
  Eigen::VectorXd x(d), p(d), xdot(d), u(d), beta_val(d);
  double action = 0.0;
  for (int k = 0; k < slices; ++k) {
    const PotentialModel& psi = record.fields.psi[std::size_t(k)];
    const BetaField beta = record.fields.gauge == GaugeMode::Natural
                               ? beta_field(record.fields.score[std::size_t(k)], spec.sigma,
                                            GaugeMode::Natural)
                               : BetaField::zero(d);
    double slice = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      x = record.states[std::size_t(k)].row(i);
      p = record.costates[std::size_t(k)].row(i);
      if (k == 0)
        xdot = (record.states[1].row(i) - record.states[0].row(i)) / dt;
      else if (k == slices - 1)
        xdot = (record.states[std::size_t(k)].row(i) -
                record.states[std::size_t(k - 1)].row(i)) /
               dt;
      else
        xdot = (record.states[std::size_t(k + 1)].row(i) -
                record.states[std::size_t(k - 1)].row(i)) /
               (2.0 * dt);
      psi.grad_into(x, w.grad);
      u.noalias() = rgt * w.grad;
      psi.hess_into(x, w.hess);
      beta.eval_into(x, beta_val, w.score_work);
      spec.drift_into(x, w.bdrift);
      const double u_norm2 = u.dot(r_llt.solve(u));
      slice += p.dot(xdot - w.bdrift - spec.g * u) - sigma_colon(spec.sigma, w.hess) +
               0.5 * u_norm2 - (p - w.grad).dot(beta_val);
    }
    slice /= double(n);
    action += dt * ((k == 0 || k == slices - 1) ? 0.5 : 1.0) * slice;
  }

  // Boundary terms; pi[psi] by Monte Carlo over fresh target samples.
  const PotentialModel& psi_T = record.terminal_potential;
  const PotentialModel& psi_0 = record.fields.psi.front();
  const Eigen::MatrixXd piT_samples = sample_dist(spec.piT, n, kActionBoundarySeed);
  const Eigen::MatrixXd pi0_samples = sample_dist(spec.pi0, n, kActionBoundarySeed + 1);
  double mean_psiT_states = 0.0, mean_psiT_target = 0.0;
  double mean_psi0_states = 0.0, mean_psi0_target = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    mean_psiT_states += psi_T.value(record.states.back().row(i));
    mean_psiT_target += psi_T.value(piT_samples.row(i));
    mean_psi0_states += psi_0.value(record.states.front().row(i));
    mean_psi0_target += psi_0.value(pi0_samples.row(i));
  }
  action += (-mean_psiT_states + mean_psiT_target + mean_psi0_states - mean_psi0_target) /
            double(n);
  return action;
}

double hjb_gradient_residual(const FieldStack& fields, const TimeGrid& grid,
                             const Eigen::MatrixXd& probes, const ProblemSpec& spec) {
  if (fields.slices() != grid.steps + 1)
    throw SpecError("hjb_gradient_residual: stack/grid length mismatch");
  const Eigen::MatrixXd rgt = spec.r * spec.g.transpose();
  const double dt = grid.dt();
  const int d = int(probes.cols());
  Eigen::VectorXd grad0(d), grad1(d), u(d), gt(d), rhs0(d), rhs1(d), res(d);
  Eigen::MatrixXd hess(d, d);
  double worst = 0.0;
  for (int k = 0; k < grid.steps; ++k) {
    const PotentialModel& psi0 = fields.psi[std::size_t(k)];
    const PotentialModel& psi1 = fields.psi[std::size_t(k + 1)];
    for (Eigen::Index row = 0; row < probes.rows(); ++row) {
      const Eigen::VectorXd x = probes.row(row);
      psi0.grad_into(x, grad0);
      psi0.hess_into(x, hess);
      psi0.grad_sigma_trace_into(x, spec.sigma, gt);
      u.noalias() = rgt * grad0;
      rhs0 = gt;
      rhs0.noalias() += hess * (spec.g * u);
      psi1.grad_into(x, grad1);
      psi1.hess_into(x, hess);
      psi1.grad_sigma_trace_into(x, spec.sigma, gt);
      u.noalias() = rgt * grad1;
      rhs1 = gt;
      rhs1.noalias() += hess * (spec.g * u);
      res = (grad1 - grad0) / dt + 0.5 * (rhs0 + rhs1);
      worst = std::max(worst, res.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

}  // namespace otbridge
