#include <benchmark/benchmark.h>

#include "otbridge/bridge.hpp"
#include "otbridge/dynamics.hpp"
#include "otbridge/oracle.hpp"

namespace {

using namespace otbridge;

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }
Eigen::MatrixXd mat1(double x) { return Eigen::MatrixXd::Constant(1, 1, x); }

ProblemSpec bridge_spec(double sigma2) {
  ProblemSpec spec;
  spec.d_x = 1;
  spec.d_u = 1;
  spec.horizon = 1.0;
  spec.sigma = mat1(sigma2);
  spec.r = mat1(1.0);
  spec.pi0 = DistributionSpec::gaussian(vec1(0.0), mat1(1.0));
  spec.piT = DistributionSpec::gaussian(vec1(2.0), mat1(1.0));
  return validate_spec(spec);
}

void BM_StepMeanfield(benchmark::State& state) {
  const ProblemSpec spec = bridge_spec(0.5);
  const Ensemble ens = init_ensemble(spec, state.range(0), 1);
  const PotentialModel psi(vec1(2.0), mat1(-0.4));
  const ScoreField score = estimate_score(ens.states, ScoreMethod::Gaussian);
  const BetaField beta = beta_field(score, spec.sigma, GaugeMode::Natural);
  for (auto _ : state) {
    Ensemble out = step_meanfield(ens, psi, beta, 1e-3, spec);
    benchmark::DoNotOptimize(out.states.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StepMeanfield)->Arg(1024)->Arg(4096)->Arg(16384);

void BM_FitPotentialQuadratic(benchmark::State& state) {
  const ProblemSpec spec = bridge_spec(0.5);
  const Ensemble ens = init_ensemble(spec, state.range(0), 1);
  const Eigen::MatrixXd costates = 0.7 * ens.states;
  for (auto _ : state) {
    PotentialModel m = fit_potential(ens.states, costates, BasisConfig{});
    benchmark::DoNotOptimize(m.quadratic().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitPotentialQuadratic)->Arg(4096)->Arg(16384);

void BM_FitPotentialRbf(benchmark::State& state) {
  const ProblemSpec spec = bridge_spec(0.5);
  const Ensemble ens = init_ensemble(spec, 4096, 1);
  Eigen::MatrixXd costates(4096, 1);
  for (Eigen::Index i = 0; i < 4096; ++i) costates(i, 0) = std::sin(ens.states(i, 0));
  BasisConfig basis;
  basis.family = BasisFamily::QuadraticRbf;
  basis.n_centers = int(state.range(0));
  basis.ridge = 1e-8;
  for (auto _ : state) {
    PotentialModel m = fit_potential(ens.states, costates, basis);
    benchmark::DoNotOptimize(m.linear().data());
  }
}
BENCHMARK(BM_FitPotentialRbf)->Arg(16)->Arg(64);

void BM_KdeScoreEval(benchmark::State& state) {
  const ProblemSpec spec = bridge_spec(0.5);
  const Ensemble ens = init_ensemble(spec, state.range(0), 1);
  const ScoreField s = estimate_score(ens.states, ScoreMethod::Kde);
  Eigen::VectorXd x = vec1(0.5), out(1);
  for (auto _ : state) {
    s.score_into(x, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_KdeScoreEval)->Arg(1024)->Arg(8192);

void BM_GridSinkhorn(benchmark::State& state) {
  const ProblemSpec spec = bridge_spec(0.5);
  const auto [lo, hi] = sinkhorn_grid_range(spec.pi0, spec.piT, 0.5, 1.0);
  for (auto _ : state) {
    GridBridge b = grid_sinkhorn_bridge(spec.pi0, spec.piT, 0.5, 1.0, lo, hi,
                                        int(state.range(0)), {0.5});
    benchmark::DoNotOptimize(b.iterations);
  }
}
BENCHMARK(BM_GridSinkhorn)->Arg(257)->Arg(513);

void BM_SolveBridge(benchmark::State& state) {
  const ProblemSpec spec = bridge_spec(0.5);
  SolverConfig config;
  config.n_particles = state.range(0);
  config.steps = 50;
  config.seed = 1;
  config.ipf.max_outer = 4;
  config.ipf.tol_terminal = 1e-9;  // never met: fixed four-sweep budget
  config.ipf.tol_fields = 1e-9;
  for (auto _ : state) {
    SolveReport report = solve(spec, config);
    benchmark::DoNotOptimize(report.history.data());
  }
}
BENCHMARK(BM_SolveBridge)->Unit(benchmark::kMillisecond)->Arg(1024)->Arg(4096);

}  // namespace

BENCHMARK_MAIN();
