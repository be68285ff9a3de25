#include <benchmark/benchmark.h>

#include "bhpm/hpm.hpp"
#include "bhpm/tpbvp.hpp"
#include "bhpm/verify.hpp"

namespace {

using namespace bhpm;

BilinearProblem small_reactor() {
  const BilinearProblem r = reactor_problem();
  return r.with_initial_state(r.x0() / 15.0);
}

void BM_Expm(benchmark::State& state) {
  const Matrix M = assemble_hamiltonian_matrix(reactor_problem()).matrix();
  for (auto _ : state) benchmark::DoNotOptimize(expm(M, 0.01));
}
BENCHMARK(BM_Expm);

void BM_StepPropagatorSetup(benchmark::State& state) {
  const Matrix M = assemble_hamiltonian_matrix(reactor_problem()).matrix();
  for (auto _ : state) benchmark::DoNotOptimize(StepPropagator(M, 0.01));
}
BENCHMARK(BM_StepPropagatorSetup);

void BM_LinearTpbvp(benchmark::State& state) {
  const BilinearProblem p = reactor_problem();
  const TimeGrid g(p.t0(), p.tf(), static_cast<int>(state.range(0)));
  const LinearTpbvpSpec spec{assemble_hamiltonian_matrix(p), Trajectory(g, 4), p.x0(), p.Qf(),
                             Vector::Zero(2)};
  for (auto _ : state) benchmark::DoNotOptimize(solve_linear_ti_tpbvp(spec, g));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LinearTpbvp)->RangeMultiplier(4)->Range(300, 4800)->Complexity();

void BM_HpmIterate(benchmark::State& state) {
  const BilinearProblem p = small_reactor();
  const TimeGrid g(p.t0(), p.tf(), 300);
  const HpmOptions opts{static_cast<int>(state.range(0)), 1e-30};
  for (auto _ : state) benchmark::DoNotOptimize(hpm_iterate(p, g, opts));
}
BENCHMARK(BM_HpmIterate)->Arg(1)->Arg(3)->Arg(8);

void BM_SeriesCoefficient(benchmark::State& state) {
  const BilinearProblem p = small_reactor();
  const TimeGrid g(p.t0(), p.tf(), 300);
  const HpmSolution sol = hpm_iterate(p, g, HpmOptions{8, 1e-30});
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(series_coefficient_phi_psi(p, sol.terms, order));
  }
}
BENCHMARK(BM_SeriesCoefficient)->Arg(0)->Arg(3)->Arg(7);

void BM_ResidualReport(benchmark::State& state) {
  const BilinearProblem p = small_reactor();
  const TimeGrid g(p.t0(), p.tf(), 3000);
  const SeriesTerm t = initial_guess(p, g);
  for (auto _ : state) benchmark::DoNotOptimize(tpbvp_residual(p, t.x, t.lam));
}
BENCHMARK(BM_ResidualReport);

void BM_ReferenceSolve(benchmark::State& state) {
  const BilinearProblem p = reactor_problem();
  const TimeGrid g(p.t0(), p.tf(), static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference_solve(p, g));
}
BENCHMARK(BM_ReferenceSolve)->Arg(300)->Arg(3000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
