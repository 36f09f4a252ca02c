#include <benchmark/benchmark.h>

#include <memory>

#include "omt/simulate.hpp"

namespace {

omt::AffineModelSpec vasicek() {
  omt::AffineModelSpec m;
  m.A = omt::Matrix::Constant(1, 1, -1.0);
  m.B = omt::Vector::Constant(1, 0.05);
  m.S = omt::Matrix::Constant(1, 1, 0.1);
  m.alpha = omt::Vector::Ones(1);
  m.beta = omt::Matrix::Zero(1, 1);
  m.R = omt::Vector::Ones(1);
  return m;
}

void BM_SimulateP(benchmark::State& state) {
  const omt::FactorModel m{vasicek()};
  const omt::TimeGrid g{0.0, 1.0, 500};
  const auto x0 = omt::Vector::Constant(1, 0.05);
  for (auto _ : state) {
    benchmark::DoNotOptimize(omt::simulate(m, x0, g, 10000, 1, omt::KernelSpec::zero(1), {.threads = 1}));
  }
  state.SetItemsProcessed(state.iterations() * 10000 * 500);
}
BENCHMARK(BM_SimulateP)->Unit(benchmark::kMillisecond);

void BM_SimulateOptimalTilt(benchmark::State& state) {
  auto spec = vasicek();
  omt::JumpSpecAffine j;
  j.L = omt::Vector::Constant(1, 0.2);
  j.l = 0.1;
  j.measure = {{omt::Vector::Constant(1, 0.1)}, {0.5}};
  spec.jump = j;
  const omt::FactorModel m{spec};
  const omt::TimeGrid g{0.0, 1.0, 500};
  const auto x0 = omt::Vector::Constant(1, 0.05);
  auto sol = std::make_shared<const omt::RiccatiSolution>(omt::solve_model(m, g));
  const auto kernel = omt::optimal_kernel(sol, m);
  for (auto _ : state) {
    benchmark::DoNotOptimize(omt::simulate(m, x0, g, 10000, 1, kernel, {.threads = 1}));
  }
  state.SetItemsProcessed(state.iterations() * 10000 * 500);
}
BENCHMARK(BM_SimulateOptimalTilt)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
