#include <benchmark/benchmark.h>

#include "omt/riccati.hpp"

namespace {

omt::AffineModelSpec cir(int n) {
  omt::AffineModelSpec m;
  m.A = -omt::Matrix::Identity(n, n);
  m.B = omt::Vector::Constant(n, 0.05);
  m.S = 0.1 * omt::Matrix::Identity(n, n);
  m.alpha = omt::Vector::Zero(n);
  m.beta = omt::Matrix::Identity(n, n);
  m.R = omt::Vector::Ones(n);
  return m;
}

omt::QuadraticModelSpec qtsm(int n) {
  omt::QuadraticModelSpec m;
  m.A = -0.5 * omt::Matrix::Identity(n, n);
  m.B = omt::Vector::Constant(n, 0.01);
  m.Sigma = 0.1 * omt::Matrix::Identity(n, n);
  m.Q = 0.3 * omt::Matrix::Identity(n, n);
  m.R = omt::Vector::Constant(n, 0.01);
  m.k = 0.02;
  return m;
}

void BM_SolveAffine(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto m = cir(n);
  const omt::TimeGrid g{0.0, 10.0, 2000};
  const auto term = omt::TerminalCondition::zero_affine(n);
  for (auto _ : state) benchmark::DoNotOptimize(omt::solve_affine(m, g, term));
}
BENCHMARK(BM_SolveAffine)->Arg(1)->Arg(3)->Arg(6);

void BM_SolveQuadratic(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto m = qtsm(n);
  const omt::TimeGrid g{0.0, 10.0, 2000};
  const auto term = omt::TerminalCondition::zero_quadratic(n);
  for (auto _ : state) benchmark::DoNotOptimize(omt::solve_quadratic(m, g, term));
}
BENCHMARK(BM_SolveQuadratic)->Arg(1)->Arg(2)->Arg(4);

}  // namespace
