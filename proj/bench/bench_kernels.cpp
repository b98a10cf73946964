// Serial reference vs OpenMP kernels on desk-scale inputs.
#include <benchmark/benchmark.h>

#include "copaug/kernels.hpp"
#include "copaug/multicop.hpp"
#include "copaug/rng.hpp"

using namespace copaug;

namespace {

const ProfileSet& profiles() {
  static const auto set = generate_surrogate(2000, LevelGrid{40}, 1);
  return set;
}

const DataMatrix& inputs() {
  static const auto x = flatten(profiles(), Which::inputs);
  return x;
}

const UMatrix& pseudo() {
  static const auto u = kernels::serial::pseudo_observations(inputs());
  return u;
}

template <bool Parallel>
void BM_pseudo_observations(benchmark::State& state) {
  for (auto _ : state) {
    auto u = Parallel ? kernels::parallel::pseudo_observations(inputs())
                      : kernels::serial::pseudo_observations(inputs());
    benchmark::DoNotOptimize(u);
  }
}

template <bool Parallel>
void BM_kendall_tau_matrix(benchmark::State& state) {
  for (auto _ : state) {
    auto t = Parallel ? kernels::parallel::kendall_tau_matrix(pseudo())
                      : kernels::serial::kendall_tau_matrix(pseudo());
    benchmark::DoNotOptimize(t);
  }
}

template <bool Parallel>
void BM_gaussian_rows(benchmark::State& state) {
  static const auto model = fit_synthesis(profiles(), CopulaSpec{CopulaKind::gaussian}).gaussian;
  for (auto _ : state) {
    auto u = Parallel ? kernels::parallel::gaussian_rows(model.L, 20000, 3)
                      : kernels::serial::gaussian_rows(model.L, 20000, 3);
    benchmark::DoNotOptimize(u);
  }
}

template <bool Parallel>
void BM_run_plan(benchmark::State& state) {
  static const auto plan = [] {
    CopulaSpec spec{CopulaKind::vine};
    spec.truncation = 3;
    return compile_plan(fit_synthesis(profiles(), spec).vine);
  }();
  for (auto _ : state) {
    auto u = Parallel ? kernels::parallel::run_plan(plan, 5000, 4)
                      : kernels::serial::run_plan(plan, 5000, 4);
    benchmark::DoNotOptimize(u);
  }
}

template <bool Parallel>
void BM_radiate(benchmark::State& state) {
  for (auto _ : state) {
    auto f = Parallel ? kernels::parallel::radiate(profiles().profiles, {})
                      : kernels::serial::radiate(profiles().profiles, {});
    benchmark::DoNotOptimize(f);
  }
}

template <bool Parallel>
void BM_band_depth(benchmark::State& state) {
  static const auto curves = [] {
    DataMatrix m(500, 41);
    CounterRng rng(5);
    for (auto& x : m.data()) x = rng.normal();
    return m;
  }();
  for (auto _ : state) {
    auto d = Parallel ? kernels::parallel::band_depth(curves) : kernels::serial::band_depth(curves);
    benchmark::DoNotOptimize(d);
  }
}

}  // namespace

BENCHMARK(BM_pseudo_observations<false>)->Name("pseudo_observations/serial");
BENCHMARK(BM_pseudo_observations<true>)->Name("pseudo_observations/parallel");
BENCHMARK(BM_kendall_tau_matrix<false>)->Name("kendall_tau_matrix/serial");
BENCHMARK(BM_kendall_tau_matrix<true>)->Name("kendall_tau_matrix/parallel");
BENCHMARK(BM_gaussian_rows<false>)->Name("gaussian_rows/serial");
BENCHMARK(BM_gaussian_rows<true>)->Name("gaussian_rows/parallel");
BENCHMARK(BM_run_plan<false>)->Name("run_plan/serial");
BENCHMARK(BM_run_plan<true>)->Name("run_plan/parallel");
BENCHMARK(BM_radiate<false>)->Name("radiate/serial");
BENCHMARK(BM_radiate<true>)->Name("radiate/parallel");
BENCHMARK(BM_band_depth<false>)->Name("band_depth/serial");
BENCHMARK(BM_band_depth<true>)->Name("band_depth/parallel");

BENCHMARK_MAIN();
