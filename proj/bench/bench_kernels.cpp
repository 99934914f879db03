// Serial reference kernels against their OpenMP counterparts.
//
//   OMP_NUM_THREADS=4 ./bench_kernels --benchmark_counters_tabular=true

#include <benchmark/benchmark.h>

#include <vector>

#include "pbdn/dataset.hpp"
#include "pbdn/gibbs.hpp"
#include "pbdn/kernels.hpp"
#include "pbdn/random.hpp"

using namespace pbdn;

namespace {

struct Problem {
  RowMatrix x;
  Eigen::MatrixXd beta;
  Eigen::VectorXd log_r;
  Eigen::VectorXd r;
  std::vector<int> y;
  std::vector<double> w;
};

Problem make_problem(Eigen::Index n, Eigen::Index d = 16, Eigen::Index k = 20) {
  RngStream rng(7);
  Problem p;
  p.x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.x(i, 0) = 1.0;
    for (Eigen::Index v = 1; v < d; ++v) p.x(i, v) = rng.normal();
  }
  p.beta.resize(d, k);
  for (Eigen::Index j = 0; j < p.beta.size(); ++j) p.beta.data()[j] = 0.3 * rng.normal();
  p.log_r = Eigen::VectorXd::Constant(k, -2.0);
  p.r = p.log_r.array().exp();
  p.y.resize(static_cast<std::size_t>(n));
  for (auto& v : p.y) v = static_cast<int>(rng() % 2);
  p.w.resize(static_cast<std::size_t>(n));
  for (auto& v : p.w) v = rng.uniform();
  return p;
}

template <bool Parallel>
void BM_HiddenUnits(benchmark::State& state) {
  const Problem p = make_problem(state.range(0));
  for (auto _ : state) {
    auto h = Parallel ? kernels::hidden_units(p.x, p.beta) : kernels::serial::hidden_units(p.x, p.beta);
    benchmark::DoNotOptimize(h.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_Rates(benchmark::State& state) {
  const Problem p = make_problem(state.range(0));
  for (auto _ : state) {
    auto l = Parallel ? kernels::rates(p.x, p.beta, p.r) : kernels::serial::rates(p.x, p.beta, p.r);
    benchmark::DoNotOptimize(l.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_WeightedGram(benchmark::State& state) {
  const Problem p = make_problem(state.range(0));
  for (auto _ : state) {
    auto g = Parallel ? kernels::weighted_gram(p.x, p.w) : kernels::serial::weighted_gram(p.x, p.w);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_MapDataTerm(benchmark::State& state) {
  const Problem p = make_problem(state.range(0));
  for (auto _ : state) {
    auto t = Parallel ? kernels::map_data_term(p.x, p.y, p.beta, p.log_r, 1.0)
                      : kernels::serial::map_data_term(p.x, p.y, p.beta, p.log_r, 1.0);
    benchmark::DoNotOptimize(t.value);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_GibbsSweep(benchmark::State& state) {
  RngStream rng(11);
  const Dataset data =
      standardize(make_two_spirals(static_cast<std::size_t>(state.range(0)) / 2, 0.02, 1.0, rng));
  const auto hp = IshmHyperparams::gibbs_defaults();
  GibbsState s = init_gibbs_state(data, hp, 20, rng);
  for (auto _ : state) gibbs_step(s, data, hp, rng);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

#define PBDN_PAIR(fn)                                                                          \
  BENCHMARK_TEMPLATE(fn, false)->Name(#fn "/serial")->RangeMultiplier(8)->Range(512, 1 << 18); \
  BENCHMARK_TEMPLATE(fn, true)->Name(#fn "/openmp")->RangeMultiplier(8)->Range(512, 1 << 18)

PBDN_PAIR(BM_HiddenUnits);
PBDN_PAIR(BM_Rates);
PBDN_PAIR(BM_WeightedGram);
PBDN_PAIR(BM_MapDataTerm);
BENCHMARK(BM_GibbsSweep)->Arg(400)->Arg(4000);

BENCHMARK_MAIN();
