#include <benchmark/benchmark.h>

#include "pointreg/matching.hpp"
#include "pointreg/rng.hpp"

using namespace pointreg;

namespace {

Matrix random_scores(int m, int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix s(m, n);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) s(r, c) = rng.uniform(-2.0, 2.0);
  }
  return s;
}

void bm_sinkhorn_forward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix scores = random_scores(n, n, 4);
  for (auto _ : state) {
    Tape t(false);
    benchmark::DoNotOptimize(t.value(sinkhorn(t, t.leaf(scores), 1.0, 100)));
  }
}
BENCHMARK(bm_sinkhorn_forward)->Arg(64)->Arg(256)->Arg(768);

void bm_sinkhorn_backward(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix scores = random_scores(n, n, 5);
  const Matrix weights = random_scores(n + 1, n + 1, 6);
  for (auto _ : state) {
    Tape t;
    Var c = t.leaf(scores, true);
    Var loss = weighted_sum(t, sinkhorn(t, c, 1.0, 100), weights);
    t.backward(loss);
    benchmark::DoNotOptimize(t.grad(c));
  }
}
BENCHMARK(bm_sinkhorn_backward)->Arg(64)->Arg(256);

void bm_hard_assignment(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Tape t(false);
  const Matrix cbar = t.value(sinkhorn(t, t.leaf(random_scores(n, n, 7)), 1.0, 100));
  for (auto _ : state) {
    benchmark::DoNotOptimize(hard_assignment(cbar));
  }
}
BENCHMARK(bm_hard_assignment)->Arg(256)->Arg(1024);

}  // namespace
