#include <benchmark/benchmark.h>

#include "pointreg/datagen.hpp"
#include "pointreg/pipeline.hpp"
#include "pointreg/training.hpp"

using namespace pointreg;

namespace {

LoadedPair bench_pair(int points, std::uint64_t seed) {
  const PointCloud source = synth_shape(ShapeKind::kComposite, points, seed);
  PairSpec spec;
  spec.n_points = points;
  spec.seed = seed + 1;
  const RegistrationPair pair = make_pair(source, spec);
  return LoadedPair{pair.x, pair.y, pair.t_gt, pair.gt};
}

void bm_matching_forward(benchmark::State& state) {
  const int points = static_cast<int>(state.range(0));
  ModelConfig cfg;  // d=96, L=6
  const ModelParams params = init_params(cfg, 1);
  const LoadedPair pair = bench_pair(points, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict_matches(params, pair.x, pair.y));
  }
}
BENCHMARK(bm_matching_forward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void bm_train_step(benchmark::State& state) {
  const int points = static_cast<int>(state.range(0));
  ModelConfig cfg;
  ModelParams params = init_params(cfg, 2);
  const LoadedPair pair = bench_pair(points, 11);
  AdamState adam = AdamState::init(params);
  const AdamConfig adam_cfg;
  for (auto _ : state) {
    Tape t;
    const BoundModel bound = bind_model(t, params);
    const ForwardOutputs fwd = forward_loss(t, bound, cfg, pair.x, pair.y, pair.gt);
    t.backward(fwd.loss);
    params.zero_grad();
    accumulate_grads(t, bound, params);
    adam_step(params, adam, adam_cfg);
    benchmark::DoNotOptimize(params.values[0]);
  }
}
BENCHMARK(bm_train_step)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
