#include <benchmark/benchmark.h>

#include "pointreg/pose.hpp"
#include "pointreg/rng.hpp"

using namespace pointreg;

namespace {

struct PoseFixture {
  PointCloud x, y;
  CorrespondenceSet corr;

  explicit PoseFixture(int n, double outlier_fraction) {
    Rng rng(20);
    for (int i = 0; i < n; ++i) {
      x.points.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                            rng.uniform(-1.0, 1.0));
    }
    RigidTransform t;
    t.rotation = rotation_about_z(0.4);
    t.translation = {0.2, -0.1, 0.3};
    for (const auto& p : x.points) y.points.push_back(t.rotation * p + t.translation);
    for (int i = 0; i < n; ++i) {
      corr.pairs.emplace_back(i, i);
      corr.scores.push_back(1.0);
    }
    const int outliers = static_cast<int>(outlier_fraction * n);
    for (int i = n - outliers; i < n; ++i) {
      corr.pairs[static_cast<std::size_t>(i)].second =
          n - outliers + ((i - (n - outliers) + 7) % outliers);
    }
  }
};

void bm_kabsch(benchmark::State& state) {
  const PoseFixture f(static_cast<int>(state.range(0)), 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kabsch(f.x.points, f.y.points));
  }
}
BENCHMARK(bm_kabsch)->Arg(256)->Arg(1024);

void bm_ransac(benchmark::State& state) {
  const PoseFixture f(256, 0.5);
  RansacConfig cfg;
  cfg.seed = 9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ransac_register(f.corr, f.x, f.y, cfg));
  }
}
BENCHMARK(bm_ransac)->Unit(benchmark::kMillisecond);

void bm_icp(benchmark::State& state) {
  const PoseFixture f(static_cast<int>(state.range(0)), 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(icp(f.x, f.y, 50, 1e-8));
  }
}
BENCHMARK(bm_icp)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace
