#include <benchmark/benchmark.h>

#include "pointreg/geometry.hpp"
#include "pointreg/normals.hpp"
#include "pointreg/rng.hpp"

using namespace pointreg;

namespace {

PointCloud random_cloud(int n, std::uint64_t seed) {
  Rng rng(seed);
  PointCloud cloud;
  cloud.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cloud.points.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                              rng.uniform(-1.0, 1.0));
  }
  return cloud;
}

void bm_knn(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PointCloud cloud = random_cloud(n, 1);
  int q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(knn(cloud, q, 16));
    q = (q + 1) % n;
  }
}
BENCHMARK(bm_knn)->Arg(256)->Arg(1024)->Arg(2048);

void bm_radius_neighbors(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PointCloud cloud = random_cloud(n, 2);
  int q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(radius_neighbors(cloud, q, 0.3, 128));
    q = (q + 1) % n;
  }
}
BENCHMARK(bm_radius_neighbors)->Arg(256)->Arg(1024)->Arg(2048);

void bm_estimate_normals(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const PointCloud cloud = random_cloud(n, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_normals(cloud, 0.3, 128));
  }
}
BENCHMARK(bm_estimate_normals)->Arg(256)->Arg(1024);

}  // namespace
