#include <benchmark/benchmark.h>

#include <memory>
#include <numbers>

#include "riccilab/comparison.hpp"
#include "riccilab/critical.hpp"
#include "riccilab/fibration.hpp"
#include "riccilab/geodesic.hpp"

using namespace riccilab;

namespace {

void BM_DistanceClosedForm(benchmark::State& state) {
  const auto m = Manifold::sphere(2, 1.0);
  const Vec p = make_vec({0.7, 0.3}), q = make_vec({2.1, -1.2});
  for (auto _ : state) benchmark::DoNotOptimize(distance(m, p, q));
}
BENCHMARK(BM_DistanceClosedForm);

void BM_DistanceShooting(benchmark::State& state) {
  const auto m = state.range(0) == 0 ? Manifold::sphere(2, 1.0) : Manifold::parse("ellipsoid:a=1,b=1.2,c=0.8");
  const Vec p = make_vec({0.7, 0.3}), q = make_vec({2.1, -1.2});
  GeodesicOptions go;
  go.backend = GeodesicBackend::shooting;
  go.with_samples = false;
  for (auto _ : state) benchmark::DoNotOptimize(distance(m, p, q, go));
}
BENCHMARK(BM_DistanceShooting)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_RandomTriangle(benchmark::State& state) {
  const auto m = Manifold::hyperbolic(2, -1.0);
  GeodesicOptions go;
  go.backend = static_cast<GeodesicBackend>(state.range(0));
  go.with_samples = false;
  std::uint64_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(random_triangle(m, make_vec({0, 0}), 0.8, k++, go));
}
BENCHMARK(BM_RandomTriangle)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);

void BM_FirstConjugateTime(benchmark::State& state) {
  const auto m = Manifold::sphere(2, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(first_conjugate_time(m, make_vec({1.0, 0.3}), make_vec({0.4, 0.9}), 10.0));
  }
}
BENCHMARK(BM_FirstConjugateTime)->Unit(benchmark::kMillisecond);

void BM_HullMargin(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto dirs = spread_directions(n, 2 * n * n);
  for (auto _ : state) benchmark::DoNotOptimize(hull_margin(dirs));
}
BENCHMARK(BM_HullMargin)->DenseRange(2, 4);

void BM_FibrationFM(benchmark::State& state) {
  const auto m = std::make_shared<const Manifold>(Manifold::parse("torus:basis=[[10,0],[0,10]]"));
  auto coupling = build_coupling(m, m, identity_chart_distance(m, m), 0.2, 0);
  FibrationMap fm(std::move(coupling), 1.2);
  Rng rng(1);
  for (auto _ : state) {
    const Vec x = make_vec({rng.uniform(0, 10), rng.uniform(0, 10)});
    benchmark::DoNotOptimize(fm.f_M(x));
  }
}
BENCHMARK(BM_FibrationFM)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
