#include <benchmark/benchmark.h>

#include "aggscale/kinetics.hpp"
#include "aggscale/model.hpp"
#include "aggscale/pantograph.hpp"
#include "aggscale/roots.hpp"
#include "aggscale/series.hpp"
#include "aggscale/shoot.hpp"

using namespace aggscale;

static void BM_DeltaRoot(benchmark::State& state) {
    const double lambda = static_cast<double>(state.range(0)) / 100.0;
    for (auto _ : state) benchmark::DoNotOptimize(solve_delta_nongel(lambda).value);
}
BENCHMARK(BM_DeltaRoot)->Arg(-200)->Arg(0)->Arg(50)->Arg(99);

static void BM_GelSeries(benchmark::State& state) {
    const int terms = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(gel_series(2.0, 2.6, terms).coeffs.back());
}
BENCHMARK(BM_GelSeries)->Arg(20)->Arg(80);

// Non-gelling march to x = 60 at lambda = 0.5, with and without the
// integral-form verification pass.
static void BM_MarchNonGel(benchmark::State& state) {
    const ScalingProblem p = make_problem(0.5, 1.0);
    const LocalSeries seed = series_for(p, 20);
    MarchOptions opt;
    opt.tol = 1e-10;
    opt.verify = state.range(0) != 0;
    const double end = p.map().to_var(60.0);
    for (auto _ : state) benchmark::DoNotOptimize(march(p, seed, end, opt).covered_end());
}
BENCHMARK(BM_MarchNonGel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// One probe of the tau search: classify a trajectory just above tau* out to
// zeta = 1e24.
static void BM_TauProbe(benchmark::State& state) {
    const ScalingProblem p = make_problem(2.0, 2.5542888);
    for (auto _ : state) benchmark::DoNotOptimize(classify(p, 1e24, 1e-11).tag);
}
BENCHMARK(BM_TauProbe)->Unit(benchmark::kMillisecond);

static void BM_Simulate(benchmark::State& state) {
    const int j_max = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(simulate(0.5, j_max, 1e12).steps);
}
BENCHMARK(BM_Simulate)->Arg(40)->Arg(60)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
