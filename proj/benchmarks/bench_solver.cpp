#include "adacrit/criterion.hpp"
#include "adacrit/simulation.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

using namespace adacrit;

namespace {

sim::SimulatedData sample(int n, int p)
{
    static const std::uint64_t seed = 42;
    return sim::generate(n, sim::make_covariance(p, seed), sim::make_signal(p),
                         sim::NoiseKind::student_t(2.0), seed + 1);
}

LossSpec desk_loss(int n)
{
    return LossSpec::huber(0.054 * std::sqrt(static_cast<double>(n)));
}

} // namespace

static void BM_FitHuberElasticNet(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const int p = n / 2;
    const auto s = sample(n, p);
    const auto pen = PenaltySpec::elastic_net(0.0175, 0.01);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit(s.data, desk_loss(n), pen));
    }
}
BENCHMARK(BM_FitHuberElasticNet)->Arg(100)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);

static void BM_FitLasso(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto s = sample(n, n / 2);
    const auto pen = PenaltySpec::lasso(0.0032);
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit(s.data, desk_loss(n), pen));
    }
}
BENCHMARK(BM_FitLasso)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

static void BM_Sensitivity(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto s = sample(n, n / 2);
    const auto loss = desk_loss(n);
    const auto pen = PenaltySpec::elastic_net(0.0175, 0.01);
    const FitResult f = fit(s.data, loss, pen);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sensitivity_closed_form(s.data, loss, pen, f));
    }
}
BENCHMARK(BM_Sensitivity)->Arg(100)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);

static void BM_CritAdaptive(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto s = sample(n, n / 2);
    const auto loss = desk_loss(n);
    const auto pen = PenaltySpec::elastic_net(0.0175, 0.01);
    const FitResult f = fit(s.data, loss, pen);
    const SensitivityBundle b = sensitivity_closed_form(s.data, loss, pen, f);
    for (auto _ : state) {
        benchmark::DoNotOptimize(crit_adaptive(f, b, loss));
    }
}
BENCHMARK(BM_CritAdaptive)->Arg(400)->Arg(800);

static void BM_GridCell(benchmark::State& state)
{
    sim::SimConfig c;
    c.n = 400;
    c.p = 200;
    c.sigma_seed = 7;
    c.noise_kind = sim::NoiseKind::student_t(2.0);
    c.grid = {{0.054 * std::sqrt(400.0), 0.0175, 0.01}};
    c.replications = 8;
    c.base_seed = 11;
    int rep = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sim::run_cell(c, 0, rep++ % 8));
    }
}
BENCHMARK(BM_GridCell)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
