// Serial reference against OpenMP kernels: Monte Carlo ensembles and the
// modal parameter sweep. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "mma/experiments.hpp"
#include "mma/oscillation.hpp"

using namespace mma;

namespace {

modal::Execution exec_of(const benchmark::State& st) {
    return st.range(0) == 0 ? modal::Execution::Serial : modal::Execution::Parallel;
}

struct Base {
    scenario::Scenario s;
    dyn::PowerSystem sys;
    modal::LinearModel lin;
    modal::ModalDecomposition dec;
    attack::MmaCommand cmd;
};

const Base& base() {
    static const Base b = [] {
        Base x;
        x.s = exp::with_overrides(exp::bundled("kundur_base_mma"), {{"load.sigma", 1.0}});
        x.sys = scenario::build_system(x.s);
        x.lin = modal::linearize(x.sys);
        x.dec = modal::decompose(x.lin);
        x.cmd = *scenario::resolve_attack(x.s, modal::mode_info(x.dec, scenario::select_mode(x.dec, x.s.mode)));
        x.cmd.t_start = 0.5;
        x.cmd.t_stop = 5.0;
        return x;
    }();
    return b;
}

void BM_MonteCarloNonlinear(benchmark::State& st) {
    const auto& b = base();
    const auto c = scenario::make_case(b.s, b.sys, b.cmd, false);
    sim::SimConfig cfg = b.s.sim;
    cfg.dt = 0.005;
    cfg.t_end = 5.0;
    for (auto _ : st) {
        auto r = osc::monte_carlo_variance(c, cfg, b.s.metric.channel, 16, 7, exec_of(st));
        benchmark::DoNotOptimize(r.variance.data());
    }
}

void BM_MonteCarloLinear(benchmark::State& st) {
    const auto& b = base();
    const auto k = static_cast<std::size_t>(b.lin.output_index(b.s.metric.channel));
    for (auto _ : st) {
        auto r = osc::monte_carlo_variance_linear(b.lin, b.cmd, b.s.load, 0.005, 5.0, k, 64, 7, exec_of(st));
        benchmark::DoNotOptimize(r.variance.data());
    }
}

void BM_ModeSweep(benchmark::State& st) {
    const auto s = exp::bundled("kundur2area_base");
    auto build = [&](double v) { return scenario::build_system(exp::with_overrides(s, {{"pile.base_load", v}})); };
    auto pick = [&](const modal::ModalDecomposition& d) { return scenario::select_mode(d, s.mode); };
    std::vector<double> values;
    for (double v = 0.5; v <= 8.0 + 1e-9; v += 0.5) values.push_back(v);
    for (auto _ : st) {
        auto pts = modal::mode_sweep(build, values, pick, exec_of(st));
        benchmark::DoNotOptimize(pts.data());
    }
}

}  // namespace

BENCHMARK(BM_MonteCarloNonlinear)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarloLinear)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModeSweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
