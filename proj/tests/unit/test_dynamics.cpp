#include <doctest.h>

#include <cmath>

#include "mma/experiments.hpp"
#include "mma/simulate.hpp"

using namespace mma;

namespace {

struct Fixture {
    scenario::Scenario s;
    dyn::PowerSystem sys;
};

Fixture fixture(const std::string& name) {
    auto s = exp::bundled(name);
    return {s, scenario::build_system(s)};
}

double max_abs(const VectorXd& v) { return v.lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST_CASE("the assembled equilibrium is a fixed point") {
    for (const char* name : {"kundur2area_base", "kundur2area_heavy", "ieee39_mma"}) {
        const auto f = fixture(name);
        VectorXd dx(f.sys.x0.size());
        dyn::system_derivatives(f.sys, {f.sys.x0.data(), static_cast<std::size_t>(f.sys.x0.size())}, f.sys.p_ref0, {},
                                {dx.data(), static_cast<std::size_t>(dx.size())});
        CHECK_MESSAGE(max_abs(dx) < 1e-8, name);
        const auto sol = dyn::network_interface(f.sys, {f.sys.x0.data(), static_cast<std::size_t>(f.sys.x0.size())});
        for (std::size_t i = 0; i < f.sys.gens.size(); ++i) {
            CHECK(sol.gens[i].p_e == doctest::Approx(f.sys.gens[i].p_m0).epsilon(1e-9));
        }
    }
}

TEST_CASE("an undisturbed run stays at equilibrium") {
    const auto f = fixture("kundur2area_heavy");
    sim::SimCase c;
    c.system = &f.sys;
    c.load.mean = f.sys.p_ref0;
    sim::SimConfig cfg;
    cfg.t_end = 5.0;
    cfg.record_signals = {"*"};
    const auto tr = sim::simulate(c, cfg);
    for (std::size_t k = 0; k < tr.names.size(); ++k) {
        const auto& v = tr.data[k];
        double dev = 0.0;
        for (double e : v) dev = std::max(dev, std::abs(e - v.front()));
        CHECK_MESSAGE(dev < 1e-8, tr.names[k]);
    }
}

TEST_CASE("rk4 converges at fourth order") {
    const auto f = fixture("kundur2area_base");
    sim::SimCase c;
    c.system = &f.sys;
    c.load.mean = f.sys.p_ref0;
    attack::MmaCommand cmd;
    cmd.i_pct = 0.3;
    cmd.omega = kTwoPi * 0.63;
    cmd.t_start = 0.0;
    c.attack = cmd;
    auto at_end = [&](double dt) {
        sim::SimConfig cfg;
        cfg.dt = dt;
        cfg.t_end = 2.0;
        cfg.record_signals = {"G1.delta"};
        return sim::simulate(c, cfg).channel("G1.delta").back();
    };
    const double ref = at_end(0.01 / 32.0);
    const double e1 = std::abs(at_end(0.01) - ref), e2 = std::abs(at_end(0.005) - ref);
    const double order = std::log2(e1 / e2);
    MESSAGE("observed order " << order);
    CHECK(order > 3.5);
    CHECK(order < 4.6);
}

TEST_CASE("trapezoidal and rk4 agree on a forced run") {
    const auto f = fixture("kundur2area_base");
    sim::SimCase c;
    c.system = &f.sys;
    c.load.mean = f.sys.p_ref0;
    attack::MmaCommand cmd;
    cmd.i_pct = 0.3;
    cmd.omega = kTwoPi * 0.63;
    c.attack = cmd;
    sim::SimConfig cfg;
    cfg.dt = 0.001;
    cfg.t_end = 3.0;
    cfg.record_signals = {"G1.Pe"};
    const auto a = sim::simulate(c, cfg);
    cfg.integrator = sim::Integrator::Trapezoidal;
    const auto b = sim::simulate(c, cfg);
    double dev = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::abs(a.data[0][i] - b.data[0][i]));
    CHECK(dev < 1e-4);
}

TEST_CASE("simulation is deterministic and validates its inputs") {
    const auto f = fixture("kundur_heavy_mma");
    auto c = scenario::make_case(f.s, f.sys, attack::MmaCommand{0.2, kTwoPi * 0.62, 0.0, 1.0, 4.0}, false);
    c.load.sigma = 0.3;
    sim::SimConfig cfg;
    cfg.t_end = 4.0;
    const auto a = sim::simulate(c, cfg), b = sim::simulate(c, cfg);
    CHECK(a.data == b.data);
    cfg.dt = 0.003;
    CHECK_THROWS_AS(sim::simulate(c, cfg), InputError);
    cfg.dt = 0.001;
    cfg.record_signals = {"G9.Pe"};
    CHECK_THROWS_AS(sim::simulate(c, cfg), InputError);
}
