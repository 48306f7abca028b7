#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "mma/builtin.hpp"
#include "mma/netmodel.hpp"

using namespace mma;
using namespace mma::net;
using namespace mma::data;

namespace {

Network two_bus(double p_load, double q_load) {
    Network n;
    n.name = "two_bus";
    n.buses = {{1, BusKind::Slack, 1.0, 0.0, 0.0, 0.0, {}}, {2, BusKind::PQ, 1.0, 0.0, 0.0, 0.0, {}}};
    n.branches = {{1, 2, {0.0, 0.1}, 0.0, 1.0}};
    n.loads = {{2, p_load, q_load}};
    return n;
}

}  // namespace

TEST_CASE("ybus is symmetric and rows of a lossless uncharged network sum to zero") {
    const auto net = builtin_network("kundur2area");
    const auto y = build_ybus(net.buses, net.branches);
    CHECK((y.y - y.y.transpose()).norm() < 1e-12);
    Network bare = two_bus(0.0, 0.0);
    const auto yb = build_ybus(bare.buses, bare.branches);
    CHECK(std::abs(yb.y.row(0).sum()) < 1e-12);
    CHECK(std::abs(yb.y(0, 1) - Complex(0.0, 10.0)) < 1e-12);
}

TEST_CASE("two-bus power flow matches the closed-form solution") {
    // Lossless line: P = V1 V2 sin(d) / X and the slack supplies the load exactly.
    const auto sol = solve_power_flow(two_bus(1.0, 0.0));
    const Complex v2 = sol.voltage(2);
    const double p = std::abs(v2) * std::sin(-std::arg(v2)) / 0.1;
    CHECK(p == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(sol.injection(1).real() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(sol.mismatch < 1e-8);
}

TEST_CASE("bundled networks solve") {
    for (const auto& name : builtin_network_names()) {
        const auto sol = solve_power_flow(builtin_network(name));
        CHECK_MESSAGE(sol.mismatch < 1e-8, name);
    }
}

TEST_CASE("kron reduction of a chain gives the series impedance") {
    std::vector<Bus> buses = {{1, BusKind::Slack, 1.0, 0.0, 0.0, 0.0, {}},
                              {2, BusKind::PQ, 1.0, 0.0, 0.0, 0.0, {}},
                              {3, BusKind::PQ, 1.0, 0.0, 0.0, 0.0, {}}};
    std::vector<Branch> br = {{1, 2, {0.01, 0.1}, 0.0, 1.0}, {2, 3, {0.02, 0.3}, 0.0, 1.0}};
    const auto y = build_ybus(buses, br);
    const std::vector<int> keep = {1, 3};
    const auto r = kron_reduce(y, keep);
    const Complex z = Complex(0.03, 0.4);
    CHECK(std::abs(r.y(0, 1) + 1.0 / z) < 1e-12);
    CHECK(std::abs(r.y(0, 0) - 1.0 / z) < 1e-12);
}

TEST_CASE("structural errors are rejected") {
    auto n = two_bus(1.0, 0.0);
    n.buses[1].kind = BusKind::Slack;
    CHECK_THROWS_AS(validate(n), InputError);
    auto m = two_bus(1.0, 0.0);
    m.branches[0].to = 7;
    CHECK_THROWS_AS(validate(m), InputError);
}

TEST_CASE("an infeasible load fails to converge") {
    CHECK_THROWS_AS(solve_power_flow(two_bus(40.0, 0.0)), ConvergenceError);
}

TEST_CASE("network json round-trips") {
    const auto net = builtin_network("ieee39");
    const auto back = network_from_json(network_to_json(net));
    CHECK(back.buses.size() == net.buses.size());
    CHECK(back.branches.size() == net.branches.size());
    const auto a = solve_power_flow(net), b = solve_power_flow(back);
    CHECK((a.v - b.v).norm() < 1e-10);
}
