#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mma/attack.hpp"

using namespace mma;
using namespace mma::attack;

TEST_CASE("attack reference is the modulated base inside the window only") {
    MmaCommand c;
    c.i_pct = 0.3;
    c.omega = kTwoPi * 0.62;
    c.t_start = 1.0;
    c.t_stop = 20.0;
    CHECK(attack_reference(0.5, 2.0, c) == 2.0);
    CHECK(attack_reference(1.0, 2.0, c) == doctest::Approx(2.6));
    CHECK(attack_reference(25.0, 2.0, c) == 2.0);
    const double t = 3.3;
    CHECK(attack_reference(t, 2.0, c) == doctest::Approx(2.0 * (1.0 + 0.3 * std::cos(c.omega * (t - 1.0)))));
}

TEST_CASE("command validation") {
    MmaCommand c;
    c.i_pct = 1.5;
    CHECK_THROWS_AS(c.validate(), InputError);
    c.i_pct = 0.2;
    c.t_stop = c.t_start;
    CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("band-limited load has the requested statistics and is seed-deterministic") {
    LoadProcess lp;
    lp.mean = 2.0;
    lp.sigma = 0.5;
    lp.bandwidth_w = kTwoPi * 5.0;
    std::vector<double> grid(100001);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 1e-3 * static_cast<double>(i);
    const auto a = sample_base_load(lp, grid);
    const auto b = sample_base_load(lp, grid);
    CHECK(a == b);
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    double var = 0.0;
    for (double x : a) var += (x - mean) * (x - mean);
    var /= static_cast<double>(a.size() - 1);
    CHECK(mean == doctest::Approx(2.0).epsilon(0.03));
    CHECK(std::sqrt(var) == doctest::Approx(0.5).epsilon(0.05));
    lp.seed = 2;
    CHECK(sample_base_load(lp, grid) != a);
}

TEST_CASE("load sampling rejects a bandwidth above Nyquist and a ragged grid") {
    LoadProcess lp;
    lp.sigma = 1.0;
    lp.bandwidth_w = kTwoPi * 600.0;
    const std::vector<double> grid = {0.0, 1e-3, 2e-3};
    CHECK_THROWS_AS(sample_base_load(lp, grid), InputError);
    lp.bandwidth_w = kTwoPi * 5.0;
    const std::vector<double> ragged = {0.0, 1e-3, 3e-3};
    CHECK_THROWS_AS(sample_base_load(lp, ragged), InputError);
}

TEST_CASE("modulated coupling keeps the mean command and multiplies the noise by the carrier") {
    MmaCommand c;
    c.i_pct = 0.2;
    c.omega = 2.0;
    c.t_start = 0.0;
    LoadProcess lp;
    lp.mean = 1.0;
    lp.coupling = Coupling::Modulated;
    const double t = 0.7, k = std::cos(2.0 * t);
    CHECK(command_with_load(t, 1.5, c, lp) == doctest::Approx(1.0 * (1.0 + 0.2 * k) + 0.5 * k));
    lp.coupling = Coupling::Full;
    CHECK(command_with_load(t, 1.5, c, lp) == doctest::Approx(1.5 * (1.0 + 0.2 * k)));
}

TEST_CASE("derived seeds are distinct per index") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}
