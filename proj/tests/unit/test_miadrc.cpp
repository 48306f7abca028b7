#include <doctest.h>

#include <algorithm>
#include <functional>
#include <cmath>
#include <random>

#include <unsupported/Eigen/Polynomials>

#include "mma/experiments.hpp"
#include "mma/miadrc.hpp"

using namespace mma;
using namespace mma::miadrc;

TEST_CASE("fhan is odd and saturates at r") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int i = 0; i < 2000; ++i) {
        const double x1 = u(rng), x2 = u(rng), r = 0.01 + std::abs(u(rng)), h = 0.001 * (1.0 + std::abs(u(rng)));
        const double f = fhan(x1, x2, r, h);
        REQUIRE(f == doctest::Approx(-fhan(-x1, -x2, r, h)).epsilon(1e-12));
        REQUIRE(std::abs(f) <= r * (1.0 + 1e-12));
    }
    CHECK(fhan(0.0, 0.0, 1.0, 0.01) == 0.0);
}

TEST_CASE("multi-index output is the weighted sum") {
    const MultiIndexCoeffs c{1.0, -0.1, 0.5};
    CHECK(multi_index_output(0.02, 0.3, -0.1, c) == doctest::Approx(0.02 - 0.03 - 0.05));
    MultiIndexCoeffs bad{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(bad.validate(), InputError);
}

namespace {

// Second-order plant y'' = d + b u_e integrated finely between controller periods.
struct Plant {
    double y = 0.0, v = 0.0;
    void advance(double d, double b, double ue, double h) {
        const int n = 20;
        const double dt = h / n;
        for (int i = 0; i < n; ++i) {
            v += dt * (d + b * ue);
            y += dt * v;
        }
    }
};

}  // namespace

TEST_CASE("the observer recovers a constant disturbance within 0.5 s") {
    MiadrcGains g;
    g.set_bandwidth(100.0 * kPi);
    const double d = 2.0;
    MiadrcState s;
    Plant p;
    engage(s, p.y);
    double ue = 0.0;
    const int steps = static_cast<int>(std::lround(0.5 / g.h));
    for (int k = 0; k < steps; ++k) {
        ue = controller_step(s, g, p.y);
        p.advance(d, g.b, ue, g.h);
    }
    CHECK(std::abs(s.chi3 - d) <= 0.05 * d);
}

TEST_CASE("the observer tracks a free second-order output within 10 / w_c") {
    MiadrcGains g;
    g.set_bandwidth(200.0);
    MiadrcState s;
    engage(s, 0.0);
    s.u = 0.0;
    double worst = 0.0;
    const double amp = 1.0, w = kTwoPi * 0.6;
    for (int k = 1; k <= 2000; ++k) {
        const double t = k * g.h;
        const double y = amp * std::sin(w * t);
        // Observe only: feed the measurement, discard the control.
        controller_step(s, g, y);
        s.u = 0.0;
        if (t >= 10.0 / 200.0) worst = std::max(worst, std::abs(s.chi1 - y));
    }
    CHECK(worst < 0.01 * amp);
}

TEST_CASE("a disabled controller is inert") {
    MiadrcState s;
    MiadrcGains g;
    CHECK(controller_step(s, g, 3.0) == 0.0);
    CHECK(s.chi1 == 0.0);
}

TEST_CASE("input gain matches the operating-point partials") {
    const auto sys = scenario::build_system(exp::bundled("kundur2area_heavy"));
    const MultiIndexCoeffs c;
    for (std::size_t i = 0; i < sys.gens.size(); ++i) {
        const auto k = k_constants(sys, i, sys.x0);
        const auto& p = sys.gens[i];
        const double expect = (c.c1 * k.du_de + c.c3 * k.k2) * p.k_a / (p.t_d0p * p.t_a);
        CHECK(compute_b(sys, i, sys.x0, c) == doctest::Approx(expect).epsilon(1e-5));
    }
    CHECK_THROWS_AS(compute_b(sys, 0, sys.x0, MultiIndexCoeffs{0.0, 1.0, 0.0}), InputError);
}

TEST_CASE("zero-dynamics matrix eigenvalues equal the block-diagram polynomial roots") {
    const auto sys = scenario::build_system(exp::bundled("kundur2area_heavy"));
    const MultiIndexCoeffs c;
    for (std::size_t i = 0; i < sys.gens.size(); ++i) {
        const auto& p = sys.gens[i];
        const auto k = k_constants(sys, i, sys.x0);
        const auto z = zero_dynamics(p, k, kTwoPi * 0.6, c);
        const double ka = p.k_a / (p.t_a * c.c1), w0 = p.omega0;
        // [(T_j s + D) s / w0 + K1] [(T'd0 s - k3)(s + 1/T_A) - ka c3 K2] + K2 [K4 (s + 1/T_A) + ka (c3 K1 + c2 s / w0)]
        Eigen::Vector3d p1(k.k1, p.d / w0, p.t_j / w0);
        Eigen::Vector3d p2(-k.k3 / p.t_a - ka * c.c3 * k.k2, p.t_d0p / p.t_a - k.k3, p.t_d0p);
        Eigen::Matrix<double, 5, 1> poly = Eigen::Matrix<double, 5, 1>::Zero();
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) poly[a + b] += p1[a] * p2[b];
        poly[0] += k.k2 * (k.k4 / p.t_a + ka * c.c3 * k.k1);
        poly[1] += k.k2 * (k.k4 + ka * c.c2 / w0);
        Eigen::PolynomialSolver<double, 4> ps(poly);
        auto key = [](Complex a, Complex b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); };
        std::vector<Complex> r1(ps.roots().begin(), ps.roots().end());
        std::vector<Complex> r2(z.eigenvalues.begin(), z.eigenvalues.end());
        std::sort(r1.begin(), r1.end(), key);
        std::sort(r2.begin(), r2.end(), key);
        for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(r1[j] - r2[j]) < 1e-6 * (1.0 + std::abs(r2[j])));
    }
}

TEST_CASE("controller-path damping vanishes without feedback and is positive at the operating points") {
    const auto t = torque_coefficients(0.8, 1.0, 0.4, 50.0, 0.05, 6.0, kTwoPi * 0.6, MultiIndexCoeffs{1.0, 0.0, 0.0});
    CHECK(t.d_e == 0.0);
    const auto sys = scenario::build_system(exp::bundled("kundur2area_heavy"));
    for (std::size_t i = 0; i < sys.gens.size(); ++i) {
        const auto z = zero_dynamics(sys.gens[i], k_constants(sys, i, sys.x0), kTwoPi * 0.6, MultiIndexCoeffs{});
        CHECK_MESSAGE(z.d_e > 0.0, sys.gens[i].name);
    }
}

namespace {

// Seconds from onset until the debounced gate closes, or -1.
double gate_delay(const std::function<double(double)>& x, double onset, double t_end) {
    GateConfig cfg;
    DetectionGate gate(cfg);
    const double dt = 0.01;
    std::vector<double> buf;
    for (int k = 0; k * dt <= t_end + 1e-9; ++k) buf.push_back(x(k * dt));
    const auto n = static_cast<std::size_t>(std::lround(cfg.window / dt));
    for (double t = cfg.window; t <= t_end + 1e-9; t += cfg.period) {
        const auto end = static_cast<std::size_t>(std::lround(t / dt)) + 1;
        if (gate.update({buf.data() + end - n, n}, dt)) return t - onset;
    }
    return -1.0;
}

}  // namespace

TEST_CASE("detection gate: forced oscillation closes within 4 s, flat and decaying signals do not") {
    const double w = kTwoPi * 0.62;
    const double forced = gate_delay([&](double t) { return t < 2.0 ? 7.0 : 7.0 + 0.5 * std::sin(w * (t - 2.0)); }, 2.0, 20.0);
    MESSAGE("forced detection delay " << forced << " s");
    CHECK(forced > 0.0);
    CHECK(forced <= 4.0);
    CHECK(gate_delay([](double) { return 7.0; }, 0.0, 20.0) < 0.0);
    const double zeta = 0.1, wd = w * std::sqrt(1.0 - zeta * zeta);
    CHECK(gate_delay([&](double t) { return 7.0 + std::exp(-zeta * w * t) * std::cos(wd * t); }, 0.0, 20.0) < 0.0);
}

TEST_CASE("single-window gate and configuration checks") {
    GateConfig cfg;
    std::vector<double> flat(300, 1.0);
    CHECK_FALSE(detection_gate(flat, 0.01, cfg));
    cfg.confirm = 0;
    CHECK_THROWS_AS(cfg.validate(), InputError);
}
