#include <doctest.h>

#include <cmath>

#include "mma/experiments.hpp"
#include "mma/oscillation.hpp"

using namespace mma;

namespace {

struct Heavy {
    scenario::Scenario s;
    modal::LinearModel lin;
    modal::ModalDecomposition dec;
    modal::ModeInfo mode;
};

const Heavy& heavy() {
    static const Heavy h = [] {
        Heavy x;
        x.s = exp::bundled("kundur_heavy_mma");
        x.lin = modal::linearize(scenario::build_system(x.s));
        x.dec = modal::decompose(x.lin);
        x.mode = modal::mode_info(x.dec, scenario::select_mode(x.dec, x.s.mode));
        return x;
    }();
    return h;
}

std::vector<double> grid(double t_end, double dt) {
    std::vector<double> t;
    for (long k = 0; k <= std::lround(t_end / dt); ++k) t.push_back(static_cast<double>(k) * dt);
    return t;
}

}  // namespace

TEST_CASE("analytic mean response equals linear simulation of the same input") {
    const auto& h = heavy();
    attack::MmaCommand cmd{0.3, kTwoPi * h.mode.frequency, 0.4, 1.0, 15.0};
    const double mean = h.s.load.mean;
    const double dt = 0.002, t_end = 20.0;
    const auto t = grid(t_end, dt);
    const auto pred = osc::mean_response(h.dec, cmd, mean, t);
    const MatrixXd y = osc::linear_response(
        h.lin, [&](double tt) { return attack::attack_reference(tt, mean, cmd) - mean; }, dt, t_end);
    for (const char* out : {"G1.Pe", "G3.omega"}) {
        const auto k = h.lin.output_index(out);
        double se = 0.0, sr = 0.0;
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            se += std::pow(y(r, k) - pred.total(r, k), 2);
            sr += y(r, k) * y(r, k);
        }
        CHECK_MESSAGE(std::sqrt(se / sr) < 0.01, out);
    }
}

TEST_CASE("steady amplitude is linear in the attack ratio") {
    const auto& h = heavy();
    const auto mag = osc::frequency_response_magnitude(h.dec, kTwoPi * h.mode.frequency);
    const auto k = h.lin.output_index("G1.Pe");
    const double a1 = mag[k] * 0.1 * h.s.load.mean, a3 = mag[k] * 0.3 * h.s.load.mean;
    CHECK(a3 / a1 == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("prony recovers damped sinusoids") {
    const double dt = 0.02;
    const double s1 = -0.2, w1 = kTwoPi * 0.8, s2 = -1.0, w2 = kTwoPi * 1.7;
    std::vector<double> x;
    for (int k = 0; k < 500; ++k) {
        const double t = k * dt;
        x.push_back(0.5 + std::exp(s1 * t) * std::cos(w1 * t + 0.3) + 0.4 * std::exp(s2 * t) * std::cos(w2 * t));
    }
    const auto r = osc::prony_identify(x, dt, 10);
    const auto& m = osc::dominant_mode(r, 0.5, 1.0);
    CHECK(m.frequency == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(m.damping_ratio == doctest::Approx(-s1 / std::hypot(s1, w1)).epsilon(1e-5));
    CHECK(m.amplitude == doctest::Approx(1.0).epsilon(1e-4));
    const auto& m2 = osc::dominant_mode(r, 1.5, 2.0);
    CHECK(m2.frequency == doctest::Approx(1.7).epsilon(1e-6));
    CHECK(r.fit_residual < 1e-8);
    CHECK_THROWS_AS(osc::dominant_mode(r, 3.0, 4.0), NumericalError);
}

TEST_CASE("amplitude, envelope, beat and line estimators on synthetic signals") {
    const auto t = grid(60.0, 0.01);
    std::vector<double> x, beat, v;
    const double w = kTwoPi * 0.62;
    for (double tt : t) {
        x.push_back(3.0 + 0.7 * std::cos(w * tt + 1.0));
        beat.push_back(std::cos(w * tt) + 0.5 * std::cos(kTwoPi * 0.57 * tt));
        v.push_back(1.0 + 0.4 * std::cos(2.0 * w * tt));
    }
    CHECK(osc::sinusoid_amplitude(t, x, w, 10.0, 20.0) == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(osc::half_peak_to_peak(t, x, 10.0, 20.0) == doctest::Approx(0.7).epsilon(1e-3));
    const auto env = osc::block_envelope(t, x, 0.0, 60.0, 5.0);
    CHECK(env.size() == 12);
    CHECK(osc::beat_frequency(t, beat, 0.0, 60.0, 0.57) == doctest::Approx(0.05).epsilon(0.05));
    double bin = 0.0;
    const double line = osc::dominant_line(v, 0.01, &bin);
    CHECK(std::abs(line - 1.24) <= bin);
    CHECK(osc::shape_correlation(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0));
}

TEST_CASE("variance terms vanish before onset and stay non-negative") {
    const auto& h = heavy();
    const auto t = grid(20.0, 0.02);
    const auto k = static_cast<std::size_t>(h.lin.output_index("G1.Pe"));
    for (double f : {0.4, h.mode.frequency, 0.9}) {
        attack::MmaCommand cmd{0.3, kTwoPi * f, 0.0, 1.0, 20.0};
        const auto v = osc::variance_pem(h.dec, cmd, 1.0, kTwoPi * 5.0, t, k);
        const auto tot = v.total();
        CHECK(v.srs.front() == 0.0);
        CHECK(v.cqc.front() == 0.0);
        for (std::size_t i = 0; i < tot.size(); ++i) {
            REQUIRE(v.srs[i] >= 0.0);
            REQUIRE(tot[i] >= 0.0);
        }
    }
    // Without a 2w pair in range the cross term is zero.
    attack::MmaCommand far{0.3, kTwoPi * 40.0, 0.0, 1.0, 20.0};
    const auto v = osc::variance_pem(h.dec, far, 1.0, kTwoPi * 5.0, t, k);
    CHECK(v.pairs.empty());
    for (double c : v.cqc) CHECK(c == 0.0);
}

TEST_CASE("linear monte carlo agrees with the variance integral") {
    const auto& h = heavy();
    attack::MmaCommand cmd{0.3, kTwoPi * h.mode.frequency, 0.0, 1.0, 20.0};
    attack::LoadProcess lp = h.s.load;
    lp.sigma = 1.0;
    lp.coupling = attack::Coupling::Modulated;
    const auto k = static_cast<std::size_t>(h.lin.output_index("G1.Pe"));
    const auto mc = osc::monte_carlo_variance_linear(h.lin, cmd, lp, 0.002, 20.0, k, 400, 11,
                                                     modal::Execution::Parallel, 5);
    osc::VarianceOptions vo;
    vo.all_pairs = true;
    const auto exact = osc::variance_pem(h.dec, cmd, lp.sigma, lp.bandwidth_w, mc.time, k, vo).total();
    const auto trunc = osc::variance_pem(h.dec, cmd, lp.sigma, lp.bandwidth_w, mc.time, k).total();
    double se = 0.0, sr = 0.0, m_mc = 0.0, m_tr = 0.0;
    for (std::size_t i = 0; i < mc.time.size(); ++i) {
        if (mc.time[i] < 10.0) continue;
        se += std::pow(mc.variance[i] - exact[i], 2);
        sr += exact[i] * exact[i];
        m_mc += mc.variance[i];
        m_tr += trunc[i];
    }
    CHECK(std::sqrt(se / sr) < 0.2);
    CHECK(m_mc / m_tr == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("serial and parallel monte carlo reductions are identical") {
    const auto& h = heavy();
    attack::MmaCommand cmd{0.3, kTwoPi * h.mode.frequency, 0.0, 1.0, 5.0};
    attack::LoadProcess lp = h.s.load;
    lp.sigma = 1.0;
    const auto k = static_cast<std::size_t>(h.lin.output_index("G1.Pe"));
    const auto a = osc::monte_carlo_variance_linear(h.lin, cmd, lp, 0.005, 5.0, k, 24, 3, modal::Execution::Serial);
    const auto b = osc::monte_carlo_variance_linear(h.lin, cmd, lp, 0.005, 5.0, k, 24, 3, modal::Execution::Parallel);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
}

TEST_CASE("law predicates accept consistent evidence and reject contrary evidence") {
    osc::LawInputs in;
    in.mean_amplitude = 0.3;
    in.stochastic_std = 0.05;
    in.dampings = {0.06, 0.02};
    in.damping_amplitudes = {0.15, 0.27};
    in.mode_frequency = 0.62;
    in.attack_frequencies = {0.57, 0.62, 0.65};
    in.frequency_amplitudes = {0.06, 0.36, 0.17};
    in.shape_correlations = {0.85, 0.99, 0.93};
    in.beat_frequencies = {0.05, 0.0, 0.03};
    std::vector<double> v;
    for (int i = 0; i < 1000; ++i) v.push_back(1.0 + std::cos(kTwoPi * 1.24 * i * 0.01));
    in.variance = v;
    in.variance_dt = 0.01;
    in.attack_frequency = 0.62;
    for (const auto& r : osc::law_checks(in)) CHECK_MESSAGE(r.pass, "law " << r.law << ": " << r.detail);
    in.damping_amplitudes = {0.3, 0.2};
    in.frequency_amplitudes = {0.4, 0.36, 0.17};
    const auto bad = osc::law_checks(in);
    CHECK_FALSE(bad[1].pass);
    CHECK_FALSE(bad[2].pass);
}
