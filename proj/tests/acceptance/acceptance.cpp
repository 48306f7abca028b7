// Acceptance checks: one PASS/FAIL line per criterion. Arguments select
// criteria by id (AC1..AC10); none runs all. Exit status is 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mma/experiments.hpp"
#include "mma/miadrc.hpp"
#include "mma/oscillation.hpp"

using namespace mma;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string id;
    double budget_s;  // 0 = no runtime bound
    std::function<Outcome()> check;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

Outcome ac1() {
    const auto f = exp::table2();
    const json& s = f.summary;
    const double fe = s["eigen"]["frequency_hz"], ze = s["eigen"]["damping_ratio"];
    const double ef = s["relative_error"]["frequency"], ez = s["relative_error"]["damping_ratio"];
    return {within(fe, 1.370, 0.05) && within(ze, 0.28, 0.02) && ef < 0.01 && ez < 0.01,
            fmt("eigen %.4f Hz zeta %.4f; prony rel err f %.2e zeta %.2e", fe, ze, ef, ez)};
}

Outcome ac2() {
    const auto f = exp::fig12();
    const json& s = f.summary;
    const double z0 = s["start"]["damping_ratio"], z1 = s["end"]["damping_ratio"];
    const double flo = s["frequency_range_hz"][0], fhi = s["frequency_range_hz"][1];
    return {within(z0, 0.074, 0.02) && within(z1, 0.022, 0.02) && flo >= 0.40 && fhi <= 0.70,
            fmt("zeta %.4f -> %.4f, frequency %.3f..%.3f Hz", z0, z1, flo, fhi)};
}

Outcome ac3() {
    const auto f = exp::fig16();
    const json& c = f.summary["cases"];
    double amp[3], mac[3];
    for (int i = 0; i < 3; ++i) {
        amp[i] = c[i]["amplitude"];
        mac[i] = c[i]["shape_correlation"];
    }
    const bool peak = amp[1] > amp[0] && amp[1] > amp[2];
    const bool shape = mac[1] > mac[0] && mac[1] > mac[2];
    bool beats = true;
    std::ostringstream d;
    for (int i : {0, 2}) {
        const double b = c[i]["beat_frequency_hz"], e = c[i]["expected_beat_hz"];
        beats = beats && b > 0.0 && std::abs(b - e) <= 0.2 * e;
        d << fmt(" beat@%.2f %.4f vs %.4f;", c[i]["frequency_hz"].get<double>(), b, e);
    }
    d << fmt(" amp %.4g/%.4g/%.4g MAC %.3f/%.3f/%.3f", amp[0], amp[1], amp[2], mac[0], mac[1], mac[2]);
    return {peak && shape && beats, d.str()};
}

Outcome ac4() {
    const auto s = exp::bundled("kundur_heavy_mma");
    const auto lin = modal::linearize(scenario::build_system(s));
    const auto dec = modal::decompose(lin);
    const auto mode = modal::mode_info(dec, scenario::select_mode(dec, s.mode));
    attack::MmaCommand cmd{0.3, kTwoPi * mode.frequency, 0.4, 1.0, 15.0};
    const double mean = s.load.mean, dt = 0.002, t_end = 20.0;
    std::vector<double> t;
    for (long k = 0; k <= std::lround(t_end / dt); ++k) t.push_back(static_cast<double>(k) * dt);
    const auto pred = osc::mean_response(dec, cmd, mean, t);
    const MatrixXd y = osc::linear_response(
        lin, [&](double tt) { return attack::attack_reference(tt, mean, cmd) - mean; }, dt, t_end);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < y.cols(); ++k) {
        double se = 0.0, sr = 0.0;
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            se += std::pow(y(r, k) - pred.total(r, k), 2);
            sr += y(r, k) * y(r, k);
        }
        if (sr > 0.0) worst = std::max(worst, std::sqrt(se / sr));
    }
    return {worst < 0.01, fmt("worst relative RMS over %d outputs %.2e", static_cast<int>(y.cols()), worst)};
}

Outcome ac5() {
    exp::Options o;
    o.mc_trials = 500;
    const auto f = exp::fig17(o);
    const json& s = f.summary;
    const double err = s["mean_relative_error"];
    const bool law5 = s["law5"]["pass"];
    return {err < 0.20 && law5,
            fmt("window-mean variance error %.3f (pointwise RMS %.3f, exact-integral RMS %.3f); line %.4f Hz, bin %.4f, law5 %s",
                err, s["relative_rms_error"].get<double>(), s["exact_relative_rms_error"].get<double>(),
                s["dominant_line_hz"].get<double>(), s["bin_hz"].get<double>(), law5 ? "pass" : "fail")};
}

Outcome ac6() {
    const auto f = exp::fig14();
    const json& s = f.summary;
    const bool mono = s["monotone"];
    const double dev = s["linear_relative_deviation"];
    return {mono && dev < 1e-6, fmt("monotone %s, linear deviation %.2e", mono ? "yes" : "no", dev)};
}

Outcome ac7() {
    const auto r = scenario::run_scenario(exp::bundled("kundur_heavy_mma_miadrc"));
    const json& m = r.json["metrics"];
    const double rate = m["suppression_rate"];
    double v = 0.0;
    for (const auto& [g, a] : m["controlled_voltage_amplitude"].items()) v = std::max(v, a.get<double>());
    return {rate >= 0.90 && v < 0.05, fmt("suppression %.3f, controlled voltage amplitude %.4f pu", rate, v)};
}

Outcome ac8() {
    const auto f = exp::fig21();
    const json& s = f.summary;
    const double fm = s["mode"]["frequency_hz"], zm = s["mode"]["damping_ratio"];
    const json& sc = s["shape_check"];
    const bool shape = sc["g2_g3_coherent"].get<bool>() && sc["g5_g9_coherent"].get<bool>() && sc["groups_opposed"].get<bool>();
    const double rate = s["cases"][0]["metrics"]["suppression_rate"];
    return {within(fm, 1.28, 0.15) && shape && rate >= 0.80,
            fmt("mode %.3f Hz zeta %.4f, shape %s, suppression %.3f", fm, zm, shape ? "ok" : "wrong", rate)};
}

Outcome ac9() {
    const auto g = exp::zero_dynamics_grid();
    const std::size_t bad = g["violations"];
    std::ostringstream d;
    d << bad << " of " << g["points"].get<std::size_t>() << " grid points have D_e <= 0 (min " << g["min_d_e"].get<double>()
      << ")";
    std::size_t shown = 0;
    for (const auto& c : g["counterexamples"]) {
        if (shown++ == 3) break;
        d << "; counterexample K1=" << c["k1"] << " K2=" << c["k2"] << " K3=" << c["k3"] << " K_A=" << c["k_a"]
          << " T_A=" << c["t_a"] << " T'd0=" << c["t_d0p"] << " f=" << c["f_hz"] << " Hz D_e=" << c["d_e"];
    }
    return {bad == 0, d.str()};
}

// Invariants ---------------------------------------------------------------

Outcome ac10() {
    std::vector<std::string> failed;
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) failed.push_back(what);
    };

    for (const char* name : {"kundur2area_base", "kundur2area_heavy", "ieee39_mma"}) {
        const auto sys = scenario::build_system(exp::bundled(name));
        VectorXd dx(sys.x0.size());
        dyn::system_derivatives(sys, {sys.x0.data(), static_cast<std::size_t>(sys.x0.size())}, sys.p_ref0, {},
                                {dx.data(), static_cast<std::size_t>(dx.size())});
        need(dx.lpNorm<Eigen::Infinity>() < 1e-8, std::string("equilibrium ") + name);

        const auto lin = modal::linearize(sys);
        const auto dec = modal::decompose(lin);
        const MatrixXc a = lin.a.cast<Complex>();
        const MatrixXc r = a * dec.u_right - dec.u_right * dec.lambda.asDiagonal();
        need(r.norm() / lin.a.norm() < 1e-8, std::string("eigen residual ") + name);
    }

    const auto sys = scenario::build_system(exp::bundled("kundur2area_base"));
    sim::SimCase c;
    c.system = &sys;
    c.load.mean = sys.p_ref0;
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
    const double order = std::log2(std::abs(at_end(0.01) - ref) / std::abs(at_end(0.005) - ref));
    need(order > 3.5 && order < 4.6, fmt("rk4 order %.2f", order));

    bool fh = true;
    for (double x1 : {-2.0, -0.3, 0.0, 0.01, 1.5}) {
        for (double x2 : {-1.0, 0.0, 0.2, 3.0}) {
            const double f = miadrc::fhan(x1, x2, 0.5, 0.001);
            fh = fh && std::abs(f + miadrc::fhan(-x1, -x2, 0.5, 0.001)) < 1e-12 && std::abs(f) <= 0.5 + 1e-12;
        }
    }
    need(fh, "fhan oddness/saturation");

    miadrc::MiadrcGains g;
    miadrc::MiadrcState st;
    miadrc::engage(st, 0.0);
    double y = 0.0, v = 0.0;
    const double d = 2.0;
    for (int k = 0; k < 500; ++k) {
        const double ue = miadrc::controller_step(st, g, y);
        for (int j = 0; j < 20; ++j) {
            v += g.h / 20 * (d + g.b * ue);
            y += g.h / 20 * v;
        }
    }
    const double eso_err = std::abs(st.chi3 - d) / d;
    need(eso_err <= 0.05, fmt("ESO disturbance error %.3f", eso_err));

    auto short_run = exp::with_overrides(exp::bundled("kundur_heavy_mma_miadrc"), {{"sim.t_end", 6.0}, {"attack.t_stop", 6.0}});
    const auto h1 = scenario::run_scenario(short_run).json["report_hash"];
    const auto h2 = scenario::run_scenario(short_run).json["report_hash"];
    need(h1 == h2, "report hash determinism");

    std::string detail = fmt("rk4 order %.2f, ESO error %.3f", order, eso_err);
    for (const auto& f : failed) detail += "; FAILED " + f;
    return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {"AC1", 10.0, ac1}, {"AC2", 60.0, ac2}, {"AC3", 0.0, ac3},  {"AC4", 0.0, ac4},   {"AC5", 0.0, ac5},
        {"AC6", 0.0, ac6},  {"AC7", 30.0, ac7}, {"AC8", 120.0, ac8}, {"AC9", 0.0, ac9}, {"AC10", 120.0, ac10},
    };
    std::vector<std::string> want(argv + 1, argv + argc);
    int failures = 0;
    for (const auto& c : all) {
        if (!want.empty() && std::find(want.begin(), want.end(), c.id) == want.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0 && secs > c.budget_s) {
            o.pass = false;
            o.detail += fmt("; runtime %.1f s over the %.0f s budget", secs, c.budget_s);
        }
        std::printf("%s %s %s (%.1f s)\n", c.id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
