#include "mma/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>

#include <unsupported/Eigen/FFT>

#include "mma/attack.hpp"
#include "mma/miadrc.hpp"
#include "mma/oscillation.hpp"

namespace mma::exp {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- tables

Table Table::from_trace(const sim::Trace& t) {
    Table out;
    out.add("time", t.time);
    for (std::size_t c = 0; c < t.names.size(); ++c) out.add(t.names[c], t.data[c]);
    return out;
}

void Table::add(const std::string& name, std::vector<double> values) {
    if (!cols.empty() && values.size() != rows()) throw InputError("table column '" + name + "' has the wrong length");
    names.push_back(name);
    cols.push_back(std::move(values));
}

void Table::write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write " + path);
    for (std::size_t c = 0; c < names.size(); ++c) f << (c ? "," : "") << names[c];
    f << '\n' << std::setprecision(12);
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) f << (c ? "," : "") << cols[c][r];
        f << '\n';
    }
}

// --------------------------------------------------------------- helpers

namespace {

constexpr std::pair<const char*, Figure (*)(const Options&)> kFigures[] = {
    {"table2", table2}, {"fig8", fig8},   {"fig9", fig9},         {"fig12", fig12}, {"fig13", fig13}, {"fig14", fig14},
    {"fig15", fig15},   {"fig16", fig16}, {"fig17", fig17},       {"fig18_19", fig18_19}, {"fig20", fig20},
    {"fig21", fig21},
};

/// Complex phasor P with x(t) ~ c + Re(P e^{j w t}) over [t0, t1].
Complex phasor(std::span<const double> time, std::span<const double> x, double w, double t0, double t1) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < time.size(); ++i) {
        if (time[i] >= t0 - 1e-12 && time[i] <= t1 + 1e-12) idx.push_back(i);
    }
    if (idx.size() < 4) throw InputError("phasor window is empty");
    MatrixXd a(static_cast<Eigen::Index>(idx.size()), 3);
    VectorXd b(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double t = time[idx[r]];
        a(static_cast<Eigen::Index>(r), 0) = 1.0;
        a(static_cast<Eigen::Index>(r), 1) = std::cos(w * t);
        a(static_cast<Eigen::Index>(r), 2) = std::sin(w * t);
        b[static_cast<Eigen::Index>(r)] = x[idx[r]];
    }
    const VectorXd c = a.colPivHouseholderQr().solve(b);
    return {c[1], -c[2]};
}

json mode_json(const modal::ModeInfo& m) {
    return {{"frequency_hz", m.frequency},
            {"damping_ratio", m.damping_ratio},
            {"eigenvalue", {{"re", m.eigenvalue.real()}, {"im", m.eigenvalue.imag()}}}};
}

struct Built {
    scenario::Scenario s;
    dyn::PowerSystem sys;
    modal::LinearModel lin;
    modal::ModalDecomposition dec;
    std::size_t mode = 0;
    modal::ModeInfo info;
};

Built build(const scenario::Scenario& s) {
    Built b{s, scenario::build_system(s), {}, {}, 0, {}};
    b.lin = modal::linearize(b.sys);
    b.dec = modal::decompose(b.lin);
    b.mode = scenario::select_mode(b.dec, s.mode);
    b.info = modal::mode_info(b.dec, b.mode);
    return b;
}

std::vector<std::string> gen_channels(const dyn::PowerSystem& sys, const std::string& signal) {
    std::vector<std::string> out;
    for (const auto& g : sys.gens) out.push_back(g.name + "." + signal);
    return out;
}

/// Speed entries of a mode shape, in machine order.
VectorXc speed_shape(const modal::ModeInfo& m, const dyn::PowerSystem& sys) {
    VectorXc v(static_cast<Eigen::Index>(sys.gens.size()));
    for (std::size_t i = 0; i < sys.gens.size(); ++i) {
        const auto label = sys.gens[i].name + ".omega";
        const auto it = std::find(m.shape_labels.begin(), m.shape_labels.end(), label);
        if (it == m.shape_labels.end()) throw NumericalError("mode shape lacks " + label);
        v[static_cast<Eigen::Index>(i)] = m.shape[it - m.shape_labels.begin()];
    }
    return v;
}

Table sweep_table(const std::vector<modal::SweepPoint>& pts, const std::string& param) {
    Table t;
    std::vector<double> v, re, im, f, z, c;
    for (const auto& p : pts) {
        v.push_back(p.value);
        re.push_back(p.mode.eigenvalue.real());
        im.push_back(p.mode.eigenvalue.imag());
        f.push_back(p.mode.frequency);
        z.push_back(p.mode.damping_ratio);
        c.push_back(p.correlation);
    }
    t.add(param, v);
    t.add("re", re);
    t.add("im", im);
    t.add("frequency_hz", f);
    t.add("damping_ratio", z);
    t.add("correlation", c);
    return t;
}

std::function<std::size_t(const modal::ModalDecomposition&)> picker(const scenario::ModeTarget& t) {
    return [t](const modal::ModalDecomposition& d) { return scenario::select_mode(d, t); };
}

std::vector<modal::SweepPoint> pile_load_sweep(const scenario::Scenario& base, const std::vector<double>& loads,
                                               modal::Execution exec) {
    auto builder = [&](double p) {
        return scenario::build_system(with_overrides(base, {{"pile.base_load", p}}));
    };
    return modal::mode_sweep(builder, loads, picker(base.mode), exec);
}

// Forced response of a scenario with the attack command replaced.
struct Forced {
    sim::Trace trace;
    attack::MmaCommand cmd;
};

Forced forced_run(const Built& b, attack::MmaCommand cmd, double t_end, const std::vector<std::string>& channels,
                  bool with_defense = false) {
    auto s = b.s;
    s.sim.t_end = t_end;
    auto c = scenario::make_case(s, b.sys, cmd, with_defense);
    auto cfg = s.sim;
    cfg.record_signals = channels;
    return {sim::simulate(c, cfg), cmd};
}

Figure run_report_figure(const std::string& id, const std::vector<scenario::Scenario>& cases) {
    Figure f;
    f.id = id;
    f.summary["cases"] = json::array();
    for (const auto& s : cases) {
        const auto rep = scenario::run_scenario(s);
        json c = rep.json;
        f.summary["cases"].push_back(c);
        f.tables.emplace_back(s.name + "_controlled", Table::from_trace(rep.trace));
        if (rep.baseline) f.tables.emplace_back(s.name + "_uncontrolled", Table::from_trace(*rep.baseline));
    }
    return f;
}

}  // namespace

std::vector<std::string> figure_ids() {
    std::vector<std::string> out;
    for (const auto& [id, fn] : kFigures) out.emplace_back(id);
    return out;
}

Figure run_figure(const std::string& id, const Options& opts) {
    for (const auto& [name, fn] : kFigures) {
        if (id == name) return fn(opts);
    }
    std::string list;
    for (const auto& n : figure_ids()) list += (list.empty() ? "" : ", ") + n;
    throw InputError("unknown figure id '" + id + "'; available: " + list);
}

void write_figure(const Figure& f, const std::string& dir, const Options& opts) {
    fs::create_directories(dir);
    const fs::path d(dir);
    std::vector<std::string> files{"summary.json"};
    {
        std::ofstream o(d / "summary.json");
        o << f.summary.dump(2) << '\n';
    }
    for (const auto& [stem, table] : f.tables) {
        table.write_csv((d / (stem + ".csv")).string());
        files.push_back(stem + ".csv");
    }
    json man = {{"schema", "mma-manifest/1"},
                {"kind", "reproduce"},
                {"figure", f.id},
                {"parameters",
                 {{"mc_trials", opts.mc_trials},
                  {"seed", opts.seed},
                  {"execution", opts.exec == modal::Execution::Parallel ? "parallel" : "serial"}}},
                {"summary_hash", scenario::json_hash(f.summary)},
                {"files", files}};
    if (f.summary.contains("scenarios")) man["scenarios"] = f.summary["scenarios"];
    std::ofstream o(d / "manifest.json");
    o << man.dump(2) << '\n';
}

scenario::Scenario bundled(const std::string& name) {
    return scenario::load_scenario(scenario::resolve_scenario(name));
}

scenario::Scenario with_overrides(const scenario::Scenario& s, const std::vector<std::pair<std::string, json>>& kv) {
    json doc = s.document;
    for (const auto& [path, value] : kv) scenario::apply_override(doc, path, value.dump());
    return scenario::parse_scenario(doc);
}

std::vector<double> daily_charging_profile() {
    // Coordinated charging: low during the day, evening ramp, peak around 22:00.
    return {6.5, 6.0, 5.2, 4.0, 2.8, 1.8, 1.2, 1.0, 0.9, 0.8, 0.8, 0.9,
            1.0, 1.0, 1.1, 1.2, 1.5, 2.2, 3.2, 4.5, 6.0, 7.2, 8.0, 7.5};
}

// ---------------------------------------------------------------- recipes

Figure table2(const Options&) {
    Figure f;
    f.id = "table2";
    const auto cal = modal::calibrate_pile(1.37, 0.2797, {}, 0.5);
    dyn::PileParams p;
    p.kp3 = cal.kp3;
    p.ki3 = cal.ki3;

    const auto sys = modal::pile_test_system(p, 0.5);
    const auto dec = modal::decompose(modal::linearize(sys));
    const auto idx = modal::dominant_mode_of(dec, "pile.theta_pll", 0.5, 3.0);

    // Power command step 0.2 -> 0.5 pu from the 0.2 pu equilibrium.
    const auto sys0 = modal::pile_test_system(p, 0.2);
    sim::SimCase c;
    c.system = &sys0;
    c.load.mean = 0.5;
    sim::SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 4.0;
    cfg.record_signals = {"pile.Pe", "pile.theta"};
    const auto tr = sim::simulate(c, cfg);

    const double step = 0.01;
    const auto stride = static_cast<std::size_t>(std::lround(step / cfg.dt));
    std::vector<double> x;
    // The PLL mode barely reaches Pe; its angle carries it clearly.
    const auto& th = tr.channel("pile.theta");
    for (std::size_t i = 0; i < th.size(); i += stride) x.push_back(th[i]);
    const auto pr = osc::prony_identify(x, step, 8);
    const auto& pm = osc::dominant_mode(pr, 0.5, 3.0);

    const double fe = dec.frequency_hz(idx), ze = dec.damping_ratio(idx);
    f.summary = {{"calibration",
                  {{"kp3", cal.kp3}, {"ki3", cal.ki3}, {"iterations", cal.iterations}, {"converged", cal.converged}}},
                 {"eigen", {{"frequency_hz", fe}, {"damping_ratio", ze}}},
                 {"prony",
                  {{"frequency_hz", pm.frequency},
                   {"damping_ratio", pm.damping_ratio},
                   {"channel", "pile.theta"},
                   {"fit_residual", pr.fit_residual},
                   {"order", pr.order}}},
                 {"relative_error",
                  {{"frequency", std::abs(pm.frequency - fe) / fe}, {"damping_ratio", std::abs(pm.damping_ratio - ze) / ze}}},
                 {"target", {{"frequency_hz", 1.370}, {"damping_ratio", 0.2797}}}};
    f.tables.emplace_back("step_response", Table::from_trace(tr));
    return f;
}

Figure fig8(const Options&) {
    Figure f;
    f.id = "fig8";
    const auto cal = modal::calibrate_pile(1.37, 0.2797, {}, 0.5);
    dyn::PileParams p;
    p.kp3 = cal.kp3;
    p.ki3 = cal.ki3;
    const auto sys = modal::pile_test_system(p, 0.5);
    const auto dec = modal::decompose(modal::linearize(sys));
    const auto idx = modal::dominant_mode_of(dec, "pile.theta_pll", 0.5, 3.0);
    const auto pf = modal::participation_factors(dec, idx);
    json parts = json::object();
    Table t;
    std::vector<double> k, v;
    for (std::size_t i = 0; i < dec.state_labels.size(); ++i) {
        parts[dec.state_labels[i]] = pf[static_cast<Eigen::Index>(i)];
        k.push_back(static_cast<double>(i));
        v.push_back(pf[static_cast<Eigen::Index>(i)]);
    }
    t.add("state_index", k);
    t.add("participation", v);
    f.summary = {{"mode", mode_json(modal::mode_info(dec, idx))}, {"participation", parts}, {"states", dec.state_labels}};
    f.tables.emplace_back("participation", t);
    return f;
}

Figure fig9(const Options& opts) {
    Figure f;
    f.id = "fig9";
    const auto cal = modal::calibrate_pile(1.37, 0.2797, {}, 0.5);
    std::vector<double> scale;
    for (int i = 0; i <= 15; ++i) scale.push_back(0.5 + 0.1 * i);
    auto pick = [](const modal::ModalDecomposition& d) { return modal::dominant_mode_of(d, "pile.theta_pll", 0.2, 5.0); };
    f.summary["calibrated"] = {{"kp3", cal.kp3}, {"ki3", cal.ki3}};
    for (const char* which : {"kp3", "ki3"}) {
        std::vector<double> values;
        for (double s : scale) values.push_back(s * (std::string(which) == "kp3" ? cal.kp3 : cal.ki3));
        auto builder = [&](double v) {
            dyn::PileParams p;
            p.kp3 = cal.kp3;
            p.ki3 = cal.ki3;
            (std::string(which) == "kp3" ? p.kp3 : p.ki3) = v;
            return modal::pile_test_system(p, 0.5);
        };
        const auto pts = modal::mode_sweep(builder, values, pick, opts.exec);
        f.summary[which] = {{"first", mode_json(pts.front().mode)}, {"last", mode_json(pts.back().mode)}};
        f.tables.emplace_back(std::string("trajectory_") + which, sweep_table(pts, which));
    }
    return f;
}

Figure fig12(const Options& opts) {
    Figure f;
    f.id = "fig12";
    const auto base = bundled("kundur2area_base");
    std::vector<double> loads;
    for (int i = 1; i <= 16; ++i) loads.push_back(0.5 * i);
    const auto pts = pile_load_sweep(base, loads, opts.exec);
    double fmin = 1e9, fmax = 0.0, zmin = 1e9, zmax = 0.0;
    for (const auto& p : pts) {
        fmin = std::min(fmin, p.mode.frequency);
        fmax = std::max(fmax, p.mode.frequency);
        zmin = std::min(zmin, p.mode.damping_ratio);
        zmax = std::max(zmax, p.mode.damping_ratio);
    }
    f.summary = {{"scenario", base.name},
                 {"start", mode_json(pts.front().mode)},
                 {"end", mode_json(pts.back().mode)},
                 {"frequency_range_hz", {fmin, fmax}},
                 {"damping_range", {zmin, zmax}},
                 {"loads", loads}};
    f.tables.emplace_back("load_sweep", sweep_table(pts, "pile_load"));
    return f;
}

Figure fig13(const Options& opts) {
    Figure f;
    f.id = "fig13";
    const auto base = bundled("kundur2area_base");
    const auto profile = daily_charging_profile();
    const auto pts = pile_load_sweep(base, profile, opts.exec);
    Table t = sweep_table(pts, "pile_load");
    std::vector<double> hours;
    for (std::size_t h = 0; h < profile.size(); ++h) hours.push_back(static_cast<double>(h));
    t.add("hour", hours);
    std::size_t worst = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].mode.damping_ratio < pts[worst].mode.damping_ratio) worst = i;
    }
    f.summary = {{"scenario", base.name}, {"lowest_damping_hour", worst}, {"lowest", mode_json(pts[worst].mode)},
                 {"profile", profile}};
    f.tables.emplace_back("daily", t);
    return f;
}

Figure fig14(const Options&) {
    Figure f;
    f.id = "fig14";
    const auto b = build(bundled("kundur_heavy_mma"));
    const auto base_cmd = *scenario::resolve_attack(b.s, b.info);
    const auto [t0, t1] = scenario::steady_window(b.s, base_cmd);
    const std::string out = b.s.metric.channel;
    const auto k = static_cast<std::size_t>(b.lin.output_index(out));
    json cases = json::array();
    std::vector<double> amp, lin_amp;
    for (double ip : {0.1, 0.2, 0.3}) {
        auto cmd = base_cmd;
        cmd.i_pct = ip;
        const auto r = forced_run(b, cmd, b.s.sim.t_end, gen_channels(b.sys, "Pe"));
        const double a = osc::sinusoid_amplitude(r.trace.time, r.trace.channel(out), cmd.omega, t0, t1);
        const double mean = b.s.load.mean;
        const MatrixXd y = osc::linear_response(
            b.lin, [&](double t) { return attack::attack_reference(t, mean, cmd) - mean; }, b.s.sim.dt, b.s.sim.t_end,
            b.s.sim.record_every);
        std::vector<double> tl, yl;
        for (Eigen::Index r2 = 0; r2 < y.rows(); ++r2) {
            tl.push_back(std::min(static_cast<double>(r2 * b.s.sim.record_every) * b.s.sim.dt, b.s.sim.t_end));
            yl.push_back(y(r2, static_cast<Eigen::Index>(k)));
        }
        const double al = osc::sinusoid_amplitude(tl, yl, cmd.omega, t0, t1);
        amp.push_back(a);
        lin_amp.push_back(al);
        cases.push_back({{"i_pct", ip}, {"amplitude", a}, {"linear_amplitude", al}});
        f.tables.emplace_back("i" + std::to_string(static_cast<int>(std::lround(ip * 100))), Table::from_trace(r.trace));
    }
    double dev = 0.0;
    for (std::size_t i = 1; i < lin_amp.size(); ++i) {
        dev = std::max(dev, std::abs(lin_amp[i] / lin_amp[0] / static_cast<double>(i + 1) - 1.0));
    }
    f.summary = {{"scenario", b.s.name},
                 {"channel", out},
                 {"window", {t0, t1}},
                 {"mode", mode_json(b.info)},
                 {"cases", cases},
                 {"monotone", amp[0] < amp[1] && amp[1] < amp[2]},
                 {"linear_relative_deviation", dev}};
    return f;
}

Figure fig15(const Options&) {
    Figure f;
    f.id = "fig15";
    json cases = json::array();
    osc::LawInputs li;
    for (const char* name : {"kundur_base_mma", "kundur_heavy_mma"}) {
        const auto b = build(bundled(name));
        const auto cmd = *scenario::resolve_attack(b.s, b.info);
        const auto [t0, t1] = scenario::steady_window(b.s, cmd);
        const auto r = forced_run(b, cmd, b.s.sim.t_end, gen_channels(b.sys, "Pe"));
        const double a = osc::sinusoid_amplitude(r.trace.time, r.trace.channel(b.s.metric.channel), cmd.omega, t0, t1);
        li.dampings.push_back(b.info.damping_ratio);
        li.damping_amplitudes.push_back(a);
        cases.push_back({{"scenario", name}, {"mode", mode_json(b.info)}, {"amplitude", a}, {"window", {t0, t1}}});
        f.tables.emplace_back(name, Table::from_trace(r.trace));
    }
    const auto laws = osc::law_checks(li);
    f.summary = {{"cases", cases}, {"law2", osc::laws_to_json({laws[1]})[0]}};
    return f;
}

Figure fig16(const Options&) {
    Figure f;
    f.id = "fig16";
    const auto b = build(bundled("kundur_heavy_mma"));
    const auto base_cmd = *scenario::resolve_attack(b.s, b.info);
    const double t_end = 61.0;
    const double t_beat0 = base_cmd.t_start, t_beat1 = base_cmd.t_start + 40.0;
    const double t0 = t_end - 10.0, t1 = t_end;
    const std::string out = b.s.metric.channel;
    const VectorXc mode_shape = speed_shape(b.info, b.sys);

    osc::LawInputs li;
    li.mode_frequency = b.info.frequency;
    json cases = json::array();
    auto channels = gen_channels(b.sys, "Pe");
    for (const auto& c : gen_channels(b.sys, "omega")) channels.push_back(c);
    for (double fa : {0.57, 0.62, 0.65}) {
        auto cmd = base_cmd;
        cmd.omega = kTwoPi * fa;
        cmd.t_stop = t_end;
        const auto r = forced_run(b, cmd, t_end, channels);
        const double a = osc::sinusoid_amplitude(r.trace.time, r.trace.channel(out), cmd.omega, t0, t1);
        VectorXc shape(static_cast<Eigen::Index>(b.sys.gens.size()));
        for (std::size_t g = 0; g < b.sys.gens.size(); ++g) {
            shape[static_cast<Eigen::Index>(g)] =
                phasor(r.trace.time, r.trace.channel(b.sys.gens[g].name + ".omega"), cmd.omega, t0, t1);
        }
        const double corr = modal::mac(shape, mode_shape);
        const double beat = osc::beat_frequency(r.trace.time, r.trace.channel(out), t_beat0, t_beat1, fa);
        li.attack_frequencies.push_back(fa);
        li.frequency_amplitudes.push_back(a);
        li.shape_correlations.push_back(corr);
        li.beat_frequencies.push_back(beat);
        json jshape = json::array();
        for (Eigen::Index g = 0; g < shape.size(); ++g) jshape.push_back({{"abs", std::abs(shape[g])}, {"arg", std::arg(shape[g])}});
        cases.push_back({{"frequency_hz", fa},
                         {"amplitude", a},
                         {"shape_correlation", corr},
                         {"beat_frequency_hz", beat},
                         {"expected_beat_hz", std::abs(fa - b.info.frequency)},
                         {"shape", jshape}});
        char stem[32];
        std::snprintf(stem, sizeof stem, "f%.2f", fa);
        f.tables.emplace_back(stem, Table::from_trace(r.trace));
    }
    const auto laws = osc::law_checks(li);
    json jmode = json::array();
    for (Eigen::Index g = 0; g < mode_shape.size(); ++g) {
        jmode.push_back({{"abs", std::abs(mode_shape[g])}, {"arg", std::arg(mode_shape[g])}});
    }
    f.summary = {{"scenario", b.s.name},
                 {"channel", out},
                 {"steady_window", {t0, t1}},
                 {"beat_window", {t_beat0, t_beat1}},
                 {"mode", mode_json(b.info)},
                 {"mode_shape", jmode},
                 {"cases", cases},
                 {"law3", osc::laws_to_json({laws[2]})[0]},
                 {"law4", osc::laws_to_json({laws[3]})[0]}};
    return f;
}

Figure fig17(const Options& opts) {
    Figure f;
    f.id = "fig17";
    auto s = with_overrides(bundled("kundur_base_mma"),
                            {{"load.sigma", 2.4}, {"load.coupling", "modulated"}, {"sim.dt", 0.002}, {"sim.record_every", 5}});
    const auto b = build(s);
    const auto cmd = *scenario::resolve_attack(b.s, b.info);
    const std::string out = b.s.metric.channel;
    auto c = scenario::make_case(b.s, b.sys, cmd, false);
    const auto mc = osc::monte_carlo_variance(c, b.s.sim, out, opts.mc_trials, opts.seed, opts.exec);

    osc::VarianceOptions vo;
    vo.coupling = attack::Coupling::Modulated;
    const auto k = static_cast<std::size_t>(b.lin.output_index(out));
    const auto pem = osc::variance_pem(b.dec, cmd, b.s.load.sigma, b.s.load.bandwidth_w, mc.time, k, vo);
    const auto total = pem.total();
    vo.all_pairs = true;
    const auto exact = osc::variance_pem(b.dec, cmd, b.s.load.sigma, b.s.load.bandwidth_w, mc.time, k, vo).total();

    const double w0 = 10.0, w1 = b.s.sim.t_end;
    double smc = 0.0, spem = 0.0, se = 0.0, sref = 0.0, sx = 0.0, sxe = 0.0, sxr = 0.0;
    std::vector<double> var_win;
    for (std::size_t i = 0; i < mc.time.size(); ++i) {
        if (mc.time[i] < w0 - 1e-9 || mc.time[i] > w1 + 1e-9) continue;
        smc += mc.variance[i];
        spem += total[i];
        se += (mc.variance[i] - total[i]) * (mc.variance[i] - total[i]);
        sref += total[i] * total[i];
        sx += exact[i];
        sxe += (mc.variance[i] - exact[i]) * (mc.variance[i] - exact[i]);
        sxr += exact[i] * exact[i];
        var_win.push_back(mc.variance[i]);
    }
    const double dt_rec = b.s.sim.dt * b.s.sim.record_every;
    double bin = 0.0;
    const double line = osc::dominant_line(var_win, dt_rec, &bin);

    osc::LawInputs li;
    li.variance = var_win;
    li.variance_dt = dt_rec;
    li.attack_frequency = cmd.omega / kTwoPi;
    const auto laws = osc::law_checks(li);

    Table t;
    t.add("time", mc.time);
    t.add("mc_mean", mc.mean);
    t.add("mc_variance", mc.variance);
    t.add("pem_srs", pem.srs);
    t.add("pem_cqc", pem.cqc);
    t.add("pem_total", total);
    t.add("exact_total", exact);
    f.tables.emplace_back("variance", t);

    // Periodogram of the windowed Monte Carlo variance.
    {
        std::vector<double> v = var_win;
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        for (double& e : v) e -= mean;
        Eigen::FFT<double> fft;
        std::vector<Complex> spec;
        fft.fwd(spec, v);
        std::vector<double> fr, ps;
        for (std::size_t i = 0; i <= v.size() / 2; ++i) {
            fr.push_back(static_cast<double>(i) * bin);
            ps.push_back(std::norm(spec[i]) * dt_rec / static_cast<double>(v.size()));
        }
        Table p;
        p.add("frequency_hz", fr);
        p.add("power", ps);
        f.tables.emplace_back("variance_spectrum", p);
    }

    f.summary = {{"scenario", b.s.name},
                 {"channel", out},
                 {"sigma", b.s.load.sigma},
                 {"trials", mc.n_trials},
                 {"seed", opts.seed},
                 {"attack_frequency_hz", cmd.omega / kTwoPi},
                 {"window", {w0, w1}},
                 {"mc_mean_variance", smc / static_cast<double>(var_win.size())},
                 {"pem_mean_variance", spem / static_cast<double>(var_win.size())},
                 {"exact_mean_variance", sx / static_cast<double>(var_win.size())},
                 {"mean_ratio", smc / spem},
                 {"mean_relative_error", std::abs(smc / spem - 1.0)},
                 {"relative_rms_error", std::sqrt(se / sref)},
                 {"exact_relative_rms_error", std::sqrt(sxe / sxr)},
                 {"pair_count", pem.pairs.size()},
                 {"dominant_line_hz", line},
                 {"bin_hz", bin},
                 {"law5", osc::laws_to_json({laws[4]})[0]}};
    return f;
}

Figure fig18_19(const Options&) {
    const auto heavy = with_overrides(bundled("kundur_heavy_mma_miadrc"), {{"miadrc.enable_time_s", 1.0}});
    auto base = with_overrides(heavy, {{"network.loads", json::array({{{"bus", 9}, {"p", 13.67}}})},
                                       {"network.shunts", json::array()},
                                       {"name", "kundur_base_mma_miadrc"}});
    auto hv = with_overrides(heavy, {{"name", "kundur_heavy_mma_miadrc_early"}});
    return run_report_figure("fig18_19", {base, hv});
}

Figure fig20(const Options&) { return run_report_figure("fig20", {bundled("kundur_heavy_mma_miadrc")}); }

Figure fig21(const Options&) {
    const auto s = bundled("ieee39_mma_miadrc");
    Figure f = run_report_figure("fig21", {s});
    const auto b = build(s);
    const VectorXc u = speed_shape(b.info, b.sys);
    auto at = [&](const std::string& g) { return u[static_cast<Eigen::Index>(b.sys.gen_index(g))]; };
    const Complex a = at("G2") + at("G3"), c = at("G5") + at("G9");
    const bool same_a = (at("G2") * std::conj(at("G3"))).real() > 0.0;
    const bool same_b = (at("G5") * std::conj(at("G9"))).real() > 0.0;
    const bool opposed = (a * std::conj(c)).real() < 0.0;
    f.summary["mode"] = mode_json(b.info);
    f.summary["shape_check"] = {{"g2_g3_coherent", same_a},
                                {"g5_g9_coherent", same_b},
                                {"groups_opposed", opposed},
                                {"opposition_score", scenario::group_opposition(b.info, s.mode.group_a, s.mode.group_b)}};
    // Per-machine suppression over the steady window.
    const auto& rep = f.summary["cases"][0];
    const auto& tc = f.tables[0].second;
    const auto& tu = f.tables[1].second;
    auto column = [](const Table& t, const std::string& n) -> const std::vector<double>& {
        const auto it = std::find(t.names.begin(), t.names.end(), n);
        if (it == t.names.end()) throw InputError("table has no column " + n);
        return t.cols[static_cast<std::size_t>(it - t.names.begin())];
    };
    const double w0 = rep["metrics"]["window"][0], w1 = rep["metrics"]["window"][1];
    json per = json::object();
    for (const auto& g : s.defense.controllers) {
        const auto ch = g.gen + ".Pe";
        const double ac = osc::half_peak_to_peak(column(tc, "time"), column(tc, ch), w0, w1);
        const double au = osc::half_peak_to_peak(column(tu, "time"), column(tu, ch), w0, w1);
        per[g.gen] = {{"controlled", ac}, {"uncontrolled", au}, {"suppression_rate", scenario::suppression_rate(ac, au)}};
    }
    f.summary["per_generator"] = per;
    return f;
}

// ------------------------------------------------------- zero dynamics

json zero_dynamics_grid(const miadrc::MultiIndexCoeffs& c) {
    json out;
    json bad = json::array();
    std::size_t n = 0;
    double worst = 1e300;
    for (double k1 : {0.2, 0.5, 1.0, 1.5}) {
        for (double k2 : {0.2, 0.5, 1.0, 1.5}) {
            for (double k3 : {0.1, 0.3, 0.6, 1.0}) {
                for (double ka : {1.0, 10.0, 50.0, 100.0, 200.0}) {
                    for (double ta : {0.01, 0.02, 0.05}) {
                        for (double td : {5.0, 8.0}) {
                            for (double fw : {0.2, 0.5, 1.0, 1.5, 2.0}) {
                                const double w = kTwoPi * fw;
                                const auto t = miadrc::torque_coefficients(k1, k2, k3, ka, ta, td, w, c);
                                ++n;
                                worst = std::min(worst, t.d_e);
                                if (t.d_e <= 0.0) {
                                    bad.push_back({{"k1", k1}, {"k2", k2}, {"k3", k3}, {"k_a", ka}, {"t_a", ta},
                                                   {"t_d0p", td}, {"f_hz", fw}, {"d_e", t.d_e}});
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out["points"] = n;
    out["violations"] = bad.size();
    out["min_d_e"] = worst;
    out["coefficients"] = {{"c1", c.c1}, {"c2", c.c2}, {"c3", c.c3}};
    out["counterexamples"] = bad;
    return out;
}

}  // namespace mma::exp
