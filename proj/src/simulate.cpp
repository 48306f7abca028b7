#include "mma/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <nlohmann/json.hpp>

namespace mma::sim {

Integrator integrator_from_string(const std::string& s) {
    if (s == "rk4") return Integrator::Rk4;
    if (s == "trapezoidal") return Integrator::Trapezoidal;
    throw InputError("unknown integrator '" + s + "' (rk4, trapezoidal)");
}

std::string to_string(Integrator i) { return i == Integrator::Rk4 ? "rk4" : "trapezoidal"; }

void SimConfig::validate() const {
    if (!(dt > 0.0 && dt <= 0.01)) throw InputError("sim: dt must lie in (0, 0.01]");
    if (!(t_end > 0.0)) throw InputError("sim: t_end must be positive");
    if (record_every < 1) throw InputError("sim: record_every must be >= 1");
}

bool Trace::has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

const std::vector<double>& Trace::channel(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InputError("trace has no channel '" + name + "'");
    return data[static_cast<std::size_t>(it - names.begin())];
}

void Trace::add_channel(const std::string& name, std::vector<double> values) {
    if (values.size() != time.size()) throw InputError("channel '" + name + "' length differs from time axis");
    if (has(name)) throw InputError("duplicate channel '" + name + "'");
    names.push_back(name);
    data.push_back(std::move(values));
}

void Trace::validate() const {
    for (std::size_t i = 1; i < time.size(); ++i) {
        if (!(time[i] > time[i - 1])) throw NumericalError("trace time is not strictly increasing");
    }
    for (std::size_t c = 0; c < data.size(); ++c) {
        if (data[c].size() != time.size()) throw NumericalError("channel '" + names[c] + "' has wrong length");
        for (double v : data[c]) {
            if (!std::isfinite(v)) throw NumericalError("channel '" + names[c] + "' contains a non-finite value");
        }
    }
}

void Trace::write_csv(std::ostream& os) const {
    os << "time";
    for (const auto& n : names) os << ',' << n;
    os << '\n';
    os << std::setprecision(12);
    for (std::size_t i = 0; i < time.size(); ++i) {
        os << time[i];
        for (const auto& d : data) os << ',' << d[i];
        os << '\n';
    }
}

void Trace::write_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write " + path);
    write_csv(f);
}

nlohmann::json Trace::to_json() const {
    nlohmann::json j;
    j["time"] = time;
    auto& ch = j["channels"] = nlohmann::json::object();
    for (std::size_t c = 0; c < names.size(); ++c) ch[names[c]] = data[c];
    return j;
}

namespace {

const char* const kGenSignals[] = {"delta", "omega", "Eqp", "Efd", "Pe", "ut", "Id", "Iq", "ue"};
const char* const kCtrlSignals[] = {"y", "v1", "v2", "chi1", "chi2", "chi3"};
const char* const kPileSignals[] = {"Pref", "Pe", "Qe", "V", "theta", "id", "iq", "xpll"};

struct Controller {
    std::size_t gen = 0;
    ControllerConfig cfg;
    miadrc::Equilibrium eq;
    miadrc::MiadrcState state;
    long ratio = 1;
    double y = 0.0;
};

// Values of every channel at one instant, in available_channels order.
struct Recorder {
    std::vector<std::string> all;
    std::vector<std::size_t> selected;  // indices into `all`
    std::vector<double> scratch;
};

class Stepper {
public:
    Stepper(const dyn::PowerSystem& sys, Integrator kind) : sys_(sys), kind_(kind) {}

    void f(const VectorXd& x, double p_ref, const std::vector<double>& ue, VectorXd& dx) const {
        dx.resize(x.size());
        dyn::system_derivatives(sys_, {x.data(), static_cast<std::size_t>(x.size())}, p_ref, ue,
                                {dx.data(), static_cast<std::size_t>(dx.size())});
    }

    template <class Pref>
    void step(VectorXd& x, double t, double dt, const Pref& pref, const std::vector<double>& ue) {
        if (kind_ == Integrator::Rk4) {
            f(x, pref(t), ue, k1_);
            f(x + 0.5 * dt * k1_, pref(t + 0.5 * dt), ue, k2_);
            f(x + 0.5 * dt * k2_, pref(t + 0.5 * dt), ue, k3_);
            f(x + dt * k3_, pref(t + dt), ue, k4_);
            x += dt / 6.0 * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
            return;
        }
        trapezoidal(x, t, dt, pref, ue);
    }

private:
    template <class Pref>
    void trapezoidal(VectorXd& x, double t, double dt, const Pref& pref, const std::vector<double>& ue) {
        const double p1 = pref(t + dt);
        f(x, pref(t), ue, k1_);
        VectorXd z = x + dt * k1_;
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (!have_lu_ || lu_dt_ != dt || attempt > 0) factor(z, p1, ue, dt);
            for (int it = 0; it < 30; ++it) {
                f(z, p1, ue, k2_);
                const VectorXd g = z - x - 0.5 * dt * (k1_ + k2_);
                const VectorXd dz = lu_.solve(g);
                z -= dz;
                if (dz.lpNorm<Eigen::Infinity>() < 1e-11 * (1.0 + z.lpNorm<Eigen::Infinity>())) {
                    x = z;
                    return;
                }
            }
        }
        throw DivergenceError("trapezoidal corrector failed to converge", t + dt);
    }

    void factor(const VectorXd& z, double p, const std::vector<double>& ue, double dt) {
        const auto n = z.size();
        MatrixXd j(n, n);
        VectorXd zp = z, fp, fm;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double h = 1e-7 * (1.0 + std::abs(z[k]));
            zp[k] = z[k] + h;
            f(zp, p, ue, fp);
            zp[k] = z[k] - h;
            f(zp, p, ue, fm);
            zp[k] = z[k];
            j.col(k) = (fp - fm) / (2.0 * h);
        }
        lu_.compute(MatrixXd::Identity(n, n) - 0.5 * dt * j);
        have_lu_ = true;
        lu_dt_ = dt;
    }

    const dyn::PowerSystem& sys_;
    Integrator kind_;
    VectorXd k1_, k2_, k3_, k4_;
    Eigen::PartialPivLU<MatrixXd> lu_;
    bool have_lu_ = false;
    double lu_dt_ = 0.0;
};

}  // namespace

std::vector<std::string> available_channels(const SimCase& c) {
    if (!c.system) throw InputError("simulation case has no system");
    std::vector<std::string> out;
    for (const auto& g : c.system->gens) {
        for (const char* s : kGenSignals) out.push_back(g.name + "." + s);
    }
    for (const auto& cc : c.defense.controllers) {
        for (const char* s : kCtrlSignals) out.push_back(cc.gen + "." + s);
    }
    if (c.system->pile) {
        for (const char* s : kPileSignals) out.push_back(std::string("pile.") + s);
    }
    return out;
}

std::vector<std::string> default_channels(const SimCase& c) {
    std::vector<std::string> out;
    for (const auto& g : c.system->gens) {
        for (const char* s : {"Pe", "omega", "ut"}) out.push_back(g.name + "." + s);
    }
    for (const auto& cc : c.defense.controllers) out.push_back(cc.gen + ".ue");
    if (c.system->pile) {
        out.emplace_back("pile.Pref");
        out.emplace_back("pile.Pe");
    }
    return out;
}

Trace simulate(const SimCase& c, const SimConfig& cfg) {
    if (!c.system) throw InputError("simulation case has no system");
    const auto& sys = *c.system;
    cfg.validate();
    if (c.attack) c.attack->validate();
    c.load.validate();

    const long n_steps = std::lround(cfg.t_end / cfg.dt);
    if (std::abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * cfg.t_end) {
        throw InputError("sim: dt must divide t_end");
    }
    const std::size_t ng = sys.gens.size();

    // Base-load samples on the step grid (held over each step).
    std::vector<double> base;
    if (sys.pile && c.load.sigma > 0.0) {
        std::vector<double> grid(static_cast<std::size_t>(n_steps) + 1);
        for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = static_cast<double>(k) * cfg.dt;
        base = attack::sample_base_load(c.load, grid);
    }
    const double mean = c.load.mean;
    auto base_at = [&](long k) { return base.empty() ? mean : base[static_cast<std::size_t>(k)]; };

    // Controllers.
    VectorXd x = sys.x0;
    const auto sol0 = dyn::network_interface(sys, {x.data(), static_cast<std::size_t>(x.size())});
    std::vector<Controller> ctrls;
    for (const auto& cc : c.defense.controllers) {
        cc.coeffs.validate();
        Controller k;
        k.gen = sys.gen_index(cc.gen);
        k.cfg = cc;
        if (cc.auto_b) k.cfg.gains.b = miadrc::compute_b(sys, k.gen, sys.x0, cc.coeffs);
        k.cfg.gains.validate();
        k.eq = {sol0.gens[k.gen].u_t, sys.gens[k.gen].omega0, sol0.gens[k.gen].p_e};
        const double r = cc.gains.h / cfg.dt;
        k.ratio = std::lround(r);
        if (k.ratio < 1 || std::abs(r - static_cast<double>(k.ratio)) > 1e-9 * r) {
            throw InputError("sim: dt must divide the controller period of " + cc.gen);
        }
        ctrls.push_back(k);
    }
    std::vector<double> ue(ng, 0.0);

    std::optional<miadrc::DetectionGate> gate;
    std::size_t gate_gen = 0;
    long gate_every = 1;
    std::vector<double> gate_buf;
    if (!ctrls.empty() && c.defense.auto_detect) {
        c.defense.gate.validate();
        gate.emplace(c.defense.gate);
        std::string ch = c.defense.gate_channel.empty() ? ctrls.front().cfg.gen + ".Pe" : c.defense.gate_channel;
        const auto dot = ch.rfind(".Pe");
        if (dot == std::string::npos || dot + 3 != ch.size()) throw InputError("gate channel must be '<gen>.Pe'");
        gate_gen = sys.gen_index(ch.substr(0, dot));
        gate_every = std::max(1L, std::lround(c.defense.gate.period / cfg.dt));
    }

    // Channel selection.
    Recorder rec;
    rec.all = available_channels(c);
    std::vector<std::string> wanted = cfg.record_signals.empty() ? default_channels(c) : cfg.record_signals;
    if (wanted.size() == 1 && wanted[0] == "*") wanted = rec.all;
    for (const auto& w : wanted) {
        const auto it = std::find(rec.all.begin(), rec.all.end(), w);
        if (it == rec.all.end()) throw InputError("unknown signal '" + w + "'");
        rec.selected.push_back(static_cast<std::size_t>(it - rec.all.begin()));
    }
    rec.scratch.resize(rec.all.size());

    Trace trace;
    trace.names = wanted;
    trace.data.resize(wanted.size());
    const std::size_t n_rec = static_cast<std::size_t>(n_steps / cfg.record_every) + 2;
    trace.time.reserve(n_rec);
    for (auto& d : trace.data) d.reserve(n_rec);

    auto pref_at = [&](double t, long k) {
        if (!c.attack) return base_at(k);
        return attack::command_with_load(t, base_at(k), *c.attack, c.load);
    };

    auto record = [&](double t, long k, const dyn::NetworkSolution& sol) {
        std::size_t m = 0;
        auto& v = rec.scratch;
        for (std::size_t i = 0; i < ng; ++i) {
            const auto g = dyn::gen_state({x.data(), static_cast<std::size_t>(x.size())}, i);
            const auto& a = sol.gens[i];
            v[m++] = g.delta;
            v[m++] = g.omega / sys.gens[i].omega0;
            v[m++] = g.e_qp;
            v[m++] = g.e_f;
            v[m++] = a.p_e;
            v[m++] = a.u_t;
            v[m++] = a.i_d;
            v[m++] = a.i_q;
            v[m++] = ue[i];
        }
        for (const auto& k2 : ctrls) {
            v[m++] = k2.y;
            v[m++] = k2.state.v1;
            v[m++] = k2.state.v2;
            v[m++] = k2.state.chi1;
            v[m++] = k2.state.chi2;
            v[m++] = k2.state.chi3;
        }
        if (sys.pile) {
            const auto ps = dyn::pile_state({x.data(), static_cast<std::size_t>(x.size())}, sys.pile_offset());
            const double s = sys.pile->params.s_rated;
            v[m++] = pref_at(t, k);
            v[m++] = s * sol.pile.p_e;
            v[m++] = s * sol.pile.q_e;
            v[m++] = std::abs(sol.v_pile);
            v[m++] = ps.theta_pll;
            v[m++] = ps.i_d;
            v[m++] = ps.i_q;
            v[m++] = ps.x_pll;
        }
        trace.time.push_back(t);
        for (std::size_t j = 0; j < rec.selected.size(); ++j) trace.data[j].push_back(v[rec.selected[j]]);
    };

    Stepper stepper(sys, cfg.integrator);
    bool engaged = false;
    for (long k = 0; k <= n_steps; ++k) {
        const double t = static_cast<double>(k) * cfg.dt;
        if (!x.allFinite()) throw DivergenceError("state became non-finite", t);
        const auto sol = dyn::network_interface(sys, {x.data(), static_cast<std::size_t>(x.size())});

        if (gate) {
            gate_buf.push_back(sol.gens[gate_gen].p_e);
            const auto need = static_cast<std::size_t>(std::lround(c.defense.gate.window / cfg.dt));
            if (k > 0 && k % gate_every == 0 && gate_buf.size() >= need) {
                const bool on = gate->update({gate_buf.data() + gate_buf.size() - need, need}, cfg.dt);
                if (on && !engaged) {
                    engaged = true;
                    for (auto& ct : ctrls) miadrc::engage(ct.state, ct.y);
                } else if (!on && engaged) {
                    engaged = false;
                    for (auto& ct : ctrls) miadrc::disengage(ct.state);
                }
            }
        } else if (!ctrls.empty()) {
            const bool on = t + 1e-12 >= c.defense.enable_time && t + 1e-12 < c.defense.disable_time;
            if (on != engaged) {
                engaged = on;
                for (auto& ct : ctrls) {
                    const auto g = dyn::gen_state({x.data(), static_cast<std::size_t>(x.size())}, ct.gen);
                    ct.y = miadrc::multi_index_output(g, sol.gens[ct.gen], ct.eq, ct.cfg.coeffs);
                    if (on) miadrc::engage(ct.state, ct.y);
                    else miadrc::disengage(ct.state);
                }
            }
        }
        for (auto& ct : ctrls) {
            if (k % ct.ratio != 0) continue;
            const auto g = dyn::gen_state({x.data(), static_cast<std::size_t>(x.size())}, ct.gen);
            ct.y = miadrc::multi_index_output(g, sol.gens[ct.gen], ct.eq, ct.cfg.coeffs);
            ue[ct.gen] = miadrc::controller_step(ct.state, ct.cfg.gains, ct.y);
        }

        if (k % cfg.record_every == 0 || k == n_steps) record(t, k, sol);
        if (k == n_steps) break;

        auto pref = [&](double tt) { return pref_at(tt, k); };
        stepper.step(x, t, cfg.dt, pref, ue);
    }
    if (!x.allFinite()) throw DivergenceError("state became non-finite", cfg.t_end);
    return trace;
}

}  // namespace mma::sim
