#include "mma/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "mma/builtin.hpp"
#include "mma/oscillation.hpp"

#ifndef MMA_DATA_DIR
#define MMA_DATA_DIR "data"
#endif

namespace mma::scenario {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Keys whose value is an open map (names chosen by the user) or free-form data.
bool open_key(const std::string& path) {
    return path == "machines.set" || path == "miadrc.per_generator" || path == "network.inline" ||
           path == "machines.inline";
}

std::string join(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

void merge_checked(json& dst, const json& src, const std::string& path) {
    if (!src.is_object()) throw InputError("scenario: '" + (path.empty() ? "<root>" : path) + "' must be an object");
    for (const auto& [k, v] : src.items()) {
        const std::string p = join(path, k);
        if (!dst.contains(k)) throw InputError("scenario: unknown key '" + p + "'");
        json& d = dst[k];
        if (d.is_object() && !open_key(p)) {
            merge_checked(d, v, p);
        } else {
            d = v;
        }
    }
}

template <class T>
T get(const json& j, const char* key, const std::string& path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw InputError("scenario: '" + join(path, key) + "' has the wrong type");
    }
}

double num(const json& j, const char* key, const std::string& path) { return get<double>(j, key, path); }

void check_keys(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
    if (!j.is_object()) throw InputError("scenario: '" + path + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
            throw InputError("scenario: unknown key '" + join(path, k) + "'");
        }
    }
}

void set_machine_fields(dyn::GeneratorParams& g, const json& j, const std::string& path) {
    check_keys(j, {"name", "bus", "t_j", "d", "t_d0p", "x_d", "x_dp", "x_q", "k_a", "t_a", "omega0"}, path);
    if (j.contains("name")) g.name = get<std::string>(j, "name", path);
    if (j.contains("bus")) g.bus = get<int>(j, "bus", path);
    auto set = [&](const char* k, double& v) {
        if (j.contains(k)) v = num(j, k, path);
    };
    set("t_j", g.t_j);
    set("d", g.d);
    set("t_d0p", g.t_d0p);
    set("x_d", g.x_d);
    set("x_dp", g.x_dp);
    set("x_q", g.x_q);
    set("k_a", g.k_a);
    set("t_a", g.t_a);
    set("omega0", g.omega0);
}

json pile_params_json(const dyn::PileParams& p) {
    return {{"kp1", p.kp1}, {"ki1", p.ki1}, {"kp2", p.kp2}, {"ki2", p.ki2}, {"kp3", p.kp3},    {"ki3", p.ki3},
            {"tau1", p.tau1}, {"tau2", p.tau2}, {"q_ref", p.q_ref}, {"x_filter", p.x_filter}};
}

dyn::PileParams pile_params_from(const json& j, const std::string& path) {
    dyn::PileParams p;
    p.kp1 = num(j, "kp1", path);
    p.ki1 = num(j, "ki1", path);
    p.kp2 = num(j, "kp2", path);
    p.ki2 = num(j, "ki2", path);
    p.kp3 = num(j, "kp3", path);
    p.ki3 = num(j, "ki3", path);
    p.tau1 = num(j, "tau1", path);
    p.tau2 = num(j, "tau2", path);
    p.q_ref = num(j, "q_ref", path);
    p.x_filter = num(j, "x_filter", path);
    return p;
}

json gains_json(const miadrc::MiadrcGains& g) {
    return {{"h", g.h},         {"c", g.c},         {"r0", g.r0},       {"r_ref", g.r_ref},
            {"w_c", g.w_c},     {"beta1", nullptr}, {"beta2", nullptr}, {"beta3", nullptr},
            {"b", g.b},         {"eso_substeps", g.eso_substeps}};
}

json gate_json(const miadrc::GateConfig& g) {
    return {{"window", g.window},   {"period", g.period}, {"zeta_max", g.zeta_max},
            {"min_amplitude", g.min_amplitude}, {"f_lo", g.f_lo}, {"f_hi", g.f_hi},
            {"sample_dt", g.sample_dt}, {"order", g.order}, {"confirm", g.confirm}, {"release", g.release}};
}

void apply_gains(sim::ControllerConfig& c, const json& j, const std::string& path) {
    check_keys(j, {"h", "c", "r0", "r_ref", "w_c", "beta1", "beta2", "beta3", "b", "eso_substeps"}, path);
    auto& g = c.gains;
    if (j.contains("h")) g.h = num(j, "h", path);
    if (j.contains("c")) g.c = num(j, "c", path);
    if (j.contains("r0")) g.r0 = num(j, "r0", path);
    if (j.contains("r_ref")) g.r_ref = num(j, "r_ref", path);
    if (j.contains("w_c")) g.set_bandwidth(num(j, "w_c", path));
    if (j.contains("beta1") && !j["beta1"].is_null()) g.beta1 = num(j, "beta1", path);
    if (j.contains("beta2") && !j["beta2"].is_null()) g.beta2 = num(j, "beta2", path);
    if (j.contains("beta3") && !j["beta3"].is_null()) g.beta3 = num(j, "beta3", path);
    if (j.contains("eso_substeps")) g.eso_substeps = get<int>(j, "eso_substeps", path);
    if (j.contains("b")) {
        if (j["b"].is_string()) {
            if (j["b"].get<std::string>() != "auto") throw InputError("scenario: '" + path + ".b' must be a number or \"auto\"");
            c.auto_b = true;
        } else {
            g.b = num(j, "b", path);
            c.auto_b = false;
        }
    }
}

void apply_coeffs(sim::ControllerConfig& c, const json& j, const std::string& path) {
    check_keys(j, {"c1", "c2", "c3"}, path);
    if (j.contains("c1")) c.coeffs.c1 = num(j, "c1", path);
    if (j.contains("c2")) c.coeffs.c2 = num(j, "c2", path);
    if (j.contains("c3")) c.coeffs.c3 = num(j, "c3", path);
}

attack::Coupling coupling_from(const std::string& s) {
    if (s == "full") return attack::Coupling::Full;
    if (s == "modulated") return attack::Coupling::Modulated;
    throw InputError("scenario: load.coupling must be \"full\" or \"modulated\"");
}

}  // namespace

json default_document() {
    const dyn::PileParams pile;
    const miadrc::MultiIndexCoeffs co;
    const miadrc::MiadrcGains ga;
    const miadrc::GateConfig gate;
    const sim::SimConfig sc;
    return {
        {"schema", kScenarioSchema},
        {"name", ""},
        {"description", ""},
        {"network",
         {{"builtin", ""},
          {"inline", nullptr},
          {"loads", json::array()},
          {"shunts", json::array()},
          {"dispatch", {{"mode", "fixed"}, {"reference_total", 0.0}}}}},
        {"machines", {{"builtin", ""}, {"inline", nullptr}, {"set", json::object()}}},
        {"pile", {{"enabled", false}, {"bus", 0}, {"base_load", 0.0}, {"rating", nullptr}, {"params", pile_params_json(pile)}}},
        {"mode",
         {{"f_lo", 0.1}, {"f_hi", 2.0}, {"select", "least_damped"}, {"state", ""}, {"group_a", json::array()},
          {"group_b", json::array()}}},
        {"attack",
         {{"enabled", false}, {"i_pct", 0.3}, {"frequency_hz", "mode"}, {"phi", 0.0}, {"t_start", 1.0}, {"t_stop", 20.0}}},
        {"load", {{"sigma", 0.0}, {"bandwidth_hz", 5.0}, {"coupling", "full"}}},
        {"miadrc",
         {{"enabled", false},
          {"auto_detect", false},
          {"enable_time_s", 5.0},
          {"disable_time_s", nullptr},
          {"generators", json::array()},
          {"coeffs", {{"c1", co.c1}, {"c2", co.c2}, {"c3", co.c3}}},
          {"gains", gains_json(ga)},
          {"per_generator", json::object()},
          {"gate", gate_json(gate)},
          {"gate_channel", ""}}},
        {"sim", {{"dt", sc.dt}, {"t_end", sc.t_end}, {"integrator", "rk4"}, {"record_every", 10}}},
        {"outputs", json::array()},
        {"metrics", {{"channel", ""}, {"window", nullptr}}},
        {"seed", 1},
    };
}

Scenario parse_scenario(const json& user) {
    if (!user.is_object()) throw InputError("scenario: document must be a JSON object");
    if (!user.contains("schema")) throw InputError("scenario: missing 'schema'");
    if (user["schema"] != kScenarioSchema) {
        throw InputError("scenario: unsupported schema '" + user["schema"].dump() + "', expected \"" +
                         kScenarioSchema + "\"");
    }
    json doc = default_document();
    merge_checked(doc, user, "");

    Scenario s;
    s.document = doc;
    s.name = get<std::string>(doc, "name", "");
    s.description = get<std::string>(doc, "description", "");

    // Network.
    const json& jn = doc["network"];
    const auto builtin = get<std::string>(jn, "builtin", "network");
    if (!jn["inline"].is_null()) {
        s.network = net::network_from_json(jn["inline"]);
    } else if (!builtin.empty()) {
        s.network = data::builtin_network(builtin);
    } else {
        throw InputError("scenario: 'network' needs 'builtin' or 'inline'");
    }
    for (std::size_t i = 0; i < jn["loads"].size(); ++i) {
        const json& l = jn["loads"][i];
        const std::string p = "network.loads[" + std::to_string(i) + "]";
        check_keys(l, {"bus", "p", "q"}, p);
        const int bus = get<int>(l, "bus", p);
        if (!s.network.has_bus(bus)) throw InputError("scenario: '" + p + ".bus' refers to missing bus " + std::to_string(bus));
        auto it = std::find_if(s.network.loads.begin(), s.network.loads.end(), [&](const net::Load& x) { return x.bus == bus; });
        if (it == s.network.loads.end()) {
            s.network.loads.push_back({bus, 0.0, 0.0});
            it = s.network.loads.end() - 1;
        }
        if (l.contains("p")) it->p = num(l, "p", p);
        if (l.contains("q")) it->q = num(l, "q", p);
    }
    for (std::size_t i = 0; i < jn["shunts"].size(); ++i) {
        const json& sh = jn["shunts"][i];
        const std::string p = "network.shunts[" + std::to_string(i) + "]";
        check_keys(sh, {"bus", "g", "b"}, p);
        const int bus = get<int>(sh, "bus", p);
        if (!s.network.has_bus(bus)) throw InputError("scenario: '" + p + ".bus' refers to missing bus " + std::to_string(bus));
        for (auto& b : s.network.buses) {
            if (b.id == bus) b.shunt = Complex(sh.value("g", 0.0), sh.value("b", 0.0));
        }
    }

    // Machines.
    const json& jm = doc["machines"];
    if (!jm["inline"].is_null()) {
        if (!jm["inline"].is_array()) throw InputError("scenario: 'machines.inline' must be an array");
        for (std::size_t i = 0; i < jm["inline"].size(); ++i) {
            dyn::GeneratorParams g;
            set_machine_fields(g, jm["inline"][i], "machines.inline[" + std::to_string(i) + "]");
            s.machines.push_back(g);
        }
    } else {
        auto mb = get<std::string>(jm, "builtin", "machines");
        if (mb.empty()) mb = builtin;
        if (mb.empty()) throw InputError("scenario: 'machines' needs 'builtin' or 'inline'");
        s.machines = data::builtin_machines(mb);
    }
    if (!jm["set"].is_object()) throw InputError("scenario: 'machines.set' must be an object");
    for (const auto& [name, fields] : jm["set"].items()) {
        bool hit = false;
        for (auto& g : s.machines) {
            if (name == "*" || g.name == name) {
                set_machine_fields(g, fields, "machines.set." + name);
                hit = true;
            }
        }
        if (!hit) throw InputError("scenario: 'machines.set." + name + "' names no machine");
    }
    for (const auto& g : s.machines) {
        if (!s.network.has_bus(g.bus)) throw InputError("scenario: machine " + g.name + " sits on a missing bus");
    }

    // Pile.
    const json& jp = doc["pile"];
    check_keys(jp, {"enabled", "bus", "base_load", "rating", "params"}, "pile");
    if (get<bool>(jp, "enabled", "pile")) {
        dyn::PileSpec ps;
        ps.bus = get<int>(jp, "bus", "pile");
        if (!s.network.has_bus(ps.bus)) throw InputError("scenario: 'pile.bus' refers to missing bus " + std::to_string(ps.bus));
        ps.base_p = num(jp, "base_load", "pile");
        check_keys(jp["params"], {"kp1", "ki1", "kp2", "ki2", "kp3", "ki3", "tau1", "tau2", "q_ref", "x_filter"},
                   "pile.params");
        ps.params = pile_params_from(jp["params"], "pile.params");
        ps.params.s_rated = jp["rating"].is_null() ? ps.base_p : num(jp, "rating", "pile");
        ps.params.validate();
        s.pile = ps;
    }

    // Dispatch: scale non-slack generation to the total demand.
    const json& jd = jn["dispatch"];
    check_keys(jd, {"mode", "reference_total"}, "network.dispatch");
    const auto dmode = get<std::string>(jd, "mode", "network.dispatch");
    if (dmode == "proportional") {
        const double ref = num(jd, "reference_total", "network.dispatch");
        if (!(ref > 0.0)) throw InputError("scenario: 'network.dispatch.reference_total' must be positive");
        double total = s.pile ? s.pile->base_p : 0.0;
        for (const auto& l : s.network.loads) total += l.p;
        for (auto& b : s.network.buses) {
            if (b.kind == net::BusKind::PV) b.p_inj *= total / ref;
        }
    } else if (dmode != "fixed") {
        throw InputError("scenario: 'network.dispatch.mode' must be \"fixed\" or \"proportional\"");
    }
    net::validate(s.network);

    // Mode target.
    const json& jt = doc["mode"];
    s.mode.f_lo = num(jt, "f_lo", "mode");
    s.mode.f_hi = num(jt, "f_hi", "mode");
    s.mode.select = get<std::string>(jt, "select", "mode");
    s.mode.state = get<std::string>(jt, "state", "mode");
    s.mode.group_a = get<std::vector<std::string>>(jt, "group_a", "mode");
    s.mode.group_b = get<std::vector<std::string>>(jt, "group_b", "mode");
    if (!(s.mode.f_lo >= 0.0 && s.mode.f_hi > s.mode.f_lo)) throw InputError("scenario: 'mode' band is empty");
    if (s.mode.select != "least_damped" && s.mode.select != "dominant" && s.mode.select != "groups") {
        throw InputError("scenario: 'mode.select' must be least_damped, dominant or groups");
    }
    if (s.mode.select == "dominant" && s.mode.state.empty()) throw InputError("scenario: 'mode.state' is required");
    if (s.mode.select == "groups" && (s.mode.group_a.empty() || s.mode.group_b.empty())) {
        throw InputError("scenario: 'mode.group_a' and 'mode.group_b' are required");
    }

    // Simulation.
    const json& js = doc["sim"];
    check_keys(js, {"dt", "t_end", "integrator", "record_every"}, "sim");
    s.sim.dt = num(js, "dt", "sim");
    s.sim.t_end = num(js, "t_end", "sim");
    s.sim.integrator = sim::integrator_from_string(get<std::string>(js, "integrator", "sim"));
    s.sim.record_every = get<int>(js, "record_every", "sim");
    s.sim.record_signals = get<std::vector<std::string>>(doc, "outputs", "");
    s.sim.validate();

    // Attack and load.
    const json& ja = doc["attack"];
    check_keys(ja, {"enabled", "i_pct", "frequency_hz", "phi", "t_start", "t_stop"}, "attack");
    if (get<bool>(ja, "enabled", "attack")) {
        AttackSpec a;
        a.command.i_pct = num(ja, "i_pct", "attack");
        a.command.phi = num(ja, "phi", "attack");
        a.command.t_start = num(ja, "t_start", "attack");
        a.command.t_stop = num(ja, "t_stop", "attack");
        if (ja["frequency_hz"].is_string()) {
            if (ja["frequency_hz"] != "mode") throw InputError("scenario: 'attack.frequency_hz' must be a number or \"mode\"");
            a.tune_to_mode = true;
        } else {
            a.tune_to_mode = false;
            a.command.omega = kTwoPi * num(ja, "frequency_hz", "attack");
        }
        a.command.validate();
        if (a.command.t_start < 0.0 || a.command.t_start >= s.sim.t_end) {
            throw InputError("scenario: attack window must start inside [0, t_end)");
        }
        if (!s.pile) throw InputError("scenario: an attack needs a pile");
        s.attack = a;
    }
    const json& jl = doc["load"];
    check_keys(jl, {"sigma", "bandwidth_hz", "coupling"}, "load");
    s.load.mean = s.pile ? s.pile->base_p : 0.0;
    s.load.sigma = num(jl, "sigma", "load");
    s.load.bandwidth_w = kTwoPi * num(jl, "bandwidth_hz", "load");
    s.load.coupling = coupling_from(get<std::string>(jl, "coupling", "load"));
    s.seed = get<std::uint64_t>(doc, "seed", "");
    s.load.seed = s.seed;
    s.load.validate();

    // Defence.
    const json& jc = doc["miadrc"];
    if (get<bool>(jc, "enabled", "miadrc")) {
        const auto gens = get<std::vector<std::string>>(jc, "generators", "miadrc");
        if (gens.empty()) throw InputError("scenario: 'miadrc.generators' is empty");
        for (const auto& name : gens) {
            if (std::none_of(s.machines.begin(), s.machines.end(), [&](const auto& g) { return g.name == name; })) {
                throw InputError("scenario: 'miadrc.generators' names unknown machine " + name);
            }
            sim::ControllerConfig c;
            c.gen = name;
            apply_coeffs(c, jc["coeffs"], "miadrc.coeffs");
            apply_gains(c, jc["gains"], "miadrc.gains");
            if (jc["per_generator"].contains(name)) {
                const json& pg = jc["per_generator"][name];
                const std::string p = "miadrc.per_generator." + name;
                check_keys(pg, {"coeffs", "gains"}, p);
                if (pg.contains("coeffs")) apply_coeffs(c, pg["coeffs"], p + ".coeffs");
                if (pg.contains("gains")) apply_gains(c, pg["gains"], p + ".gains");
            }
            c.coeffs.validate();
            if (!c.auto_b) c.gains.validate();
            s.defense.controllers.push_back(c);
        }
        for (const auto& [name, v] : jc["per_generator"].items()) {
            if (std::find(gens.begin(), gens.end(), name) == gens.end()) {
                throw InputError("scenario: 'miadrc.per_generator." + name + "' is not a controlled machine");
            }
        }
        s.defense.auto_detect = get<bool>(jc, "auto_detect", "miadrc");
        s.defense.enable_time = num(jc, "enable_time_s", "miadrc");
        if (!jc["disable_time_s"].is_null()) s.defense.disable_time = num(jc, "disable_time_s", "miadrc");
        const json& jg = jc["gate"];
        check_keys(jg, {"window", "period", "zeta_max", "min_amplitude", "f_lo", "f_hi", "sample_dt", "order", "confirm",
                        "release"},
                   "miadrc.gate");
        auto& g = s.defense.gate;
        g.window = num(jg, "window", "miadrc.gate");
        g.period = num(jg, "period", "miadrc.gate");
        g.zeta_max = num(jg, "zeta_max", "miadrc.gate");
        g.min_amplitude = num(jg, "min_amplitude", "miadrc.gate");
        g.f_lo = num(jg, "f_lo", "miadrc.gate");
        g.f_hi = num(jg, "f_hi", "miadrc.gate");
        g.sample_dt = num(jg, "sample_dt", "miadrc.gate");
        g.order = get<int>(jg, "order", "miadrc.gate");
        g.confirm = get<int>(jg, "confirm", "miadrc.gate");
        g.release = get<int>(jg, "release", "miadrc.gate");
        g.validate();
        s.defense.gate_channel = get<std::string>(jc, "gate_channel", "miadrc");
    }

    // Metrics.
    const json& jx = doc["metrics"];
    check_keys(jx, {"channel", "window"}, "metrics");
    s.metric.channel = get<std::string>(jx, "channel", "metrics");
    if (s.metric.channel.empty()) {
        s.metric.channel = (s.defense.active() ? s.defense.controllers.front().gen : s.machines.front().name) + ".Pe";
    }
    if (!jx["window"].is_null()) {
        const auto w = get<std::vector<double>>(jx, "window", "metrics");
        if (w.size() != 2 || !(w[1] > w[0])) throw InputError("scenario: 'metrics.window' must be [t0, t1] with t1 > t0");
        s.metric.t0 = w[0];
        s.metric.t1 = w[1];
        s.metric.window_set = true;
    }
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot open scenario '" + path + "'");
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        throw InputError("scenario '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scenario(doc);
}

void apply_override(json& doc, const std::string& path, const std::string& value) {
    if (path.empty()) throw InputError("override path is empty");
    json v;
    try {
        v = json::parse(value);
    } catch (const json::parse_error&) {
        v = value;
    }
    json* cur = &doc;
    std::size_t pos = 0;
    while (pos <= path.size()) {
        const auto dot = path.find('.', pos);
        std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw InputError("override path '" + path + "' has an empty component");
        std::optional<std::size_t> index;
        if (const auto br = key.find('['); br != std::string::npos) {
            if (key.back() != ']') throw InputError("override path '" + path + "' has a malformed index");
            index = std::stoul(key.substr(br + 1, key.size() - br - 2));
            key = key.substr(0, br);
        }
        json& obj = *cur;
        if (obj.is_null()) obj = json::object();
        if (!obj.is_object()) throw InputError("override path '" + path + "' passes through a non-object");
        json* next = &obj[key];
        if (index) {
            if (!next->is_array() || *index >= next->size()) {
                throw InputError("override path '" + path + "' indexes past the end of '" + key + "'");
            }
            next = &(*next)[*index];
        }
        cur = next;
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    *cur = v;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw InputError("override '" + assignment + "' must have the form path=value");
    apply_override(doc, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string json_hash(const json& j) {
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

dyn::PowerSystem build_system(const Scenario& s) {
    auto sys = dyn::assemble(s.network, s.machines, s.pile);
    sys.name = s.name;
    return sys;
}

double group_opposition(const modal::ModeInfo& m, const std::vector<std::string>& a, const std::vector<std::string>& b) {
    auto entry = [&](const std::string& gen) -> Complex {
        const std::string label = gen + ".omega";
        for (std::size_t k = 0; k < m.shape_labels.size(); ++k) {
            if (m.shape_labels[k] == label) return m.shape[static_cast<Eigen::Index>(k)];
        }
        throw InputError("mode shape has no entry for " + gen);
    };
    Complex sa{0.0, 0.0}, sb{0.0, 0.0};
    for (const auto& g : a) sa += entry(g);
    for (const auto& g : b) sb += entry(g);
    const double total = m.shape.cwiseAbs().sum();
    return total > 0.0 ? std::abs(sa - sb) / total : 0.0;
}

std::size_t select_mode(const modal::ModalDecomposition& dec, const ModeTarget& t) {
    if (t.select == "least_damped") return modal::least_damped_mode(dec, t.f_lo, t.f_hi);
    if (t.select == "dominant") return modal::dominant_mode_of(dec, t.state, t.f_lo, t.f_hi);
    const auto modes = modal::oscillatory_modes(dec, t.f_lo, t.f_hi);
    if (modes.empty()) throw NumericalError("no oscillatory mode inside the target band");
    std::size_t best = modes.front();
    double score = -1.0;
    for (auto i : modes) {
        const double v = group_opposition(modal::mode_info(dec, i), t.group_a, t.group_b);
        if (v > score) {
            score = v;
            best = i;
        }
    }
    return best;
}

std::optional<attack::MmaCommand> resolve_attack(const Scenario& s, const modal::ModeInfo& mode) {
    if (!s.attack) return std::nullopt;
    auto cmd = s.attack->command;
    if (s.attack->tune_to_mode) cmd.omega = std::abs(mode.eigenvalue.imag());
    return cmd;
}

sim::SimCase make_case(const Scenario& s, const dyn::PowerSystem& sys, const std::optional<attack::MmaCommand>& cmd,
                       bool with_defense) {
    sim::SimCase c;
    c.system = &sys;
    c.attack = cmd;
    c.load = s.load;
    if (with_defense) c.defense = s.defense;
    return c;
}

std::pair<double, double> steady_window(const Scenario& s, const std::optional<attack::MmaCommand>& cmd) {
    if (s.metric.window_set) return {s.metric.t0, s.metric.t1};
    const double t1 = cmd ? std::min(cmd->t_stop, s.sim.t_end) : s.sim.t_end;
    return {std::max(0.0, t1 - 5.0), t1};
}

double suppression_rate(double controlled, double uncontrolled) {
    if (!(uncontrolled > 0.0)) throw NumericalError("suppression rate: uncontrolled amplitude is zero");
    return 1.0 - controlled / uncontrolled;
}

namespace {

json mode_summary(const modal::ModalDecomposition& dec, std::size_t i) {
    return {{"index", i},
            {"frequency_hz", dec.frequency_hz(i)},
            {"damping_ratio", dec.damping_ratio(i)},
            {"eigenvalue", {{"re", dec.lambda[static_cast<Eigen::Index>(i)].real()},
                            {"im", dec.lambda[static_cast<Eigen::Index>(i)].imag()}}}};
}

}  // namespace

json modal_report(const Scenario& s) {
    const auto sys = build_system(s);
    const auto dec = modal::decompose(modal::linearize(sys));
    const auto idx = select_mode(dec, s.mode);
    json j;
    j["scenario"] = s.name;
    j["target"] = modal::mode_to_json(modal::mode_info(dec, idx));
    j["modes"] = json::array();
    for (auto i : modal::oscillatory_modes(dec, s.mode.f_lo, s.mode.f_hi)) j["modes"].push_back(mode_summary(dec, i));
    return j;
}

ExperimentReport run_scenario(const Scenario& s0, const RunOptions& opts) {
    Scenario s = s0;
    if (opts.seed) {
        s.seed = *opts.seed;
        s.load.seed = *opts.seed;
        s.document["seed"] = *opts.seed;
    }
    const auto sys = build_system(s);
    const auto dec = modal::decompose(modal::linearize(sys));
    const auto idx = select_mode(dec, s.mode);
    const auto mode = modal::mode_info(dec, idx);
    const auto cmd = resolve_attack(s, mode);

    ExperimentReport rep;
    json& j = rep.json;
    j["schema"] = kReportSchema;
    j["scenario"] = s.name;
    j["scenario_hash"] = json_hash(s.document);
    j["seed"] = s.seed;
    j["modal"]["target"] = mode_summary(dec, idx);
    j["modal"]["modes"] = json::array();
    for (auto i : modal::oscillatory_modes(dec, s.mode.f_lo, s.mode.f_hi)) j["modal"]["modes"].push_back(mode_summary(dec, i));
    if (cmd) {
        j["attack"] = {{"i_pct", cmd->i_pct},
                       {"frequency_hz", cmd->omega / kTwoPi},
                       {"phi", cmd->phi},
                       {"t_start", cmd->t_start},
                       {"t_stop", cmd->t_stop}};
    }

    auto cfg = s.sim;
    sim::SimCase main_case = make_case(s, sys, cmd, true);
    if (cfg.record_signals.empty()) cfg.record_signals = sim::default_channels(main_case);
    auto ensure = [&](const std::string& ch) {
        if (std::find(cfg.record_signals.begin(), cfg.record_signals.end(), ch) == cfg.record_signals.end()) {
            cfg.record_signals.push_back(ch);
        }
    };
    ensure(s.metric.channel);
    for (const auto& c : s.defense.controllers) ensure(c.gen + ".ut");
    rep.trace = sim::simulate(main_case, cfg);
    rep.trace.validate();

    const auto [t0, t1] = steady_window(s, cmd);
    json& m = j["metrics"];
    m["channel"] = s.metric.channel;
    m["window"] = {t0, t1};
    const auto& ch = rep.trace.channel(s.metric.channel);
    const double amp = osc::half_peak_to_peak(rep.trace.time, ch, t0, t1);
    m["amplitude"] = amp;
    if (cmd) {
        m["sinusoid_amplitude"] = osc::sinusoid_amplitude(rep.trace.time, ch, cmd->omega, t0, t1);
        // Linear prediction of the steady amplitude for the metric channel when the model outputs it.
        const auto& labels = dec.output_labels;
        if (std::find(labels.begin(), labels.end(), s.metric.channel) != labels.end()) {
            const auto k = static_cast<Eigen::Index>(std::find(labels.begin(), labels.end(), s.metric.channel) - labels.begin());
            j["predictions"]["steady_amplitude"] =
                osc::frequency_response_magnitude(dec, cmd->omega)[k] * cmd->i_pct * s.load.mean;
        }
    }

    if (s.defense.active()) {
        json& v = m["controlled_voltage_amplitude"];
        for (const auto& c : s.defense.controllers) {
            v[c.gen] = osc::half_peak_to_peak(rep.trace.time, rep.trace.channel(c.gen + ".ut"), t0, t1);
        }
        if (opts.baseline && cmd) {
            sim::SimConfig bc = cfg;
            bc.record_signals.clear();
            sim::SimCase bcase = make_case(s, sys, cmd, false);
            for (const auto& name : cfg.record_signals) {
                const auto avail = sim::available_channels(bcase);
                if (std::find(avail.begin(), avail.end(), name) != avail.end()) bc.record_signals.push_back(name);
            }
            rep.baseline = sim::simulate(bcase, bc);
            const double base_amp = osc::half_peak_to_peak(rep.baseline->time, rep.baseline->channel(s.metric.channel), t0, t1);
            m["uncontrolled_amplitude"] = base_amp;
            m["suppression_rate"] = suppression_rate(amp, base_amp);
        }
    }
    j["report_hash"] = json_hash(j);
    return rep;
}

void ExperimentReport::write(const std::string& dir) const {
    fs::create_directories(dir);
    const fs::path d(dir);
    std::vector<std::string> files{"report.json", "trace.csv"};
    {
        std::ofstream f(d / "report.json");
        f << json.dump(2) << '\n';
    }
    trace.write_csv((d / "trace.csv").string());
    if (baseline) {
        baseline->write_csv((d / "baseline.csv").string());
        files.emplace_back("baseline.csv");
    }
    nlohmann::json man = {{"schema", "mma-manifest/1"},
                          {"kind", "run"},
                          {"scenario", json.value("scenario", "")},
                          {"scenario_hash", json.value("scenario_hash", "")},
                          {"report_hash", json.value("report_hash", "")},
                          {"files", files}};
    std::ofstream f(d / "manifest.json");
    f << man.dump(2) << '\n';
}

std::string bundled_dir() {
    if (const char* env = std::getenv("MMA_DATA_DIR")) return (fs::path(env) / "scenarios").string();
    return (fs::path(MMA_DATA_DIR) / "scenarios").string();
}

namespace {

std::vector<std::string> names_in(const std::string& dir) {
    std::vector<std::string> out;
    if (dir.empty() || !fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path().stem().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<std::string> list_scenarios(const std::string& user_dir) {
    auto out = names_in(bundled_dir());
    for (const auto& n : names_in(user_dir)) {
        if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
    return out;
}

std::string resolve_scenario(const std::string& name, const std::string& user_dir) {
    if (fs::is_regular_file(name)) return name;
    const std::string file = name.size() > 5 && name.ends_with(".json") ? name : name + ".json";
    for (const auto& dir : {user_dir, bundled_dir()}) {
        if (dir.empty()) continue;
        const auto p = fs::path(dir) / file;
        if (fs::is_regular_file(p)) return p.string();
    }
    throw InputError("no scenario named '" + name + "'");
}

}  // namespace mma::scenario
