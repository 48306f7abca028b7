#include "mma/netmodel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace mma::net {

namespace {

std::unordered_map<int, std::size_t> index_buses(std::span<const Bus> buses) {
    std::unordered_map<int, std::size_t> idx;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (!idx.emplace(buses[i].id, i).second) {
            throw InputError("duplicate bus id " + std::to_string(buses[i].id));
        }
    }
    return idx;
}

std::size_t lookup(const std::unordered_map<int, std::size_t>& idx, int id, const char* what) {
    auto it = idx.find(id);
    if (it == idx.end()) {
        throw InputError(std::string(what) + " references unknown bus " + std::to_string(id));
    }
    return it->second;
}

}  // namespace

std::size_t Network::index_of(int bus_id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == bus_id) return i;
    }
    throw InputError("unknown bus " + std::to_string(bus_id));
}

bool Network::has_bus(int bus_id) const {
    return std::any_of(buses.begin(), buses.end(), [&](const Bus& b) { return b.id == bus_id; });
}

const Bus& Network::bus(int bus_id) const { return buses[index_of(bus_id)]; }

Complex Network::load_at(int bus_id) const {
    Complex s{0.0, 0.0};
    for (const auto& l : loads) {
        if (l.bus == bus_id) s += Complex(l.p, l.q);
    }
    return s;
}

std::size_t AdmittanceMatrix::index_of(int label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw InputError("node " + std::to_string(label) + " not in admittance matrix");
    return static_cast<std::size_t>(it - labels.begin());
}

Complex PowerFlowSolution::voltage(int bus_id) const {
    auto it = std::find(bus_ids.begin(), bus_ids.end(), bus_id);
    if (it == bus_ids.end()) throw InputError("unknown bus " + std::to_string(bus_id));
    return v[it - bus_ids.begin()];
}

Complex PowerFlowSolution::injection(int bus_id) const {
    auto it = std::find(bus_ids.begin(), bus_ids.end(), bus_id);
    if (it == bus_ids.end()) throw InputError("unknown bus " + std::to_string(bus_id));
    return s_injected[it - bus_ids.begin()];
}

AdmittanceMatrix build_ybus(std::span<const Bus> buses, std::span<const Branch> branches) {
    const auto idx = index_buses(buses);
    const auto n = static_cast<Eigen::Index>(buses.size());
    AdmittanceMatrix out;
    out.y = MatrixXc::Zero(n, n);
    out.labels.reserve(buses.size());
    for (const auto& b : buses) out.labels.push_back(b.id);

    for (Eigen::Index i = 0; i < n; ++i) out.y(i, i) += buses[i].shunt;

    for (const auto& br : branches) {
        if (br.from == br.to) throw InputError("branch from == to at bus " + std::to_string(br.from));
        if (std::abs(br.series_z) <= 0.0) {
            throw InputError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                             " has zero series impedance");
        }
        const auto f = static_cast<Eigen::Index>(lookup(idx, br.from, "branch"));
        const auto t = static_cast<Eigen::Index>(lookup(idx, br.to, "branch"));
        const Complex ys = 1.0 / br.series_z;
        const Complex ysh(0.0, br.charging_b / 2.0);
        const double tap = br.tap > 0.0 ? br.tap : 1.0;
        out.y(f, f) += (ys + ysh) / (tap * tap);
        out.y(t, t) += ys + ysh;
        out.y(f, t) -= ys / tap;
        out.y(t, f) -= ys / tap;
    }
    return out;
}

namespace {

PowerFlowSolution newton_raphson(std::span<const Bus> buses, const MatrixXc& y, const VectorXc& s_spec,
                                 double tol, int max_iter) {
    const auto n = static_cast<Eigen::Index>(buses.size());
    std::vector<Eigen::Index> pv, pq, slack;
    for (Eigen::Index i = 0; i < n; ++i) {
        switch (buses[i].kind) {
            case BusKind::Slack: slack.push_back(i); break;
            case BusKind::PV: pv.push_back(i); break;
            case BusKind::PQ: pq.push_back(i); break;
        }
    }
    if (slack.size() != 1) throw InputError("network must contain exactly one slack bus");
    if (tol <= 0.0) throw InputError("power-flow tolerance must be positive");

    VectorXd vm = VectorXd::Ones(n);
    VectorXd va = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (buses[i].kind != BusKind::PQ) {
            if (buses[i].v_mag <= 0.0) throw InputError("non-positive voltage setpoint at bus " +
                                                        std::to_string(buses[i].id));
            vm[i] = buses[i].v_mag;
        }
    }
    va[slack[0]] = buses[slack[0]].v_ang;

    // Unknown ordering: angles of pv+pq, then magnitudes of pq.
    std::vector<Eigen::Index> ang_idx(pv);
    ang_idx.insert(ang_idx.end(), pq.begin(), pq.end());
    std::sort(ang_idx.begin(), ang_idx.end());
    const auto na = static_cast<Eigen::Index>(ang_idx.size());
    const auto nm = static_cast<Eigen::Index>(pq.size());

    auto voltages = [&]() {
        VectorXc v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
        return v;
    };

    auto mismatch_vec = [&](const VectorXc& v, VectorXd& f) {
        const VectorXc s = v.cwiseProduct((y * v).conjugate());
        const VectorXc ds = s - s_spec;
        f.resize(na + nm);
        for (Eigen::Index k = 0; k < na; ++k) f[k] = ds[ang_idx[k]].real();
        for (Eigen::Index k = 0; k < nm; ++k) f[na + k] = ds[pq[k]].imag();
    };

    PowerFlowSolution sol;
    sol.bus_ids.reserve(buses.size());
    for (const auto& b : buses) sol.bus_ids.push_back(b.id);

    VectorXd f;
    VectorXc v = voltages();
    mismatch_vec(v, f);
    double err = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    int it = 0;
    while (err > tol) {
        if (it >= max_iter) {
            std::ostringstream os;
            os << "power flow did not converge after " << max_iter << " iterations (mismatch " << err << ")";
            throw ConvergenceError(os.str(), err);
        }
        const VectorXc ibus = y * v;
        VectorXc vnorm(n);
        for (Eigen::Index i = 0; i < n; ++i) vnorm[i] = v[i] / std::abs(v[i]);
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)); dS/dVm = diag(V) conj(Y diag(Vn)) + conj(diag(I)) diag(Vn)
        MatrixXc ds_dva = MatrixXc(v.asDiagonal()) * (MatrixXc(ibus.asDiagonal()) - y * v.asDiagonal()).conjugate();
        ds_dva *= Complex(0.0, 1.0);
        MatrixXc ds_dvm = MatrixXc(v.asDiagonal()) * (y * vnorm.asDiagonal()).conjugate();
        ds_dvm += MatrixXc(ibus.conjugate().asDiagonal()) * vnorm.asDiagonal();

        MatrixXd jac(na + nm, na + nm);
        for (Eigen::Index r = 0; r < na; ++r) {
            for (Eigen::Index c = 0; c < na; ++c) jac(r, c) = ds_dva(ang_idx[r], ang_idx[c]).real();
            for (Eigen::Index c = 0; c < nm; ++c) jac(r, na + c) = ds_dvm(ang_idx[r], pq[c]).real();
        }
        for (Eigen::Index r = 0; r < nm; ++r) {
            for (Eigen::Index c = 0; c < na; ++c) jac(na + r, c) = ds_dva(pq[r], ang_idx[c]).imag();
            for (Eigen::Index c = 0; c < nm; ++c) jac(na + r, na + c) = ds_dvm(pq[r], pq[c]).imag();
        }
        const VectorXd dx = jac.partialPivLu().solve(-f);
        if (!dx.allFinite()) throw ConvergenceError("power-flow Jacobian is singular", err);
        for (Eigen::Index k = 0; k < na; ++k) va[ang_idx[k]] += dx[k];
        for (Eigen::Index k = 0; k < nm; ++k) vm[pq[k]] += dx[na + k];
        v = voltages();
        mismatch_vec(v, f);
        err = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
        ++it;
    }
    sol.v = v;
    sol.s_injected = v.cwiseProduct((y * v).conjugate());
    sol.mismatch = err;
    sol.iterations = it;
    return sol;
}

}  // namespace

PowerFlowSolution solve_power_flow(std::span<const Bus> buses, std::span<const Branch> branches, double tol,
                                   int max_iter) {
    const auto ybus = build_ybus(buses, branches);
    VectorXc s_spec(static_cast<Eigen::Index>(buses.size()));
    for (std::size_t i = 0; i < buses.size(); ++i) s_spec[i] = Complex(buses[i].p_inj, buses[i].q_inj);
    return newton_raphson(buses, ybus.y, s_spec, tol, max_iter);
}

PowerFlowSolution solve_power_flow(const Network& network, const PowerFlowOptions& opts) {
    validate(network);
    const auto ybus = build_ybus(network.buses, network.branches);
    VectorXc s_spec(static_cast<Eigen::Index>(network.buses.size()));
    for (std::size_t i = 0; i < network.buses.size(); ++i) {
        const auto& b = network.buses[i];
        s_spec[i] = Complex(b.p_inj, b.q_inj) - network.load_at(b.id);
    }
    return newton_raphson(network.buses, ybus.y, s_spec, opts.tol, opts.max_iter);
}

AdmittanceMatrix kron_reduce(const AdmittanceMatrix& y, std::span<const int> keep_nodes) {
    const auto n = static_cast<Eigen::Index>(y.size());
    std::vector<Eigen::Index> keep;
    std::vector<char> kept(static_cast<std::size_t>(n), 0);
    for (int id : keep_nodes) {
        const auto i = static_cast<Eigen::Index>(y.index_of(id));
        if (kept[i]) throw InputError("node " + std::to_string(id) + " listed twice in keep set");
        kept[i] = 1;
        keep.push_back(i);
    }
    std::vector<Eigen::Index> elim;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!kept[i]) elim.push_back(i);
    }
    const auto ne = static_cast<Eigen::Index>(elim.size());

    AdmittanceMatrix out;
    out.labels.assign(keep_nodes.begin(), keep_nodes.end());
    out.y = y.y(keep, keep);
    if (ne == 0) return out;

    const MatrixXc yee = y.y(elim, elim);
    const MatrixXc yek = y.y(elim, keep);
    const MatrixXc yke = y.y(keep, elim);
    Eigen::FullPivLU<MatrixXc> lu(yee);
    if (!lu.isInvertible() || lu.rcond() < 1e-14) {
        throw NumericalError("eliminated admittance block is singular");
    }
    out.y -= yke * lu.solve(yek);
    return out;
}

Complex load_admittance(Complex s_load, Complex v) {
    const double vm2 = std::norm(v);
    if (vm2 <= 0.0) throw NumericalError("zero voltage at a load bus");
    return std::conj(s_load) / vm2;
}

void validate(const Network& net) {
    std::set<int> ids;
    int slack = 0;
    for (const auto& b : net.buses) {
        if (!ids.insert(b.id).second) throw InputError("duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::Slack) ++slack;
        if (b.kind != BusKind::PQ && !(b.v_mag > 0.0)) {
            throw InputError("bus " + std::to_string(b.id) + " needs a positive voltage setpoint");
        }
    }
    if (slack != 1) throw InputError("network '" + net.name + "' must have exactly one slack bus");
    for (const auto& br : net.branches) {
        if (!ids.count(br.from) || !ids.count(br.to)) {
            throw InputError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                             " references unknown bus");
        }
        if (br.from == br.to) throw InputError("branch from == to at bus " + std::to_string(br.from));
        if (std::abs(br.series_z) <= 0.0) throw InputError("branch with zero series impedance");
    }
    for (const auto& l : net.loads) {
        if (!ids.count(l.bus)) throw InputError("load references unknown bus " + std::to_string(l.bus));
    }
}

// ---------------------------------------------------------------------------
// JSON

namespace {

BusKind kind_from_string(const std::string& s) {
    if (s == "slack") return BusKind::Slack;
    if (s == "pv") return BusKind::PV;
    if (s == "pq") return BusKind::PQ;
    throw InputError("unknown bus kind '" + s + "'");
}

const char* kind_to_string(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "pq";
}

Complex complex_from_json(const nlohmann::json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2) throw InputError("complex value must be [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw InputError("unknown key '" + it.key() + "' in " + where);
    }
}

}  // namespace

Network network_from_json(const nlohmann::json& j) {
    Network net;
    net.name = j.value("name", std::string{});
    net.base_mva = j.value("base_mva", 100.0);
    for (const auto& jb : j.at("buses")) {
        reject_unknown(jb, {"id", "kind", "v_mag", "v_ang", "p_inj", "q_inj", "shunt", "name"}, "bus");
        Bus b;
        b.id = jb.at("id").get<int>();
        b.kind = kind_from_string(jb.value("kind", std::string("pq")));
        b.v_mag = jb.value("v_mag", 1.0);
        b.v_ang = jb.value("v_ang", 0.0);
        b.p_inj = jb.value("p_inj", 0.0);
        b.q_inj = jb.value("q_inj", 0.0);
        if (jb.contains("shunt")) b.shunt = complex_from_json(jb["shunt"]);
        net.buses.push_back(b);
    }
    for (const auto& jb : j.at("branches")) {
        reject_unknown(jb, {"from", "to", "z", "b", "tap"}, "branch");
        Branch br;
        br.from = jb.at("from").get<int>();
        br.to = jb.at("to").get<int>();
        br.series_z = complex_from_json(jb.at("z"));
        br.charging_b = jb.value("b", 0.0);
        br.tap = jb.value("tap", 1.0);
        net.branches.push_back(br);
    }
    if (j.contains("loads")) {
        for (const auto& jl : j["loads"]) {
            reject_unknown(jl, {"bus", "p", "q"}, "load");
            net.loads.push_back({jl.at("bus").get<int>(), jl.value("p", 0.0), jl.value("q", 0.0)});
        }
    }
    validate(net);
    return net;
}

nlohmann::json network_to_json(const Network& net) {
    nlohmann::json j;
    j["name"] = net.name;
    j["base_mva"] = net.base_mva;
    j["buses"] = nlohmann::json::array();
    for (const auto& b : net.buses) {
        j["buses"].push_back({{"id", b.id},
                              {"kind", kind_to_string(b.kind)},
                              {"v_mag", b.v_mag},
                              {"v_ang", b.v_ang},
                              {"p_inj", b.p_inj},
                              {"q_inj", b.q_inj},
                              {"shunt", {b.shunt.real(), b.shunt.imag()}}});
    }
    j["branches"] = nlohmann::json::array();
    for (const auto& br : net.branches) {
        j["branches"].push_back({{"from", br.from},
                                 {"to", br.to},
                                 {"z", {br.series_z.real(), br.series_z.imag()}},
                                 {"b", br.charging_b},
                                 {"tap", br.tap}});
    }
    j["loads"] = nlohmann::json::array();
    for (const auto& l : net.loads) j["loads"].push_back({{"bus", l.bus}, {"p", l.p}, {"q", l.q}});
    return j;
}

}  // namespace mma::net
