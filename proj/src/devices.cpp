#include "mma/devices.hpp"

#include <algorithm>
#include <cmath>

namespace mma::dyn {

namespace {

constexpr int kInternalNodeBase = 1'000'000;
constexpr int kPileNodeBase = 2'000'000;

void require(bool ok, const std::string& msg) {
    if (!ok) throw InputError(msg);
}

}  // namespace

void GeneratorParams::validate() const {
    require(t_j > 0.0, name + ": t_j must be positive");
    require(t_d0p > 0.0, name + ": t_d0p must be positive");
    require(t_a > 0.0, name + ": t_a must be positive");
    require(k_a >= 1.0, name + ": k_a must be >= 1");
    require(x_dp > 0.0 && x_d >= x_dp, name + ": need x_d >= x_dp > 0");
    require(omega0 > 0.0, name + ": omega0 must be positive");
}

void PileParams::validate() const {
    require(tau1 > 0.0 && tau2 > 0.0, "pile: current-loop delays must be positive");
    for (double g : {kp1, ki1, kp2, ki2, kp3, ki3, q_ref, x_filter}) require(std::isfinite(g), "pile: non-finite gain");
    require(x_filter > 0.0, "pile: filter reactance must be positive");
    require(s_rated > 0.0, "pile: rating must be positive");
}

PileAlgebraic pile_measure(const PileState& s, Complex terminal_voltage) {
    const Complex vdq = terminal_voltage * std::polar(1.0, -s.theta_pll);
    PileAlgebraic a;
    a.u_gq = vdq.real();
    a.u_gd = -vdq.imag();
    a.p_e = a.u_gd * s.i_d + a.u_gq * s.i_q;
    a.q_e = a.u_gq * s.i_d - a.u_gd * s.i_q;
    return a;
}

GeneratorState generator_derivatives(const GeneratorState& x, const GeneratorParams& p,
                                     const GeneratorAlgebraic& alg, double u_e) {
    GeneratorState dx;
    const double dw = x.omega - p.omega0;
    dx.delta = dw;
    dx.omega = p.omega0 / p.t_j * (p.p_m0 - alg.p_e) - p.d / p.t_j * dw;
    dx.e_qp = (-(x.e_qp + (p.x_d - p.x_dp) * alg.i_d) + x.e_f) / p.t_d0p;
    dx.e_f = -x.e_f / p.t_a + p.k_a / p.t_a * (p.u_ref - alg.u_t) + p.k_a / p.t_a * u_e;
    return dx;
}

PileState pile_derivatives(const PileState& x, const PileParams& p, double p_ref, Complex grid_voltage) {
    const PileAlgebraic m = pile_measure(x, grid_voltage);
    const double ep = p_ref - m.p_e;
    const double eq = p.q_ref - m.q_e;
    const double i_qref = x.x1 + p.kp1 * ep;
    const double i_dref = x.x2 + p.kp2 * eq;
    PileState dx;
    dx.x_pll = -m.u_gd;
    dx.theta_pll = -p.kp3 * m.u_gd + p.ki3 * x.x_pll;
    dx.x1 = p.ki1 * ep;
    dx.i_d = (i_dref - x.i_d) / p.tau2;
    dx.x2 = p.ki2 * eq;
    dx.i_q = (i_qref - x.i_q) / p.tau1;
    return dx;
}

std::vector<std::string> PowerSystem::state_labels() const {
    std::vector<std::string> out;
    out.reserve(n_states());
    for (const auto& g : gens) {
        for (const char* s : {".delta", ".omega", ".eqp", ".efd"}) out.push_back(g.name + s);
    }
    if (pile) {
        for (const char* s : {"pile.x_pll", "pile.theta_pll", "pile.x1", "pile.i_d", "pile.x2", "pile.i_q"}) {
            out.emplace_back(s);
        }
    }
    return out;
}

std::size_t PowerSystem::gen_index(const std::string& gname) const {
    for (std::size_t i = 0; i < gens.size(); ++i) {
        if (gens[i].name == gname) return i;
    }
    throw InputError("unknown generator '" + gname + "'");
}

GeneratorState gen_state(std::span<const double> x, std::size_t i) {
    const std::size_t o = 4 * i;
    return {x[o], x[o + 1], x[o + 2], x[o + 3]};
}

PileState pile_state(std::span<const double> x, std::size_t o) {
    return {x[o], x[o + 1], x[o + 2], x[o + 3], x[o + 4], x[o + 5]};
}

ReducedSolve solve_reduced(const PowerSystem& sys, const VectorXc& e, Complex pile_injection) {
    ReducedSolve out;
    if (sys.pile) {
        out.v_pile = (pile_injection - (sys.y_ps * e)(0)) / sys.y_pp;
        out.source_current = sys.y_ss * e + sys.y_sp.col(0) * out.v_pile;
    } else {
        out.v_pile = Complex(0.0, 0.0);
        out.source_current = sys.y_ss * e;
    }
    return out;
}

NetworkSolution network_interface(const PowerSystem& sys, std::span<const double> x) {
    const std::size_t ng = sys.gens.size();
    const std::size_t ns = ng + sys.fixed.size();
    VectorXc e(static_cast<Eigen::Index>(ns));
    for (std::size_t i = 0; i < ng; ++i) {
        const auto g = gen_state(x, i);
        e[i] = std::polar(g.e_qp, g.delta);
    }
    for (std::size_t k = 0; k < sys.fixed.size(); ++k) e[ng + k] = sys.fixed[k].voltage;

    Complex i_inj{0.0, 0.0};
    PileState ps;
    if (sys.pile) {
        ps = pile_state(x, sys.pile_offset());
        const Complex i_drawn = Complex(ps.i_q, -ps.i_d) * std::polar(1.0, ps.theta_pll);
        i_inj = -sys.pile->params.s_rated * i_drawn;
    }
    const auto red = solve_reduced(sys, e, i_inj);

    NetworkSolution out;
    out.gens.resize(ng);
    out.gen_current.resize(ng);
    for (std::size_t i = 0; i < ng; ++i) {
        const auto g = gen_state(x, i);
        const Complex ig = red.source_current[static_cast<Eigen::Index>(i)];
        const Complex idq = ig * std::polar(1.0, -g.delta);
        auto& a = out.gens[i];
        a.i_q = idq.real();
        a.i_d = -idq.imag();
        const Complex vt = e[static_cast<Eigen::Index>(i)] - Complex(0.0, sys.gens[i].x_dp) * ig;
        a.u_t = std::abs(vt);
        a.p_e = g.e_qp * a.i_q;
        out.gen_current[i] = ig;
    }
    if (sys.pile) {
        out.v_pile = red.v_pile;
        out.pile = pile_measure(ps, red.v_pile);
    }
    return out;
}

void system_derivatives(const PowerSystem& sys, std::span<const double> x, double p_ref_sys,
                        std::span<const double> u_e, std::span<double> dx) {
    const auto sol = network_interface(sys, x);
    for (std::size_t i = 0; i < sys.gens.size(); ++i) {
        const double ue = u_e.empty() ? 0.0 : u_e[i];
        const auto d = generator_derivatives(gen_state(x, i), sys.gens[i], sol.gens[i], ue);
        const std::size_t o = 4 * i;
        dx[o] = d.delta;
        dx[o + 1] = d.omega;
        dx[o + 2] = d.e_qp;
        dx[o + 3] = d.e_f;
    }
    if (sys.pile) {
        const std::size_t o = sys.pile_offset();
        const auto& pp = sys.pile->params;
        const auto d = pile_derivatives(pile_state(x, o), pp, p_ref_sys / pp.s_rated, sol.v_pile);
        dx[o] = d.x_pll;
        dx[o + 1] = d.theta_pll;
        dx[o + 2] = d.x1;
        dx[o + 3] = d.i_d;
        dx[o + 4] = d.x2;
        dx[o + 5] = d.i_q;
    }
}

PowerSystem assemble(const net::Network& network, std::vector<GeneratorParams> gens,
                     const std::optional<PileSpec>& pile, std::span<const int> fixed_sources,
                     const AssemblyOptions& opts) {
    PowerSystem sys;
    sys.name = network.name;
    sys.network = network;
    for (auto& g : gens) {
        g.validate();
        if (!network.has_bus(g.bus)) throw InputError(g.name + " placed at unknown bus " + std::to_string(g.bus));
    }
    for (std::size_t i = 0; i < gens.size(); ++i) {
        for (std::size_t j = i + 1; j < gens.size(); ++j) {
            if (gens[i].bus == gens[j].bus) throw InputError("two machines at bus " + std::to_string(gens[i].bus));
        }
    }

    if (pile) {
        pile->params.validate();
        if (!network.has_bus(pile->bus)) throw InputError("pile placed at unknown bus " + std::to_string(pile->bus));
        PileSite site;
        site.params = pile->params;
        site.bus = pile->bus;
        site.terminal_node = kPileNodeBase + pile->bus;
        net::Bus term;
        term.id = site.terminal_node;
        term.kind = net::BusKind::PQ;
        sys.network.buses.push_back(term);
        net::Branch filt;
        filt.from = pile->bus;
        filt.to = site.terminal_node;
        filt.series_z = Complex(0.0, site.params.x_filter / site.params.s_rated);
        sys.network.branches.push_back(filt);
        sys.network.loads.push_back({site.terminal_node, pile->base_p, 0.0});
        sys.pile = site;
        sys.p_ref0 = pile->base_p;
    }

    sys.power_flow = net::solve_power_flow(sys.network, opts.pf);
    const auto& pf = sys.power_flow;

    // Full admittance with loads as constant admittance and internal nodes.
    std::vector<net::Bus> buses = sys.network.buses;
    for (auto& b : buses) {
        if (sys.pile && b.id == sys.pile->terminal_node) continue;
        const Complex sl = sys.network.load_at(b.id);
        if (sl != Complex(0.0, 0.0)) b.shunt += net::load_admittance(sl, pf.voltage(b.id));
    }
    std::vector<net::Branch> branches = sys.network.branches;
    std::vector<int> keep;
    for (std::size_t i = 0; i < gens.size(); ++i) {
        net::Bus internal;
        internal.id = kInternalNodeBase + static_cast<int>(i);
        buses.push_back(internal);
        net::Branch br;
        br.from = gens[i].bus;
        br.to = internal.id;
        br.series_z = Complex(0.0, gens[i].x_dp);
        branches.push_back(br);
        keep.push_back(internal.id);
    }
    for (int fb : fixed_sources) {
        if (!network.has_bus(fb)) throw InputError("fixed source at unknown bus " + std::to_string(fb));
        sys.fixed.push_back({fb, pf.voltage(fb)});
        keep.push_back(fb);
    }
    if (sys.pile) keep.push_back(sys.pile->terminal_node);

    const auto yfull = net::build_ybus(buses, branches);
    sys.y_red = net::kron_reduce(yfull, keep);

    const auto ns = static_cast<Eigen::Index>(gens.size() + sys.fixed.size());
    sys.y_ss = sys.y_red.y.topLeftCorner(ns, ns);
    if (sys.pile) {
        sys.y_sp = sys.y_red.y.block(0, ns, ns, 1);
        sys.y_ps = sys.y_red.y.block(ns, 0, 1, ns);
        sys.y_pp = sys.y_red.y(ns, ns);
    }

    // Equilibrium.
    sys.gens = std::move(gens);
    sys.x0 = VectorXd::Zero(static_cast<Eigen::Index>(sys.n_states()));
    for (std::size_t i = 0; i < sys.gens.size(); ++i) {
        auto& g = sys.gens[i];
        const Complex vt = pf.voltage(g.bus);
        const Complex sg = pf.injection(g.bus) + sys.network.load_at(g.bus);
        const Complex ig = std::conj(sg / vt);
        const Complex ep = vt + Complex(0.0, g.x_dp) * ig;
        const double delta = std::arg(ep);
        const Complex idq = ig * std::polar(1.0, -delta);
        const double i_q = idq.real();
        const double i_d = -idq.imag();
        const double eqp = std::abs(ep);
        const double efd = eqp + (g.x_d - g.x_dp) * i_d;
        g.p_m0 = eqp * i_q;
        g.u_ref = std::abs(vt) + efd / g.k_a;
        const auto o = static_cast<Eigen::Index>(sys.gen_offset(i));
        sys.x0[o] = delta;
        sys.x0[o + 1] = g.omega0;
        sys.x0[o + 2] = eqp;
        sys.x0[o + 3] = efd;
    }
    if (sys.pile) {
        const auto& pp = sys.pile->params;
        const Complex vp = pf.voltage(sys.pile->terminal_node);
        const double vm = std::abs(vp);
        const auto o = static_cast<Eigen::Index>(sys.pile_offset());
        const double i_q = sys.p_ref0 / pp.s_rated / vm;
        const double i_d = pp.q_ref / vm;
        sys.x0[o] = 0.0;
        sys.x0[o + 1] = std::arg(vp);
        sys.x0[o + 2] = i_q;
        sys.x0[o + 3] = i_d;
        sys.x0[o + 4] = i_d;
        sys.x0[o + 5] = i_q;
    }
    return sys;
}

}  // namespace mma::dyn
