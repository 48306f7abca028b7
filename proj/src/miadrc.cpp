#include "mma/miadrc.hpp"

#include <cmath>
#include <numeric>

#include "mma/oscillation.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

namespace mma::miadrc {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

void MultiIndexCoeffs::validate() const {
    if (!(c1 > 0.0)) throw InputError("multi-index coefficients: c1 must be positive");
    if (!(c2 * c3 < 0.0)) throw InputError("multi-index coefficients: c2 and c3 must have opposite signs");
}

void MiadrcGains::set_bandwidth(double w) {
    w_c = w;
    beta1 = 3.0 * w;
    beta2 = 3.0 * w * w;
    beta3 = w * w * w;
}

void MiadrcGains::validate() const {
    if (!(h > 0.0)) throw InputError("miadrc: controller period must be positive");
    if (!(r0 > 0.0)) throw InputError("miadrc: r0 must be positive");
    if (!(c > 0.0)) throw InputError("miadrc: feedback factor c must be positive");
    if (b == 0.0 || !std::isfinite(b)) throw InputError("miadrc: input gain b must be finite and nonzero");
    if (eso_substeps < 1) throw InputError("miadrc: eso_substeps must be >= 1");
    for (double v : {beta1, beta2, beta3}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw InputError("miadrc: observer gains must be positive");
    }
}

double fhan(double x1, double x2, double r, double h) {
    const double d = r * h;
    const double d0 = d * h;
    const double y = x1 + h * x2;
    const double a0 = std::sqrt(d * d + 8.0 * r * std::abs(y));
    const double a = std::abs(y) > d0 ? x2 + sign(y) * (a0 - d) / 2.0 : x2 + y / h;
    return std::abs(a) > d ? -r * sign(a) : -r * a / d;
}

double multi_index_output(double du_t, double domega, double dp_e, const MultiIndexCoeffs& c) {
    return c.c1 * du_t + c.c2 * domega + c.c3 * dp_e;
}

double multi_index_output(const dyn::GeneratorState& x, const dyn::GeneratorAlgebraic& alg, const Equilibrium& eq,
                          const MultiIndexCoeffs& c) {
    return multi_index_output(alg.u_t - eq.u_t, x.omega - eq.omega, alg.p_e - eq.p_e, c);
}

void engage(MiadrcState& s, double y) {
    s = MiadrcState{};
    s.chi1 = y;
    s.enabled = true;
}

void disengage(MiadrcState& s) { s.enabled = false; }

double controller_step(MiadrcState& s, const MiadrcGains& g, double y) {
    if (!s.enabled) return 0.0;

    const double fh = fhan(s.v1 - g.r_ref, s.v2, g.r0, g.h);
    s.v1 += g.h * s.v2;
    s.v2 += g.h * fh;

    const double hs = g.h / g.eso_substeps;
    for (int k = 0; k < g.eso_substeps; ++k) {
        const double e = s.chi1 - y;
        const double c1 = s.chi1 + hs * (s.chi2 - g.beta1 * e);
        const double c2 = s.chi2 + hs * (s.chi3 - g.beta2 * e + s.u);
        const double c3 = s.chi3 + hs * (-g.beta3 * e);
        s.chi1 = c1;
        s.chi2 = c2;
        s.chi3 = c3;
    }

    const double e1 = s.v1 - s.chi1;
    const double e2 = s.v2 - s.chi2;
    s.u = -fhan(e1, g.c * e2, g.r0, g.h) - s.chi3;
    return s.u / g.b;
}

KConstants k_constants(const dyn::PowerSystem& sys, std::size_t gen, const VectorXd& x) {
    if (gen >= sys.gens.size()) throw InputError("k_constants: generator index out of range");
    const auto& p = sys.gens[gen];
    const auto o = static_cast<Eigen::Index>(sys.gen_offset(gen));
    const double step = 1e-6;
    auto eval = [&](Eigen::Index k, double dv) {
        VectorXd xp = x;
        xp[k] += dv;
        const auto sol = dyn::network_interface(sys, {xp.data(), static_cast<std::size_t>(xp.size())});
        return sol.gens[gen];
    };
    KConstants k;
    {
        const auto hi = eval(o, step), lo = eval(o, -step);
        k.k1 = (hi.p_e - lo.p_e) / (2.0 * step);
        k.k4 = -(p.x_d - p.x_dp) * (hi.i_d - lo.i_d) / (2.0 * step);
        k.du_dd = (hi.u_t - lo.u_t) / (2.0 * step);
    }
    {
        const auto hi = eval(o + 2, step), lo = eval(o + 2, -step);
        k.k2 = (hi.p_e - lo.p_e) / (2.0 * step);
        k.k3 = -1.0 - (p.x_d - p.x_dp) * (hi.i_d - lo.i_d) / (2.0 * step);
        k.du_de = (hi.u_t - lo.u_t) / (2.0 * step);
    }
    return k;
}

double compute_b(const dyn::PowerSystem& sys, std::size_t gen, const VectorXd& x, const MultiIndexCoeffs& c) {
    if (gen >= sys.gens.size()) throw InputError("compute_b: generator index out of range");
    const auto& p = sys.gens[gen];
    const auto i = static_cast<Eigen::Index>(gen);

    // Self admittance seen by the machine with the pile current held fixed.
    Complex y_self = sys.y_ss(i, i);
    if (sys.pile) y_self -= sys.y_sp(i, 0) * sys.y_ps(0, i) / sys.y_pp;
    const double g_ii = y_self.real();
    const double b_ii = y_self.imag();

    const auto sol = dyn::network_interface(sys, {x.data(), static_cast<std::size_t>(x.size())});
    const auto& a = sol.gens[gen];
    const double e = x[static_cast<Eigen::Index>(sys.gen_offset(gen)) + 2];
    if (!(a.u_t > 0.0)) throw NumericalError("compute_b: terminal voltage is zero at " + p.name);

    const double dpe_de = a.i_q + e * g_ii;
    const double dut_de = ((e - p.x_dp * a.i_d) * (1.0 + p.x_dp * b_ii) + p.x_dp * p.x_dp * a.i_q * g_ii) / a.u_t;
    const double b = (c.c1 * dut_de + c.c3 * dpe_de) * p.k_a / (p.t_d0p * p.t_a);
    if (b == 0.0 || !std::isfinite(b)) throw InputError("compute_b: input gain is zero for " + p.name);
    return b;
}

TorqueCoefficients torque_coefficients(double k1, double k2, double k3_loop, double k_a, double t_a, double t_d0p,
                                       double w, const MultiIndexCoeffs& c) {
    if (!(c.c1 > 0.0)) throw InputError("torque coefficients: c1 must be positive");
    const double r2 = c.c2 / c.c1;
    const double r3 = c.c3 / c.c1;
    const double x = k3_loop - k_a * r3 * k2 - w * w * t_a * t_d0p;
    const double y = k3_loop * t_a + t_d0p;
    const double den = x * x + w * w * y * y;
    if (!(den > 1e-300)) throw NumericalError("torque coefficients: zero denominator at w = " + std::to_string(w));
    TorqueCoefficients t;
    t.d_e = k2 * k_a * (r2 * x - r3 * k1 * y) / den;
    t.k_e = k1 + k2 * k_a * (r3 * k1 * x + w * w * r2 * y) / den;
    return t;
}

ZeroDynamicsReport zero_dynamics(const dyn::GeneratorParams& p, const KConstants& k, double w,
                                 const MultiIndexCoeffs& c) {
    p.validate();
    if (!(c.c1 > 0.0)) throw InputError("zero dynamics: c1 must be positive");
    ZeroDynamicsReport r;
    r.k = k;
    r.w = w;
    const double ka = p.k_a / (p.t_a * c.c1);
    r.a1 = MatrixXd::Zero(4, 4);
    r.a1(0, 1) = p.omega0;
    r.a1(1, 0) = -k.k1 / p.t_j;
    r.a1(1, 1) = -p.d / p.t_j;
    r.a1(1, 2) = -k.k2 / p.t_j;
    r.a1(2, 0) = k.k4 / p.t_d0p;
    r.a1(2, 2) = k.k3 / p.t_d0p;
    r.a1(2, 3) = 1.0 / p.t_d0p;
    r.a1(3, 0) = ka * c.c3 * k.k1;
    r.a1(3, 1) = ka * c.c2;
    r.a1(3, 2) = ka * c.c3 * k.k2;
    r.a1(3, 3) = -1.0 / p.t_a;
    r.eigenvalues = Eigen::EigenSolver<MatrixXd>(r.a1).eigenvalues();
    const auto t = torque_coefficients(k.k1, k.k2, -k.k3, p.k_a, p.t_a, p.t_d0p, w, c);
    r.d_e = t.d_e;
    r.k_e = t.k_e;
    return r;
}

nlohmann::json zero_dynamics_to_json(const ZeroDynamicsReport& r) {
    nlohmann::json j;
    j["w"] = r.w;
    j["d_e"] = r.d_e;
    j["k_e"] = r.k_e;
    j["k"] = {{"k1", r.k.k1}, {"k2", r.k.k2}, {"k3", r.k.k3}, {"k4", r.k.k4}};
    auto& a1 = j["a1"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.a1.rows(); ++i) {
        nlohmann::json jr = nlohmann::json::array();
        for (Eigen::Index k = 0; k < r.a1.cols(); ++k) jr.push_back(r.a1(i, k));
        a1.push_back(jr);
    }
    auto& ev = j["eigenvalues"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i) {
        ev.push_back({{"re", r.eigenvalues[i].real()}, {"im", r.eigenvalues[i].imag()}});
    }
    return j;
}

void GateConfig::validate() const {
    if (!(window > 0.0 && period > 0.0)) throw InputError("gate: window and period must be positive");
    if (!(sample_dt > 0.0 && sample_dt < window)) throw InputError("gate: sample_dt must lie in (0, window)");
    if (!(zeta_max > 0.0)) throw InputError("gate: zeta_max must be positive");
    if (!(min_amplitude >= 0.0)) throw InputError("gate: min_amplitude must be >= 0");
    if (!(f_lo >= 0.0 && f_hi > f_lo && f_hi < 0.5 / sample_dt)) {
        throw InputError("gate: band must satisfy 0 <= f_lo < f_hi < Nyquist of sample_dt");
    }
    if (order < 2) throw InputError("gate: order must be >= 2");
    if (confirm < 1 || release < 0) throw InputError("gate: confirm must be >= 1 and release >= 0");
    if (3.0 * order > window / sample_dt) throw InputError("gate: window too short for the Prony order");
}

bool detection_gate(std::span<const double> window, double dt, const GateConfig& cfg) {
    if (!(dt > 0.0)) throw InputError("gate: dt must be positive");
    const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.sample_dt / dt)));
    std::vector<double> x;
    for (std::size_t i = 0; i < window.size(); i += stride) x.push_back(window[i]);
    if (x.size() < static_cast<std::size_t>(3 * cfg.order)) return false;
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    for (double& v : x) v -= mean;
    const auto pr = osc::prony_identify(x, dt * static_cast<double>(stride), cfg.order);
    for (const auto& m : pr.modes) {
        if (m.frequency < cfg.f_lo || m.frequency > cfg.f_hi) continue;
        return m.amplitude >= cfg.min_amplitude && m.damping_ratio <= cfg.zeta_max;
    }
    return false;
}

DetectionGate::DetectionGate(GateConfig cfg) : cfg_(cfg) { cfg_.validate(); }

bool DetectionGate::update(std::span<const double> window, double dt) {
    if (detection_gate(window, dt, cfg_)) {
        ++hits_;
        misses_ = 0;
        if (hits_ >= cfg_.confirm) closed_ = true;
    } else {
        ++misses_;
        hits_ = 0;
        if (cfg_.release > 0 && misses_ >= cfg_.release) closed_ = false;
    }
    return closed_;
}

}  // namespace mma::miadrc
