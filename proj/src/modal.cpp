#include "mma/modal.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include <nlohmann/json.hpp>

namespace mma::modal {

void LinearModel::validate() const {
    const auto n = a.rows();
    if (a.cols() != n) throw InputError("linear model: A must be square");
    if (b.rows() != n || c.cols() != n) throw InputError("linear model: inconsistent B/C dimensions");
    if (d.rows() != c.rows() || d.cols() != b.cols()) throw InputError("linear model: inconsistent D dimensions");
    if (!state_labels.empty() && static_cast<Eigen::Index>(state_labels.size()) != n) {
        throw InputError("linear model: state label count mismatch");
    }
    if (!output_labels.empty() && static_cast<Eigen::Index>(output_labels.size()) != c.rows()) {
        throw InputError("linear model: output label count mismatch");
    }
}

Eigen::Index LinearModel::output_index(const std::string& label) const {
    for (std::size_t i = 0; i < output_labels.size(); ++i) {
        if (output_labels[i] == label) return static_cast<Eigen::Index>(i);
    }
    throw InputError("unknown output '" + label + "'");
}

namespace {

VectorXd eval_f(const dyn::PowerSystem& sys, const VectorXd& x, double p_ref) {
    VectorXd dx(x.size());
    dyn::system_derivatives(sys, {x.data(), static_cast<std::size_t>(x.size())}, p_ref, {},
                            {dx.data(), static_cast<std::size_t>(dx.size())});
    return dx;
}

std::vector<std::string> output_labels(const dyn::PowerSystem& sys) {
    std::vector<std::string> out;
    for (const auto& g : sys.gens) {
        out.push_back(g.name + ".Pe");
        out.push_back(g.name + ".omega");
        out.push_back(g.name + ".ut");
    }
    if (sys.pile) out.emplace_back("pile.Pe");
    return out;
}

}  // namespace

VectorXd system_outputs(const dyn::PowerSystem& sys, const VectorXd& x) {
    const auto sol = dyn::network_interface(sys, {x.data(), static_cast<std::size_t>(x.size())});
    VectorXd y(static_cast<Eigen::Index>(3 * sys.gens.size() + (sys.pile ? 1 : 0)));
    Eigen::Index k = 0;
    for (std::size_t i = 0; i < sys.gens.size(); ++i) {
        y[k++] = sol.gens[i].p_e;
        y[k++] = x[static_cast<Eigen::Index>(sys.gen_offset(i) + 1)];
        y[k++] = sol.gens[i].u_t;
    }
    if (sys.pile) y[k++] = sol.pile.p_e * sys.pile->params.s_rated;
    return y;
}

LinearModel linearize(const dyn::PowerSystem& sys, const LinearizeOptions& opts) {
    const VectorXd& x0 = sys.x0;
    const auto n = x0.size();
    const double h = opts.step;
    const double p0 = sys.p_ref0;

    const VectorXd f0 = eval_f(sys, x0, p0);
    if (f0.norm() > opts.equilibrium_tol) {
        throw NumericalError("linearize: start is not an equilibrium (|f(x0)| = " + std::to_string(f0.norm()) + ")");
    }

    LinearModel m;
    m.state_labels = sys.state_labels();
    m.output_labels = output_labels(sys);
    const auto ny = static_cast<Eigen::Index>(m.output_labels.size());
    m.a.resize(n, n);
    m.c.resize(ny, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        VectorXd xp = x0, xm = x0;
        xp[j] += h;
        xm[j] -= h;
        m.a.col(j) = (eval_f(sys, xp, p0) - eval_f(sys, xm, p0)) / (2.0 * h);
        m.c.col(j) = (system_outputs(sys, xp) - system_outputs(sys, xm)) / (2.0 * h);
    }
    m.b.resize(n, 1);
    m.d = MatrixXd::Zero(ny, 1);
    if (sys.pile) m.b.col(0) = (eval_f(sys, x0, p0 + h) - eval_f(sys, x0, p0 - h)) / (2.0 * h);
    else m.b.setZero();
    return m;
}

double ModalDecomposition::frequency_hz(std::size_t i) const {
    return std::abs(lambda[static_cast<Eigen::Index>(i)].imag()) / kTwoPi;
}

double ModalDecomposition::damping_ratio(std::size_t i) const {
    const Complex l = lambda[static_cast<Eigen::Index>(i)];
    const double mag = std::abs(l);
    if (mag == 0.0) return 0.0;
    return -l.real() / mag;
}

ModalDecomposition decompose(const LinearModel& model, double max_condition) {
    model.validate();
    const auto n = model.a.rows();
    Eigen::EigenSolver<MatrixXd> es(model.a, true);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue iteration did not converge");
    const VectorXc lam = es.eigenvalues();
    MatrixXc u = es.eigenvectors();
    for (Eigen::Index i = 0; i < n; ++i) u.col(i).normalize();

    Eigen::JacobiSVD<MatrixXc> svd(u);
    const auto& sv = svd.singularValues();
    const double cond = sv[0] / sv[n - 1];
    if (!(cond < max_condition)) {
        // Report the closest eigenvalue pair as the likely repeated one.
        double best = INFINITY;
        Complex rep{};
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < n; ++j) {
                if (std::abs(lam[i] - lam[j]) < best) {
                    best = std::abs(lam[i] - lam[j]);
                    rep = lam[i];
                }
            }
        }
        throw NumericalError("state matrix is defective near eigenvalue (" + std::to_string(rep.real()) + ", " +
                             std::to_string(rep.imag()) + "), eigenvector condition " + std::to_string(cond));
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double fa = std::abs(lam[a].imag()), fb = std::abs(lam[b].imag());
        if (std::abs(fa - fb) > 1e-9 * std::max(1.0, fa)) return fa < fb;
        if (lam[a].imag() != lam[b].imag()) return lam[a].imag() > lam[b].imag();
        return lam[a].real() < lam[b].real();
    });

    ModalDecomposition dec;
    dec.lambda.resize(n);
    dec.u_right.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        dec.lambda[k] = lam[order[static_cast<std::size_t>(k)]];
        dec.u_right.col(k) = u.col(order[static_cast<std::size_t>(k)]);
    }
    dec.v_left = dec.u_right.inverse().transpose();
    dec.psi = dec.v_left.transpose() * model.b.cast<Complex>();
    dec.phi = model.c.cast<Complex>() * dec.u_right;
    dec.state_labels = model.state_labels;
    dec.output_labels = model.output_labels;
    return dec;
}

VectorXd participation_factors(const ModalDecomposition& dec, std::size_t mode) {
    if (mode >= dec.size()) throw InputError("participation_factors: mode index out of range");
    const auto i = static_cast<Eigen::Index>(mode);
    VectorXd p = (dec.u_right.col(i).array() * dec.v_left.col(i).array()).abs().matrix();
    const double mx = p.maxCoeff();
    if (mx > 0.0) p /= mx;
    return p;
}

ModeInfo mode_info(const ModalDecomposition& dec, std::size_t mode) {
    if (mode >= dec.size()) throw InputError("mode_info: mode index out of range");
    ModeInfo m;
    m.index = mode;
    m.eigenvalue = dec.lambda[static_cast<Eigen::Index>(mode)];
    m.frequency = dec.frequency_hz(mode);
    m.damping_ratio = dec.damping_ratio(mode);
    m.participation = participation_factors(dec, mode);
    m.state_labels = dec.state_labels;
    std::vector<Eigen::Index> rows;
    for (std::size_t k = 0; k < dec.state_labels.size(); ++k) {
        const auto& s = dec.state_labels[k];
        if (s.size() > 6 && s.compare(s.size() - 6, 6, ".omega") == 0) {
            rows.push_back(static_cast<Eigen::Index>(k));
            m.shape_labels.push_back(s);
        }
    }
    m.shape.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        m.shape[static_cast<Eigen::Index>(k)] = dec.u_right(rows[k], static_cast<Eigen::Index>(mode));
    }
    // Present the shape with its largest entry real and positive.
    if (m.shape.size() > 0) {
        Eigen::Index imax = 0;
        m.shape.cwiseAbs().maxCoeff(&imax);
        const Complex ref = m.shape[imax];
        if (std::abs(ref) > 0.0) m.shape /= ref;
    }
    return m;
}

nlohmann::json mode_to_json(const ModeInfo& m) {
    nlohmann::json j;
    j["frequency_hz"] = m.frequency;
    j["damping_ratio"] = m.damping_ratio;
    j["eigenvalue"] = {m.eigenvalue.real(), m.eigenvalue.imag()};
    auto& shape = j["shape"] = nlohmann::json::array();
    for (std::size_t k = 0; k < m.shape_labels.size(); ++k) {
        const Complex v = m.shape[static_cast<Eigen::Index>(k)];
        shape.push_back({{"state", m.shape_labels[k]}, {"re", v.real()}, {"im", v.imag()}});
    }
    auto& part = j["participation"] = nlohmann::json::array();
    for (std::size_t k = 0; k < m.state_labels.size(); ++k) {
        part.push_back({{"state", m.state_labels[k]}, {"value", m.participation[static_cast<Eigen::Index>(k)]}});
    }
    return j;
}

std::vector<std::size_t> oscillatory_modes(const ModalDecomposition& dec, double f_lo, double f_hi) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < dec.size(); ++i) {
        const Complex l = dec.lambda[static_cast<Eigen::Index>(i)];
        if (l.imag() <= 0.0) continue;
        const double f = dec.frequency_hz(i);
        if (f >= f_lo && f <= f_hi) out.push_back(i);
    }
    return out;
}

std::size_t least_damped_mode(const ModalDecomposition& dec, double f_lo, double f_hi) {
    const auto cand = oscillatory_modes(dec, f_lo, f_hi);
    if (cand.empty()) throw NumericalError("no oscillatory mode between " + std::to_string(f_lo) + " and " +
                                           std::to_string(f_hi) + " Hz");
    return *std::min_element(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
        return dec.damping_ratio(a) < dec.damping_ratio(b);
    });
}

std::size_t dominant_mode_of(const ModalDecomposition& dec, const std::string& state_label, double f_lo,
                             double f_hi) {
    const auto it = std::find(dec.state_labels.begin(), dec.state_labels.end(), state_label);
    if (it == dec.state_labels.end()) throw InputError("unknown state '" + state_label + "'");
    const auto k = static_cast<Eigen::Index>(it - dec.state_labels.begin());
    const auto cand = oscillatory_modes(dec, f_lo, f_hi);
    if (cand.empty()) throw NumericalError("no oscillatory mode in the requested band");
    std::size_t best = cand.front();
    double best_p = -1.0;
    for (auto i : cand) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double p = std::abs(dec.u_right(k, ii) * dec.v_left(k, ii));
        if (p > best_p) {
            best_p = p;
            best = i;
        }
    }
    return best;
}

double mac(const VectorXc& a, const VectorXc& b) {
    const double na = a.squaredNorm(), nb = b.squaredNorm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::norm(a.dot(b)) / (na * nb);
}

std::vector<SweepPoint> mode_sweep(const std::function<dyn::PowerSystem(double)>& build,
                                   const std::vector<double>& values,
                                   const std::function<std::size_t(const ModalDecomposition&)>& pick_initial,
                                   Execution exec, double mac_threshold) {
    if (values.empty()) return {};
    const auto n = static_cast<long>(values.size());
    std::vector<ModalDecomposition> decs(values.size());
    std::vector<std::exception_ptr> errors(values.size());
    auto work = [&](long i) {
        try {
            decs[static_cast<std::size_t>(i)] = decompose(linearize(build(values[static_cast<std::size_t>(i)])));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    };
    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < n; ++i) work(i);
    } else {
        for (long i = 0; i < n; ++i) work(i);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::vector<SweepPoint> out;
    std::size_t idx = pick_initial(decs[0]);
    out.push_back({values[0], mode_info(decs[0], idx), 1.0});
    VectorXc prev = decs[0].u_right.col(static_cast<Eigen::Index>(idx));
    for (std::size_t k = 1; k < decs.size(); ++k) {
        const auto& d = decs[k];
        if (d.size() != static_cast<std::size_t>(prev.size())) {
            throw NumericalError("mode tracking: state dimension changed at value " + std::to_string(values[k]));
        }
        double best = -1.0;
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d.lambda[static_cast<Eigen::Index>(i)].imag() <= 0.0) continue;
            const double c = mac(prev, d.u_right.col(static_cast<Eigen::Index>(i)));
            if (c > best) {
                best = c;
                best_i = i;
            }
        }
        if (best < mac_threshold) {
            throw NumericalError("mode tracking lost at value " + std::to_string(values[k]) +
                                 " (best correlation " + std::to_string(best) + ")");
        }
        out.push_back({values[k], mode_info(d, best_i), best});
        prev = d.u_right.col(static_cast<Eigen::Index>(best_i));
    }
    return out;
}

dyn::PowerSystem pile_test_system(const dyn::PileParams& params, double base_p) {
    net::Network n;
    n.name = "pile_vs_source";
    net::Bus b;
    b.id = 1;
    b.kind = net::BusKind::Slack;
    b.v_mag = 1.0;
    n.buses.push_back(b);
    dyn::PileSpec spec;
    spec.params = params;
    spec.bus = 1;
    spec.base_p = base_p;
    const int fixed[] = {1};
    return dyn::assemble(n, {}, spec, fixed);
}

namespace {

std::pair<double, double> pile_mode(const dyn::PileParams& p, double base_p) {
    const auto dec = decompose(linearize(pile_test_system(p, base_p)));
    const auto i = dominant_mode_of(dec, "pile.theta_pll", 0.01, 50.0);
    return {dec.frequency_hz(i), dec.damping_ratio(i)};
}

}  // namespace

CalibrationResult calibrate_pile(double target_freq_hz, double target_damping, const dyn::PileParams& base,
                                 double base_p) {
    if (!(target_freq_hz > 0.0) || !(target_damping > 0.0) || !(target_damping < 1.0)) {
        throw InputError("calibrate_pile: targets must be positive with damping below one");
    }
    // Second-order PLL estimate as the starting point.
    const double wn = kTwoPi * target_freq_hz / std::sqrt(1.0 - target_damping * target_damping);
    Eigen::Vector2d g(2.0 * target_damping * wn, wn * wn);
    if (base.kp3 > 0.0 && base.ki3 > 0.0) {
        dyn::PileParams p = base;
        const auto [f, z] = pile_mode(p, base_p);
        if (std::abs(f - target_freq_hz) < 1e-9 && std::abs(z - target_damping) < 1e-9) {
            return {base.kp3, base.ki3, f, z, 0, true};
        }
    }

    auto residual = [&](const Eigen::Vector2d& gains) {
        dyn::PileParams p = base;
        p.kp3 = gains[0];
        p.ki3 = gains[1];
        const auto [f, z] = pile_mode(p, base_p);
        return Eigen::Vector2d(f - target_freq_hz, z - target_damping);
    };

    CalibrationResult best;
    double best_err = INFINITY;
    Eigen::Vector2d r = residual(g);
    for (int it = 1; it <= 40; ++it) {
        const double err = std::abs(r[0]) / target_freq_hz + std::abs(r[1]);
        if (err < best_err) {
            best_err = err;
            best.kp3 = g[0];
            best.ki3 = g[1];
            best.frequency = r[0] + target_freq_hz;
            best.damping_ratio = r[1] + target_damping;
            best.iterations = it - 1;
        }
        if (std::abs(r[0]) < 1e-9 && std::abs(r[1]) < 1e-9) {
            best.converged = true;
            break;
        }
        Eigen::Matrix2d jac;
        for (int k = 0; k < 2; ++k) {
            Eigen::Vector2d gp = g;
            const double h = 1e-5 * std::max(1.0, std::abs(g[k]));
            gp[k] += h;
            jac.col(k) = (residual(gp) - r) / h;
        }
        Eigen::Vector2d step = -jac.fullPivLu().solve(r);
        double t = 1.0;
        for (int ls = 0; ls < 20; ++ls) {
            Eigen::Vector2d trial = g + t * step;
            if (trial[0] > 0.0 && trial[1] > 0.0) {
                const Eigen::Vector2d rt = residual(trial);
                if (rt.norm() < r.norm()) {
                    g = trial;
                    r = rt;
                    break;
                }
            }
            t *= 0.5;
        }
    }
    best.converged = best.converged || (std::abs(best.frequency - target_freq_hz) < 0.05 &&
                                        std::abs(best.damping_ratio - target_damping) < 0.02);
    return best;
}

}  // namespace mma::modal
