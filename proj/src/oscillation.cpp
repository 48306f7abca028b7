#include "mma/oscillation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include <nlohmann/json.hpp>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/Polynomials>

namespace mma::osc {

namespace {

constexpr Complex kJ{0.0, 1.0};

Complex phi_psi(const modal::ModalDecomposition& dec, std::size_t k, std::size_t i) {
    return dec.phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) *
           dec.psi(static_cast<Eigen::Index>(i), 0);
}

// Carrier components of the modulation m(tau) = sum a_c e^{j nu_c tau}.
struct Carrier {
    Complex a;
    double nu;
};

std::vector<Carrier> carriers(const attack::MmaCommand& cmd, attack::Coupling coupling) {
    const Complex ep = std::polar(0.5, cmd.phi);
    if (coupling == attack::Coupling::Modulated) return {{ep, cmd.omega}, {std::conj(ep), -cmd.omega}};
    return {{1.0, 0.0}, {cmd.i_pct * ep, cmd.omega}, {cmd.i_pct * std::conj(ep), -cmd.omega}};
}

void check_stable(const modal::ModalDecomposition& dec) {
    for (Eigen::Index i = 0; i < dec.lambda.size(); ++i) {
        if (!(dec.lambda[i].real() < 0.0)) {
            throw NumericalError("variance: mode " + std::to_string(i) + " is not asymptotically stable");
        }
    }
}

void check_output(const modal::ModalDecomposition& dec, std::size_t output) {
    if (static_cast<Eigen::Index>(output) >= dec.phi.rows()) throw InputError("output index out of range");
}

}  // namespace

// ---------------------------------------------------------------- mean

MeanResponsePrediction mean_response(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd,
                                     double p_a0_mean, std::span<const double> t_grid) {
    cmd.validate();
    const auto n = static_cast<std::size_t>(dec.lambda.size());
    const auto m = static_cast<std::size_t>(dec.phi.rows());
    const double amp = cmd.i_pct * p_a0_mean;

    for (std::size_t i = 0; i < n; ++i) {
        const Complex l = dec.lambda[static_cast<Eigen::Index>(i)];
        if (std::abs(l - kJ * cmd.omega) < 1e-14 || std::abs(l + kJ * cmd.omega) < 1e-14) {
            throw NumericalError("mean response: undamped mode at the attack frequency");
        }
    }

    // Per-mode free coefficient f_i (multiplies e^{lambda tau}) and the
    // resonant coefficients r_i^{+-} (multiply e^{+-j omega tau}).
    std::vector<Complex> fcoef(n), rp(n), rm(n);
    const Complex ep = std::polar(1.0, cmd.phi);
    for (std::size_t i = 0; i < n; ++i) {
        const Complex l = dec.lambda[static_cast<Eigen::Index>(i)];
        const Complex s = 0.5 * amp * dec.psi(static_cast<Eigen::Index>(i), 0);
        const Complex gp = ep / (l - kJ * cmd.omega);
        const Complex gm = std::conj(ep) / (l + kJ * cmd.omega);
        fcoef[i] = s * (gp + gm);
        rp[i] = -s * gp;
        rm[i] = -s * gm;
    }

    MeanResponsePrediction out;
    out.time.assign(t_grid.begin(), t_grid.end());
    out.outputs = dec.output_labels;
    out.amplitude = amp;
    const auto nt = static_cast<Eigen::Index>(t_grid.size());
    out.free_component = MatrixXd::Zero(nt, static_cast<Eigen::Index>(m));
    out.resonant_component = MatrixXd::Zero(nt, static_cast<Eigen::Index>(m));
    out.a_coef.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    out.alpha.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    out.b_amp.resize(static_cast<Eigen::Index>(m));
    out.beta.resize(static_cast<Eigen::Index>(m));

    for (std::size_t k = 0; k < m; ++k) {
        Complex h{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            const Complex c = dec.phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) * fcoef[i];
            out.a_coef(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = std::abs(c);
            out.alpha(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = std::arg(c);
            h += dec.phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) * rp[i];
        }
        // Resonant part is 2 Re(h e^{j omega tau}) because the modes come in conjugate pairs.
        out.b_amp[static_cast<Eigen::Index>(k)] = 2.0 * std::abs(h);
        out.beta[static_cast<Eigen::Index>(k)] = std::arg(h);
    }

    for (Eigen::Index r = 0; r < nt; ++r) {
        const double t = t_grid[static_cast<std::size_t>(r)];
        if (t < cmd.t_start) continue;
        const double tau = std::min(t, cmd.t_stop) - cmd.t_start;
        const double after = t > cmd.t_stop ? t - cmd.t_stop : 0.0;
        const Complex wp = std::polar(1.0, cmd.omega * tau);
        for (std::size_t i = 0; i < n; ++i) {
            const Complex l = dec.lambda[static_cast<Eigen::Index>(i)];
            const Complex el = std::exp(l * tau);
            const Complex zf = fcoef[i] * el;
            const Complex zr = rp[i] * wp + rm[i] * std::conj(wp);
            const Complex decay = after > 0.0 ? std::exp(l * after) : Complex(1.0, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
                const Complex ph = dec.phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
                if (after > 0.0) {
                    // Window closed: the state at t_stop decays freely.
                    out.free_component(r, static_cast<Eigen::Index>(k)) += (ph * (zf + zr) * decay).real();
                } else {
                    out.free_component(r, static_cast<Eigen::Index>(k)) += (ph * zf).real();
                    out.resonant_component(r, static_cast<Eigen::Index>(k)) += (ph * zr).real();
                }
            }
        }
    }
    out.total = out.free_component + out.resonant_component;
    return out;
}

VectorXd frequency_response_magnitude(const modal::ModalDecomposition& dec, double omega) {
    const auto m = dec.phi.rows();
    VectorXd out(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        Complex h{0.0, 0.0};
        for (Eigen::Index i = 0; i < dec.lambda.size(); ++i) {
            h += dec.phi(k, i) * dec.psi(i, 0) / (kJ * omega - dec.lambda[i]);
        }
        out[k] = std::abs(h);
    }
    return out;
}

// ------------------------------------------------------------ variance

std::vector<double> VariancePrediction::total() const {
    std::vector<double> t(srs.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = srs[i] + cqc[i];
    return t;
}

VariancePrediction variance_pem(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd, double sigma,
                                double w_bandwidth, std::span<const double> t_grid, std::size_t output,
                                const VarianceOptions& opts) {
    cmd.validate();
    check_output(dec, output);
    if (!(sigma >= 0.0)) throw InputError("variance: sigma must be >= 0");
    if (!(w_bandwidth > 0.0)) throw InputError("variance: bandwidth must be positive");
    check_stable(dec);

    VariancePrediction out;
    out.time.assign(t_grid.begin(), t_grid.end());
    out.output = output < dec.output_labels.size() ? dec.output_labels[output] : std::to_string(output);
    out.srs.assign(t_grid.size(), 0.0);
    out.cqc.assign(t_grid.size(), 0.0);

    const auto n = static_cast<std::size_t>(dec.lambda.size());
    const auto car = carriers(cmd, opts.coupling);

    // Pair set: ordered cross pairs whose frequency offset matches a carrier difference.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dw = dec.lambda[static_cast<Eigen::Index>(i)].imag() -
                              dec.lambda[static_cast<Eigen::Index>(j)].imag();
            bool hit = false;
            for (const auto& a : car) {
                for (const auto& b : car) {
                    if (&a != &b && std::abs(dw - (a.nu - b.nu)) < opts.tol_pair) hit = true;
                }
            }
            if (!hit && !opts.all_pairs) continue;
            out.pairs.emplace_back(i, j);
            const Complex ci = phi_psi(dec, output, i), cj = phi_psi(dec, output, j);
            out.xi.push_back(std::conj(ci) * cj);
        }
    }
    if (sigma == 0.0) return out;

    // Spectral grid: coarse over the load band plus dense patches at every
    // lightly damped resonance.
    const double om_max = 4.0 * w_bandwidth;
    std::vector<double> grid;
    for (double o = -om_max; o <= om_max; o += opts.coarse_step) grid.push_back(o);
    for (std::size_t i = 0; i < n; ++i) {
        const Complex l = dec.lambda[static_cast<Eigen::Index>(i)];
        const double width = std::abs(l.real());
        if (width > 20.0 * opts.coarse_step) continue;
        const double step = width / opts.grid_per_width;
        for (const auto& c : car) {
            const double centre = l.imag() - c.nu;
            if (std::abs(centre) > om_max) continue;
            for (double o = centre - 10.0 * width; o <= centre + 10.0 * width; o += step) {
                if (std::abs(o) <= om_max) grid.push_back(o);
            }
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               grid.end());
    const std::size_t ng = grid.size();

    // Trapezoid weights times the two-sided Butterworth spectrum scaled to sigma^2.
    const double norm = 2.0 * w_bandwidth * (kPi / 8.0) / std::sin(kPi / 8.0);
    std::vector<double> wts(ng, 0.0);
    for (std::size_t g = 0; g < ng; ++g) {
        const double lo = g > 0 ? grid[g - 1] : grid[g];
        const double hi = g + 1 < ng ? grid[g + 1] : grid[g];
        const double s = sigma * sigma / norm / (1.0 + std::pow(grid[g] / w_bandwidth, 8));
        wts[g] = 0.5 * (hi - lo) * s;
    }

    // Modes that carry the output.
    std::vector<std::size_t> active;
    double cmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) cmax = std::max(cmax, std::abs(phi_psi(dec, output, i)));
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(phi_psi(dec, output, i)) > 1e-14 * cmax) active.push_back(i);
    }
    std::vector<std::size_t> slot(n, n);
    for (std::size_t a = 0; a < active.size(); ++a) slot[active[a]] = a;

    const std::size_t na = active.size(), nc = car.size();
    // Time-independent inverse denominators 1 / (j(Omega + nu_c) - lambda_i).
    std::vector<Complex> dinv(ng * na * nc);
    for (std::size_t g = 0; g < ng; ++g) {
        for (std::size_t a = 0; a < na; ++a) {
            const Complex l = dec.lambda[static_cast<Eigen::Index>(active[a])];
            for (std::size_t c = 0; c < nc; ++c) {
                dinv[(g * na + a) * nc + c] = 1.0 / (kJ * (grid[g] + car[c].nu) - l);
            }
        }
    }
    std::vector<Complex> coef(na);
    for (std::size_t a = 0; a < na; ++a) coef[a] = phi_psi(dec, output, active[a]);

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<Complex> pair_xi;
    for (std::size_t p = 0; p < out.pairs.size(); ++p) {
        const auto [i, j] = out.pairs[p];
        if (slot[i] < na && slot[j] < na) {
            pairs.emplace_back(slot[i], slot[j]);
            pair_xi.push_back(out.xi[p]);
        }
    }

    const auto nt = static_cast<long>(t_grid.size());
#pragma omp parallel for schedule(dynamic)
    for (long r = 0; r < nt; ++r) {
        const double t = t_grid[static_cast<std::size_t>(r)];
        if (t <= cmd.t_start) continue;
        const double tau = std::min(t, cmd.t_stop) - cmd.t_start;
        std::vector<Complex> el(na), ec(nc), ii(na);
        for (std::size_t a = 0; a < na; ++a) el[a] = std::exp(dec.lambda[static_cast<Eigen::Index>(active[a])] * tau);
        for (std::size_t c = 0; c < nc; ++c) ec[c] = car[c].a * std::polar(1.0, car[c].nu * tau);
        double srs = 0.0, cqc = 0.0;
        for (std::size_t g = 0; g < ng; ++g) {
            const Complex eo = std::polar(1.0, grid[g] * tau);
            double s_g = 0.0;
            Complex y{0.0, 0.0};
            for (std::size_t a = 0; a < na; ++a) {
                Complex v{0.0, 0.0};
                const Complex* d = &dinv[(g * na + a) * nc];
                for (std::size_t c = 0; c < nc; ++c) v += d[c] * (eo * ec[c] - car[c].a * el[a]);
                ii[a] = v;
                s_g += std::norm(coef[a] * v);
                y += coef[a] * v;
            }
            double c_g = 0.0;
            if (opts.all_pairs) {
                // Every cross pair: |sum|^2 minus the diagonal.
                c_g = std::norm(y) - s_g;
            } else {
                for (std::size_t p = 0; p < pairs.size(); ++p) {
                    c_g += (pair_xi[p] * std::conj(ii[pairs[p].first]) * ii[pairs[p].second]).real();
                }
            }
            srs += wts[g] * s_g;
            cqc += wts[g] * c_g;
        }
        out.srs[static_cast<std::size_t>(r)] = srs;
        out.cqc[static_cast<std::size_t>(r)] = cqc;
    }
    return out;
}

std::vector<double> variance_srs(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd, double sigma,
                                 double w_bandwidth, std::span<const double> t_grid, std::size_t output,
                                 const VarianceOptions& opts) {
    return variance_pem(dec, cmd, sigma, w_bandwidth, t_grid, output, opts).srs;
}

std::vector<double> variance_cqc(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd, double sigma,
                                 double w_bandwidth, std::span<const double> t_grid, std::size_t output,
                                 const VarianceOptions& opts) {
    return variance_pem(dec, cmd, sigma, w_bandwidth, t_grid, output, opts).cqc;
}

std::vector<double> variance_srs_resonant(const modal::ModalDecomposition& dec, double sigma, double w_bandwidth,
                                          std::span<const double> t_grid, std::size_t output) {
    check_output(dec, output);
    check_stable(dec);
    std::vector<double> out(t_grid.size(), 0.0);
    const double s = sigma * sigma / (2.0 * w_bandwidth);
    for (std::size_t r = 0; r < t_grid.size(); ++r) {
        const double t = std::max(0.0, t_grid[r]);
        double v = 0.0;
        for (Eigen::Index i = 0; i < dec.lambda.size(); ++i) {
            const double a = dec.lambda[i].real();
            const double g = (1.0 - std::exp(a * t)) / a;
            v += std::norm(phi_psi(dec, output, static_cast<std::size_t>(i))) * g * g;
        }
        out[r] = s * v;
    }
    return out;
}

std::vector<double> variance_cqc_resonant(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd,
                                          double sigma, double w_bandwidth, std::span<const double> t_grid,
                                          std::size_t output, double tol_pair) {
    check_output(dec, output);
    check_stable(dec);
    std::vector<double> out(t_grid.size(), 0.0);
    const double s = sigma * sigma / (2.0 * w_bandwidth);
    for (Eigen::Index i = 0; i < dec.lambda.size(); ++i) {
        for (Eigen::Index j = 0; j < dec.lambda.size(); ++j) {
            if (i == j) continue;
            if (std::abs(dec.lambda[i].imag() - dec.lambda[j].imag() - 2.0 * cmd.omega) >= tol_pair) continue;
            const Complex xi = std::conj(phi_psi(dec, output, static_cast<std::size_t>(i))) *
                               phi_psi(dec, output, static_cast<std::size_t>(j));
            const double a = dec.lambda[i].real();
            for (std::size_t r = 0; r < t_grid.size(); ++r) {
                const double t = std::max(0.0, t_grid[r]);
                const double g = (1.0 - std::exp(a * t)) / a;
                out[r] += s * std::abs(xi) * g * g * std::cos(2.0 * cmd.omega * t - std::arg(xi));
            }
        }
    }
    return out;
}

// --------------------------------------------------------- Monte Carlo

namespace {

template <class Trial>
MonteCarloResult reduce_trials(std::size_t n_trials, modal::Execution exec, const Trial& trial) {
    if (n_trials < 2) throw InputError("monte carlo: need at least two trials");
    std::vector<std::vector<double>> runs(n_trials);
    std::vector<std::exception_ptr> errors(n_trials);
    const auto n = static_cast<long>(n_trials);
    auto body = [&](long i) {
        try {
            runs[static_cast<std::size_t>(i)] = trial(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    };
    if (exec == modal::Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (long i = 0; i < n; ++i) body(i);
    } else {
        for (long i = 0; i < n; ++i) body(i);
    }
    for (std::size_t i = 0; i < n_trials; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const DivergenceError& e) {
            throw DivergenceError("monte carlo trial " + std::to_string(i) + ": " + e.what(), e.time());
        } catch (const std::exception& e) {
            throw NumericalError("monte carlo trial " + std::to_string(i) + ": " + e.what());
        }
    }
    // Welford in trial order.
    MonteCarloResult out;
    out.n_trials = n_trials;
    const std::size_t len = runs[0].size();
    out.mean.assign(len, 0.0);
    std::vector<double> m2(len, 0.0);
    for (std::size_t i = 0; i < n_trials; ++i) {
        if (runs[i].size() != len) throw NumericalError("monte carlo: trial lengths differ");
        const double k = static_cast<double>(i + 1);
        for (std::size_t r = 0; r < len; ++r) {
            const double d = runs[i][r] - out.mean[r];
            out.mean[r] += d / k;
            m2[r] += d * (runs[i][r] - out.mean[r]);
        }
    }
    out.variance.resize(len);
    for (std::size_t r = 0; r < len; ++r) out.variance[r] = m2[r] / static_cast<double>(n_trials - 1);
    return out;
}

}  // namespace

MonteCarloResult monte_carlo_variance(const sim::SimCase& base, const sim::SimConfig& cfg,
                                      const std::string& channel, std::size_t n_trials, std::uint64_t seed,
                                      modal::Execution exec) {
    sim::SimConfig c = cfg;
    c.record_signals = {channel};
    std::vector<double> time;
    auto trial = [&](std::size_t i) {
        sim::SimCase sc = base;
        sc.load.seed = attack::derive_seed(seed, i);
        auto tr = sim::simulate(sc, c);
        return tr.data[0];
    };
    auto out = reduce_trials(n_trials, exec, trial);
    {
        sim::SimCase sc = base;
        sim::SimConfig c0 = c;
        sc.load.sigma = 0.0;
        c0.t_end = c.t_end;
        // Time axis: same grid as every trial.
        const long n_steps = std::lround(c.t_end / c.dt);
        for (long k = 0; k <= n_steps; ++k) {
            if (k % c.record_every == 0 || k == n_steps) out.time.push_back(static_cast<double>(k) * c.dt);
        }
    }
    out.channel = channel;
    return out;
}

MatrixXd linear_response(const modal::LinearModel& model, const std::function<double(double)>& u, double dt,
                         double t_end, int record_every) {
    model.validate();
    const long n_steps = std::lround(t_end / dt);
    const auto n = model.a.rows();
    VectorXd x = VectorXd::Zero(n);
    const VectorXd b = model.b.col(0);
    const VectorXd d = model.d.col(0);
    const long n_rec = n_steps / record_every + 1 + (n_steps % record_every != 0 ? 1 : 0);
    MatrixXd y(n_rec, model.c.rows());
    long row = 0;
    VectorXd k1(n), k2(n), k3(n), k4(n);
    for (long k = 0; k <= n_steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        if (k % record_every == 0 || k == n_steps) y.row(row++) = (model.c * x + d * u(t)).transpose();
        if (k == n_steps) break;
        const double um = u(t + 0.5 * dt);
        k1 = model.a * x + b * u(t);
        k2 = model.a * (x + 0.5 * dt * k1) + b * um;
        k3 = model.a * (x + 0.5 * dt * k2) + b * um;
        k4 = model.a * (x + dt * k3) + b * u(t + dt);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

MonteCarloResult monte_carlo_variance_linear(const modal::LinearModel& model, const attack::MmaCommand& cmd,
                                             const attack::LoadProcess& load, double dt, double t_end,
                                             std::size_t output, std::size_t n_trials, std::uint64_t seed,
                                             modal::Execution exec, int record_every) {
    if (static_cast<Eigen::Index>(output) >= model.c.rows()) throw InputError("output index out of range");
    const long n_steps = std::lround(t_end / dt);
    std::vector<double> grid(static_cast<std::size_t>(n_steps) + 1);
    for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = static_cast<double>(k) * dt;
    auto trial = [&](std::size_t i) {
        attack::LoadProcess lp = load;
        lp.seed = attack::derive_seed(seed, i);
        const auto base = lp.sigma > 0.0 ? attack::sample_base_load(lp, grid) : std::vector<double>(grid.size(), lp.mean);
        auto u = [&](double t) {
            const auto k = std::min<std::size_t>(static_cast<std::size_t>(t / dt + 1e-9), grid.size() - 1);
            return attack::command_with_load(t, base[k], cmd, lp) - lp.mean;
        };
        const MatrixXd y = linear_response(model, u, dt, t_end, record_every);
        const VectorXd col = y.col(static_cast<Eigen::Index>(output));
        return std::vector<double>(col.data(), col.data() + col.size());
    };
    auto out = reduce_trials(n_trials, exec, trial);
    for (long k = 0; k <= n_steps; ++k) {
        if (k % record_every == 0 || k == n_steps) out.time.push_back(static_cast<double>(k) * dt);
    }
    out.channel = output < model.output_labels.size() ? model.output_labels[output] : std::to_string(output);
    return out;
}

// --------------------------------------------------------------- Prony

PronyResult prony_identify(std::span<const double> signal, double dt, int model_order) {
    const auto n = static_cast<Eigen::Index>(signal.size());
    if (model_order < 1) throw InputError("prony: model order must be >= 1");
    if (3 * model_order > n) throw InputError("prony: model order exceeds a third of the record length");
    if (!(dt > 0.0)) throw InputError("prony: dt must be positive");

    const Eigen::Map<const VectorXd> x(signal.data(), n);
    PronyResult out;
    int p = model_order;
    VectorXd coef;
    for (;;) {
        MatrixXd h(n - p, p);
        VectorXd rhs(n - p);
        for (Eigen::Index r = 0; r < n - p; ++r) {
            for (int k = 0; k < p; ++k) h(r, k) = x[r + p - 1 - k];
            rhs[r] = -x[r + p];
        }
        Eigen::BDCSVD<MatrixXd> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-10);
        const auto rank = static_cast<int>(svd.rank());
        if (rank == 0) {
            out.order = 0;
            out.fit_residual = x.norm() > 0.0 ? 1.0 : 0.0;
            out.warnings.push_back("prediction matrix has rank 0");
            return out;
        }
        if (rank < p) {
            out.warnings.push_back("rank deficient at order " + std::to_string(p) + ", reduced to " +
                                   std::to_string(rank));
            p = rank;
            continue;
        }
        coef = svd.solve(rhs);
        break;
    }
    out.order = p;

    // Roots of z^p + a1 z^{p-1} + ... + ap (PolynomialSolver wants ascending coefficients).
    VectorXd poly(p + 1);
    for (int k = 0; k < p; ++k) poly[k] = coef[p - 1 - k];
    poly[p] = 1.0;
    Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(poly);
    std::vector<Complex> roots;
    for (Eigen::Index k = 0; k < solver.roots().size(); ++k) {
        if (std::abs(solver.roots()[k]) > 1e-12) roots.push_back(solver.roots()[k]);
    }
    const auto nr = static_cast<Eigen::Index>(roots.size());
    MatrixXc v(n, nr);
    for (Eigen::Index k = 0; k < nr; ++k) {
        Complex zk(1.0, 0.0);
        for (Eigen::Index r = 0; r < n; ++r) {
            v(r, k) = zk;
            zk *= roots[static_cast<std::size_t>(k)];
        }
    }
    const VectorXc amp = v.colPivHouseholderQr().solve(x.cast<Complex>());
    const VectorXd fit = (v * amp).real();
    const double xn = x.norm();
    out.fit_residual = xn > 0.0 ? (x - fit).norm() / xn : 0.0;

    for (Eigen::Index k = 0; k < nr; ++k) {
        const Complex z = roots[static_cast<std::size_t>(k)];
        const Complex l = std::log(z) / dt;
        if (l.imag() < -1e-12) continue;
        PronyMode m;
        m.lambda = l;
        m.frequency = l.imag() / kTwoPi;
        m.damping_ratio = std::abs(l) > 0.0 ? -l.real() / std::abs(l) : 0.0;
        const bool osc = l.imag() > 1e-12;
        m.amplitude = (osc ? 2.0 : 1.0) * std::abs(amp[k]);
        m.phase = std::arg(amp[k]);
        out.modes.push_back(m);
    }
    std::sort(out.modes.begin(), out.modes.end(),
              [](const PronyMode& a, const PronyMode& b) { return a.amplitude > b.amplitude; });
    return out;
}

const PronyMode& dominant_mode(const PronyResult& r, double f_lo, double f_hi) {
    for (const auto& m : r.modes) {
        if (m.frequency >= f_lo && m.frequency <= f_hi) return m;
    }
    throw NumericalError("prony: no mode inside the requested band");
}

// ----------------------------------------------------- signal measures

namespace {

std::pair<std::size_t, std::size_t> window_index(std::span<const double> time, double t0, double t1) {
    const auto lo = static_cast<std::size_t>(std::lower_bound(time.begin(), time.end(), t0 - 1e-12) - time.begin());
    const auto hi = static_cast<std::size_t>(std::upper_bound(time.begin(), time.end(), t1 + 1e-12) - time.begin());
    if (hi <= lo + 1) throw InputError("signal window is empty");
    return {lo, hi};
}

}  // namespace

double sinusoid_amplitude(std::span<const double> time, std::span<const double> x, double omega, double t0,
                          double t1) {
    const auto [lo, hi] = window_index(time, t0, t1);
    const auto m = static_cast<Eigen::Index>(hi - lo);
    MatrixXd a(m, 3);
    VectorXd b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const double t = time[lo + static_cast<std::size_t>(r)];
        a(r, 0) = 1.0;
        a(r, 1) = std::cos(omega * t);
        a(r, 2) = std::sin(omega * t);
        b[r] = x[lo + static_cast<std::size_t>(r)];
    }
    const VectorXd c = a.colPivHouseholderQr().solve(b);
    return std::hypot(c[1], c[2]);
}

double half_peak_to_peak(std::span<const double> time, std::span<const double> x, double t0, double t1) {
    const auto [lo, hi] = window_index(time, t0, t1);
    const auto [mn, mx] = std::minmax_element(x.begin() + static_cast<long>(lo), x.begin() + static_cast<long>(hi));
    return 0.5 * (*mx - *mn);
}

std::vector<std::pair<double, double>> block_envelope(std::span<const double> time, std::span<const double> x,
                                                      double t0, double t1, double block) {
    std::vector<std::pair<double, double>> out;
    for (double a = t0; a + block <= t1 + 1e-9; a += block) {
        out.emplace_back(a + 0.5 * block, half_peak_to_peak(time, x, a, a + block));
    }
    return out;
}

double beat_frequency(std::span<const double> time, std::span<const double> x, double t0, double t1,
                      double carrier_hz) {
    const auto env = block_envelope(time, x, t0, t1, 1.0 / carrier_hz);
    if (env.size() < 9) return 0.0;
    VectorXd e(static_cast<Eigen::Index>(env.size()));
    for (std::size_t i = 0; i < env.size(); ++i) e[static_cast<Eigen::Index>(i)] = env[i].second;
    e.array() -= e.mean();
    std::vector<double> ev(e.data(), e.data() + e.size());
    const double step = 1.0 / carrier_hz;
    const int order = std::min<int>(6, static_cast<int>(ev.size() / 3));
    const auto pr = prony_identify(ev, step, order);
    for (const auto& m : pr.modes) {
        if (m.frequency > 1e-3 && m.frequency < 0.5 * carrier_hz) return m.frequency;
    }
    return 0.0;
}

double dominant_line(std::span<const double> x, double dt, double* bin_hz) {
    std::vector<double> v(x.begin(), x.end());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (double& e : v) e -= mean;
    Eigen::FFT<double> fft;
    std::vector<Complex> spec;
    fft.fwd(spec, v);
    const double df = 1.0 / (dt * static_cast<double>(v.size()));
    if (bin_hz) *bin_hz = df;
    std::size_t best = 1;
    for (std::size_t k = 1; k <= v.size() / 2; ++k) {
        if (std::abs(spec[k]) > std::abs(spec[best])) best = k;
    }
    return static_cast<double>(best) * df;
}

double shape_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InputError("shape correlation: length mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return std::abs(ab) / std::sqrt(aa * bb);
}

// ---------------------------------------------------------------- laws

std::vector<LawResult> law_checks(const LawInputs& in) {
    std::vector<LawResult> out;
    {
        LawResult r;
        r.law = 1;
        r.applicable = in.mean_amplitude > 0.0 || in.stochastic_std > 0.0;
        r.pass = r.applicable && in.mean_amplitude > 3.0 * in.stochastic_std;
        r.detail = "mean amplitude " + std::to_string(in.mean_amplitude) + " vs stochastic std " +
                   std::to_string(in.stochastic_std);
        out.push_back(r);
    }
    {
        LawResult r;
        r.law = 2;
        r.applicable = in.dampings.size() >= 2 && in.dampings.size() == in.damping_amplitudes.size();
        if (r.applicable) {
            std::vector<std::size_t> idx(in.dampings.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return in.dampings[a] > in.dampings[b]; });
            r.pass = true;
            for (std::size_t k = 1; k < idx.size(); ++k) {
                if (!(in.damping_amplitudes[idx[k]] > in.damping_amplitudes[idx[k - 1]])) r.pass = false;
            }
        }
        r.detail = "amplitude must grow as target-mode damping falls";
        out.push_back(r);
    }
    const std::size_t nf = in.attack_frequencies.size();
    std::size_t on_mode = nf;
    for (std::size_t k = 0; k < nf; ++k) {
        if (on_mode == nf || std::abs(in.attack_frequencies[k] - in.mode_frequency) <
                                 std::abs(in.attack_frequencies[on_mode] - in.mode_frequency)) {
            on_mode = k;
        }
    }
    {
        LawResult r;
        r.law = 3;
        r.applicable = nf >= 2 && in.frequency_amplitudes.size() == nf;
        if (r.applicable) {
            r.pass = true;
            for (std::size_t k = 0; k < nf; ++k) {
                if (k == on_mode) continue;
                if (!(in.frequency_amplitudes[on_mode] > in.frequency_amplitudes[k])) r.pass = false;
                if (in.shape_correlations.size() == nf &&
                    !(in.shape_correlations[on_mode] >= in.shape_correlations[k])) {
                    r.pass = false;
                }
            }
        }
        r.detail = "amplitude and shape correlation maximal at the mode frequency";
        out.push_back(r);
    }
    {
        LawResult r;
        r.law = 4;
        r.applicable = false;
        r.pass = true;
        std::string detail;
        for (std::size_t k = 0; k < nf && k < in.beat_frequencies.size(); ++k) {
            const double expect = std::abs(in.attack_frequencies[k] - in.mode_frequency);
            if (k == on_mode || expect < 1e-6) continue;
            r.applicable = true;
            const double got = in.beat_frequencies[k];
            if (!(std::abs(got - expect) <= 0.2 * expect)) r.pass = false;
            detail += "f=" + std::to_string(in.attack_frequencies[k]) + " beat " + std::to_string(got) +
                      " expected " + std::to_string(expect) + "; ";
        }
        if (!r.applicable) r.pass = false;
        r.detail = r.applicable ? detail : "no detuned attack";
        out.push_back(r);
    }
    {
        LawResult r;
        r.law = 5;
        r.applicable = in.variance.size() >= 8 && in.variance_dt > 0.0 && in.attack_frequency > 0.0;
        if (r.applicable) {
            double bin = 0.0;
            const double f = dominant_line(in.variance, in.variance_dt, &bin);
            r.pass = std::abs(f - 2.0 * in.attack_frequency) <= bin * 1.0000001;
            r.detail = "dominant variance line " + std::to_string(f) + " Hz, expected " +
                       std::to_string(2.0 * in.attack_frequency) + " Hz, bin " + std::to_string(bin);
        }
        out.push_back(r);
    }
    return out;
}

nlohmann::json laws_to_json(const std::vector<LawResult>& r) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& l : r) {
        j.push_back({{"law", l.law}, {"applicable", l.applicable}, {"pass", l.pass}, {"detail", l.detail}});
    }
    return j;
}

}  // namespace mma::osc
