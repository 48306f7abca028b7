#pragma once

// Forced-oscillation analysis: closed-form mean response of the modal
// model, pseudo-excitation variance (single-mode and cross-mode terms),
// Monte Carlo cross-checks, Prony identification and the response laws.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mma/attack.hpp"
#include "mma/core.hpp"
#include "mma/modal.hpp"
#include "mma/simulate.hpp"

namespace mma::osc {

// ---------------------------------------------------------------- mean

/// Response of the linear model, started at rest at t_start, to
/// u(t) = i_pct p_a0_mean cos(omega (t - t_start) + phi) inside the window.
/// Matrices are time x output.
struct MeanResponsePrediction {
    std::vector<double> time;
    std::vector<std::string> outputs;
    MatrixXd free_component;
    MatrixXd resonant_component;
    MatrixXd total;
    double amplitude = 0.0;  // input amplitude i_pct * p_a0_mean
    MatrixXd a_coef;         // output x mode: |free coefficient|
    MatrixXd alpha;          // output x mode: phase of free coefficient
    VectorXd b_amp;          // per output: steady resonant amplitude
    VectorXd beta;           // per output: steady resonant phase
};

MeanResponsePrediction mean_response(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd,
                                     double p_a0_mean, std::span<const double> t_grid);

/// Steady amplitude |H_k(j omega)| per unit input amplitude for each output.
VectorXd frequency_response_magnitude(const modal::ModalDecomposition& dec, double omega);

// ------------------------------------------------------------ variance

/// How the random part of the load enters the input: `modulated` drives
/// u = dP(t) cos(wt + phi); `full` drives u = dP(t) (1 + I cos(wt + phi)).
struct VarianceOptions {
    attack::Coupling coupling = attack::Coupling::Modulated;
    double tol_pair = 0.05;      // rad/s, pair-set tolerance
    int grid_per_width = 24;     // spectral samples per modal half-width near resonance
    double coarse_step = 0.05;   // rad/s elsewhere
    bool all_pairs = false;      // CQC over every cross pair: the exact variance integral
};

struct VariancePrediction {
    std::vector<double> time;
    std::string output;
    std::vector<double> srs;
    std::vector<double> cqc;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // the pair set
    std::vector<Complex> xi;                                 // xi_ij per pair

    std::vector<double> total() const;
};

/// Pseudo-excitation variance of output `output` for a stationary load of
/// standard deviation `sigma` and 4th-order Butterworth spectrum of
/// bandwidth `w_bandwidth`, switched on at cmd.t_start. The spectral
/// integral is evaluated by quadrature; srs collects the i = j terms and
/// cqc the cross terms over the pair set.
VariancePrediction variance_pem(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd, double sigma,
                                double w_bandwidth, std::span<const double> t_grid, std::size_t output,
                                const VarianceOptions& opts = {});

std::vector<double> variance_srs(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd, double sigma,
                                 double w_bandwidth, std::span<const double> t_grid, std::size_t output,
                                 const VarianceOptions& opts = {});
std::vector<double> variance_cqc(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd, double sigma,
                                 double w_bandwidth, std::span<const double> t_grid, std::size_t output,
                                 const VarianceOptions& opts = {});

/// The resonance-point closed forms: single-mode term
/// sigma^2 / (2W) sum |Phi|^2 |Psi|^2 (1 - e^{alpha t})^2 / alpha^2 and the
/// 2 omega cross term over the pair set.
std::vector<double> variance_srs_resonant(const modal::ModalDecomposition& dec, double sigma, double w_bandwidth,
                                          std::span<const double> t_grid, std::size_t output);
std::vector<double> variance_cqc_resonant(const modal::ModalDecomposition& dec, const attack::MmaCommand& cmd,
                                          double sigma, double w_bandwidth, std::span<const double> t_grid,
                                          std::size_t output, double tol_pair = 0.05);

// --------------------------------------------------------- Monte Carlo

struct MonteCarloResult {
    std::vector<double> time;
    std::string channel;
    std::vector<double> mean;
    std::vector<double> variance;  // unbiased
    std::size_t n_trials = 0;
};

/// Run `n_trials` simulations with load seeds derived from `seed` and
/// reduce pointwise in trial order, so both execution modes agree bitwise.
MonteCarloResult monte_carlo_variance(const sim::SimCase& base, const sim::SimConfig& cfg,
                                      const std::string& channel, std::size_t n_trials, std::uint64_t seed,
                                      modal::Execution exec = modal::Execution::Parallel);

/// Same statistics for the linear model driven through its input by the
/// attack command with the random load, integrated with RK4 at `dt`.
MonteCarloResult monte_carlo_variance_linear(const modal::LinearModel& model, const attack::MmaCommand& cmd,
                                             const attack::LoadProcess& load, double dt, double t_end,
                                             std::size_t output, std::size_t n_trials, std::uint64_t seed,
                                             modal::Execution exec = modal::Execution::Parallel,
                                             int record_every = 1);

/// Linear simulation of dx = A x + B u(t), y = C x + D u from rest.
/// Returns outputs at the grid points (time x output).
MatrixXd linear_response(const modal::LinearModel& model, const std::function<double(double)>& u, double dt,
                         double t_end, int record_every = 1);

// --------------------------------------------------------------- Prony

struct PronyMode {
    double frequency = 0.0;  // Hz
    double damping_ratio = 0.0;
    double amplitude = 0.0;  // real-signal amplitude
    double phase = 0.0;      // rad
    Complex lambda{0.0, 0.0};
};

struct PronyResult {
    std::vector<PronyMode> modes;  // sorted by amplitude, positive-frequency members only
    double fit_residual = 1.0;
    int order = 0;
    std::vector<std::string> warnings;
};

/// Classical Prony: linear prediction by least squares, polynomial roots,
/// continuous-time mapping and an amplitude/phase fit.
PronyResult prony_identify(std::span<const double> signal, double dt, int model_order);

/// Dominant oscillatory mode within [f_lo, f_hi]; throws if none.
const PronyMode& dominant_mode(const PronyResult& r, double f_lo, double f_hi);

// ----------------------------------------------------- signal measures

/// Least-squares fit of c + a cos(w t) + b sin(w t) over [t0, t1];
/// returns the amplitude sqrt(a^2 + b^2).
double sinusoid_amplitude(std::span<const double> time, std::span<const double> x, double omega, double t0,
                          double t1);

/// Half the peak-to-peak excursion over [t0, t1].
double half_peak_to_peak(std::span<const double> time, std::span<const double> x, double t0, double t1);

/// Envelope of the oscillation: half peak-to-peak in consecutive blocks of
/// length `block` seconds. Returns (block centre, value) pairs.
std::vector<std::pair<double, double>> block_envelope(std::span<const double> time, std::span<const double> x,
                                                      double t0, double t1, double block);

/// Beat frequency of the envelope (Hz), from a Prony fit of the
/// detrended envelope; 0 when no modulation is found.
double beat_frequency(std::span<const double> time, std::span<const double> x, double t0, double t1,
                      double carrier_hz);

/// Periodogram peak (Hz) of a uniformly sampled series, ignoring DC;
/// `bin_hz` receives the frequency resolution.
double dominant_line(std::span<const double> x, double dt, double* bin_hz = nullptr);

/// Normalised correlation |<a, b>| / (|a| |b|) of two real vectors.
double shape_correlation(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------- laws

struct LawResult {
    int law = 0;
    bool applicable = true;
    bool pass = false;
    std::string detail;
};

struct LawInputs {
    // Law 1: steady mean amplitude against stochastic standard deviation.
    double mean_amplitude = 0.0;
    double stochastic_std = 0.0;
    // Law 2: target-mode damping ratios and the matching steady amplitudes.
    std::vector<double> dampings;
    std::vector<double> damping_amplitudes;
    // Law 3: attack frequencies, steady amplitudes and shape correlations.
    double mode_frequency = 0.0;
    std::vector<double> attack_frequencies;
    std::vector<double> frequency_amplitudes;
    std::vector<double> shape_correlations;
    // Law 4: measured beat frequency per detuned attack (parallel to attack_frequencies; 0 if not measured).
    std::vector<double> beat_frequencies;
    // Law 5: variance series sampled at dt and the attack frequency.
    std::vector<double> variance;
    double variance_dt = 0.0;
    double attack_frequency = 0.0;
};

std::vector<LawResult> law_checks(const LawInputs& in);
nlohmann::json laws_to_json(const std::vector<LawResult>& r);

}  // namespace mma::osc
