#pragma once

// Malicious mode attack command stream: a cosine modulation of the
// aggregated charging load, which itself is a stationary random process.

#include <cstdint>
#include <span>
#include <vector>

#include "mma/core.hpp"

namespace mma::modal {
struct ModeInfo;
}

namespace mma::attack {

struct MmaCommand {
    double i_pct = 0.0;   // modulation ratio, 0.3 means 30 %
    double omega = 1.0;   // rad/s
    double phi = 0.0;     // rad
    double t_start = 0.0;
    double t_stop = 1e9;

    void validate() const;
    bool active(double t) const { return t >= t_start && t < t_stop; }
};

/// How the random part of the base load enters the command.
///  full:      p_ref = P_a0(t) (1 + I cos(wt + phi)), the random load rides on the mean
///  modulated: p_ref = mean (1 + I cos(wt + phi)) + dP(t) cos(wt + phi) inside the window,
///             i.e. only the modulated random component is kept (sigma is then the
///             standard deviation of the random modulation amplitude)
enum class Coupling { Full, Modulated };

struct LoadProcess {
    double mean = 0.0;         // pu
    double sigma = 0.0;        // pu
    double bandwidth_w = kTwoPi * 5.0;  // rad/s
    std::uint64_t seed = 1;
    Coupling coupling = Coupling::Full;

    void validate() const;
};

/// base_p (1 + i_pct cos(omega (t - t_start) + phi)) inside [t_start, t_stop), base_p outside.
double attack_reference(double t, double base_p, const MmaCommand& cmd);

/// Pile command for a given base-load sample, honouring the coupling mode.
double command_with_load(double t, double base_sample, const MmaCommand& cmd, const LoadProcess& load);

/// Band-limited Gaussian load on a uniform grid. White noise is passed
/// through a 4th-order Butterworth low-pass at the bandwidth (bilinear,
/// prewarped, two cascaded sections); a burn-in brings the filter to its
/// stationary distribution so the series has the target statistics from
/// the first sample.
std::vector<double> sample_base_load(const LoadProcess& process, std::span<const double> t_grid);

/// The attacker tunes the modulation to an observed mode.
MmaCommand attack_schedule_from_mode(const modal::ModeInfo& mode, double i_pct, double t_start, double t_stop);

/// Derive an independent stream seed for trial `index` of a batch.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace mma::attack
