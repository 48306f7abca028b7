#include "mma/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mma/modal.hpp"

namespace mma::attack {

void MmaCommand::validate() const {
    if (!(i_pct >= 0.0 && i_pct <= 1.0)) throw InputError("attack: i_pct must lie in [0, 1]");
    if (!(omega > 0.0)) throw InputError("attack: frequency must be positive");
    if (!(t_stop > t_start)) throw InputError("attack: t_stop must exceed t_start");
}

void LoadProcess::validate() const {
    if (!(sigma >= 0.0)) throw InputError("load_process: sigma must be >= 0");
    if (!(bandwidth_w > 0.0)) throw InputError("load_process: bandwidth must be positive");
}

double attack_reference(double t, double base_p, const MmaCommand& cmd) {
    if (!cmd.active(t)) return base_p;
    return base_p * (1.0 + cmd.i_pct * std::cos(cmd.omega * (t - cmd.t_start) + cmd.phi));
}

double command_with_load(double t, double base_sample, const MmaCommand& cmd, const LoadProcess& load) {
    if (load.coupling == Coupling::Full) return attack_reference(t, base_sample, cmd);
    if (!cmd.active(t)) return load.mean;
    const double c = std::cos(cmd.omega * (t - cmd.t_start) + cmd.phi);
    return load.mean * (1.0 + cmd.i_pct * c) + (base_sample - load.mean) * c;
}

namespace {

// One bilinear-mapped second-order low-pass section, transposed direct form II.
struct Biquad {
    double b0 = 0.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
    double z1 = 0.0, z2 = 0.0;

    double step(double u) {
        const double y = b0 * u + z1;
        z1 = b1 * u - a1 * y + z2;
        z2 = b2 * u - a2 * y;
        return y;
    }
};

// 4th-order Butterworth as two cascaded sections with the cut-off prewarped.
struct Butterworth4 {
    Biquad s[2];

    Butterworth4(double wc, double dt) {
        const double k = std::tan(wc * dt / 2.0);
        const double q_inv[2] = {2.0 * std::cos(kPi / 8.0), 2.0 * std::cos(3.0 * kPi / 8.0)};
        for (int i = 0; i < 2; ++i) {
            const double norm = 1.0 / (1.0 + k * q_inv[i] + k * k);
            s[i].b0 = k * k * norm;
            s[i].b1 = 2.0 * s[i].b0;
            s[i].b2 = s[i].b0;
            s[i].a1 = 2.0 * (k * k - 1.0) * norm;
            s[i].a2 = (1.0 - k * q_inv[i] + k * k) * norm;
        }
    }

    double step(double u) { return s[1].step(s[0].step(u)); }
};

// Steps until the slowest pole has decayed by e^-40.
std::size_t settle_steps(double wc, double dt) {
    const double zeta_min = std::cos(3.0 * kPi / 8.0);
    return static_cast<std::size_t>(std::ceil(40.0 / (zeta_min * wc * dt))) + 16;
}

}  // namespace

std::vector<double> sample_base_load(const LoadProcess& process, std::span<const double> t_grid) {
    process.validate();
    std::vector<double> out(t_grid.size(), process.mean);
    if (process.sigma == 0.0 || t_grid.size() < 2) return out;
    const double dt = t_grid[1] - t_grid[0];
    if (!(dt > 0.0)) throw InputError("sample_base_load: grid must be increasing");
    for (std::size_t i = 2; i < t_grid.size(); ++i) {
        if (std::abs((t_grid[i] - t_grid[i - 1]) - dt) > 1e-9 * std::max(1.0, dt)) {
            throw InputError("sample_base_load: grid must be uniform");
        }
    }
    if (process.bandwidth_w * dt >= kPi) throw InputError("sample_base_load: bandwidth above Nyquist");

    // Stationary variance under unit white input is the impulse-response energy.
    const std::size_t settle = settle_steps(process.bandwidth_w, dt);
    double var = 0.0;
    {
        Butterworth4 f(process.bandwidth_w, dt);
        for (std::size_t k = 0; k < settle; ++k) {
            const double h = f.step(k == 0 ? 1.0 : 0.0);
            var += h * h;
        }
    }
    if (!(var > 0.0)) throw NumericalError("sample_base_load: degenerate filter");
    const double scale = process.sigma / std::sqrt(var);

    // A burn-in of the same length brings the filter state to stationarity.
    std::mt19937_64 rng(process.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Butterworth4 f(process.bandwidth_w, dt);
    for (std::size_t k = 0; k < settle; ++k) f.step(normal(rng));
    for (std::size_t k = 0; k < t_grid.size(); ++k) out[k] = process.mean + scale * f.step(normal(rng));
    return out;
}

MmaCommand attack_schedule_from_mode(const modal::ModeInfo& mode, double i_pct, double t_start, double t_stop) {
    if (!(mode.frequency > 0.0)) throw InputError("attack_schedule_from_mode: mode frequency must be positive");
    MmaCommand cmd;
    cmd.i_pct = i_pct;
    cmd.omega = kTwoPi * mode.frequency;
    cmd.phi = 0.0;
    cmd.t_start = t_start;
    cmd.t_stop = t_stop;
    cmd.validate();
    return cmd;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace mma::attack
