#pragma once

// Fixed-step time-domain simulation of an assembled power system under an
// attack schedule, with optional MIADRC controllers on the exciters.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mma/attack.hpp"
#include "mma/core.hpp"
#include "mma/devices.hpp"
#include "mma/miadrc.hpp"

namespace mma::sim {

enum class Integrator { Rk4, Trapezoidal };

Integrator integrator_from_string(const std::string& s);
std::string to_string(Integrator i);

struct SimConfig {
    double dt = 1e-3;
    double t_end = 20.0;
    Integrator integrator = Integrator::Rk4;
    /// Channel names to record; empty selects the default set, "*" everything.
    std::vector<std::string> record_signals;
    int record_every = 1;

    void validate() const;
};

/// Equal-length named series sharing one time axis.
struct Trace {
    std::vector<double> time;
    std::vector<std::string> names;
    std::vector<std::vector<double>> data;

    std::size_t size() const { return time.size(); }
    bool has(const std::string& name) const;
    const std::vector<double>& channel(const std::string& name) const;
    void add_channel(const std::string& name, std::vector<double> values);

    /// Throws unless time is strictly increasing and every value is finite.
    void validate() const;

    void write_csv(std::ostream& os) const;
    void write_csv(const std::string& path) const;
    nlohmann::json to_json() const;
};

struct ControllerConfig {
    std::string gen;  // generator name
    miadrc::MultiIndexCoeffs coeffs;
    miadrc::MiadrcGains gains;
    bool auto_b = false;  // replace gains.b by compute_b at the initial equilibrium
};

struct DefenseConfig {
    std::vector<ControllerConfig> controllers;
    bool auto_detect = false;
    double enable_time = 1e30;   // scripted switch-on when auto_detect is false
    double disable_time = 1e30;  // scripted switch-off when auto_detect is false
    miadrc::GateConfig gate;
    std::string gate_channel;    // "<gen>.Pe"; defaults to the first controlled machine

    bool active() const { return !controllers.empty(); }
};

struct SimCase {
    const dyn::PowerSystem* system = nullptr;
    std::optional<attack::MmaCommand> attack;
    attack::LoadProcess load;  // mean is the pile base load in system pu
    DefenseConfig defense;
};

/// Names of every channel `simulate` can record for this case.
std::vector<std::string> available_channels(const SimCase& c);
std::vector<std::string> default_channels(const SimCase& c);

/// Integrate from the assembled equilibrium. Throws DivergenceError with
/// the failure time when the state leaves the finite range.
Trace simulate(const SimCase& c, const SimConfig& cfg);

}  // namespace mma::sim
