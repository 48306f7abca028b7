#pragma once

// Scenario files: a versioned JSON document describing network, machines,
// pile, attack, defence and simulation settings, plus the experiment
// report produced by running one.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mma/attack.hpp"
#include "mma/devices.hpp"
#include "mma/modal.hpp"
#include "mma/simulate.hpp"

namespace mma::scenario {

inline constexpr const char* kScenarioSchema = "mma-scenario/1";
inline constexpr const char* kReportSchema = "mma-report/1";

/// How the target electromechanical mode is picked inside [f_lo, f_hi]:
/// "least_damped", "dominant" (largest participation of `state`) or
/// "groups" (strongest opposition of group_a against group_b in the
/// rotor-speed mode shape).
struct ModeTarget {
    double f_lo = 0.1;
    double f_hi = 2.0;
    std::string select = "least_damped";
    std::string state;
    std::vector<std::string> group_a, group_b;
};

struct AttackSpec {
    attack::MmaCommand command;
    bool tune_to_mode = true;  // frequency taken from the target mode
};

struct MetricSpec {
    std::string channel;            // defaults to the first controlled machine's Pe, else the first machine's
    double t0 = 0.0, t1 = 0.0;      // steady window; defaults to the last 5 s of the attack window
    bool window_set = false;
};

struct Scenario {
    std::string name;
    std::string description;
    nlohmann::json document;  // normalised: every default filled in
    net::Network network;
    std::vector<dyn::GeneratorParams> machines;
    std::optional<dyn::PileSpec> pile;
    ModeTarget mode;
    std::optional<AttackSpec> attack;
    attack::LoadProcess load;
    sim::DefenseConfig defense;
    sim::SimConfig sim;
    MetricSpec metric;
    std::uint64_t seed = 1;
};

/// The default document; every accepted key appears in it.
nlohmann::json default_document();

/// Merge a user document onto the defaults, rejecting unknown keys with
/// their dotted path, then build the typed scenario.
Scenario parse_scenario(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);

/// Set `path` (dotted, array indices allowed) in a user document. The value
/// text is parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& path, const std::string& value);
/// "path=value" form.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Stable 64-bit FNV-1a hash of a JSON value's canonical text, as 16 hex digits.
std::string json_hash(const nlohmann::json& j);

dyn::PowerSystem build_system(const Scenario& s);
std::size_t select_mode(const modal::ModalDecomposition& dec, const ModeTarget& t);

/// Score used by the "groups" selector: |sum_a u - sum_b u| / sum |u| over
/// the rotor-speed entries of the mode shape (1 = pure opposition).
double group_opposition(const modal::ModeInfo& m, const std::vector<std::string>& a,
                        const std::vector<std::string>& b);

/// Simulation case for a built system; `with_defense` false drops the controllers.
sim::SimCase make_case(const Scenario& s, const dyn::PowerSystem& sys, const std::optional<attack::MmaCommand>& cmd,
                       bool with_defense);

/// Attack command with the frequency resolved against the target mode.
std::optional<attack::MmaCommand> resolve_attack(const Scenario& s, const modal::ModeInfo& mode);

struct ExperimentReport {
    nlohmann::json json;  // includes "report_hash"
    sim::Trace trace;
    std::optional<sim::Trace> baseline;  // undefended run when a defence is configured

    /// report.json, trace.csv (and baseline.csv) and manifest.json in `dir`.
    void write(const std::string& dir) const;
};

struct RunOptions {
    std::optional<std::uint64_t> seed;
    bool baseline = true;  // also run without defence to measure suppression
};

ExperimentReport run_scenario(const Scenario& s, const RunOptions& opts = {});

/// Modal report: target mode with shape and participation, plus every
/// oscillatory mode inside the band.
nlohmann::json modal_report(const Scenario& s);

/// Directory holding the bundled scenarios.
std::string bundled_dir();
/// Bundled names, then names found in `user_dir` (if non-empty), sorted within each group.
std::vector<std::string> list_scenarios(const std::string& user_dir = {});
/// A path, or a bundled/user scenario name (with or without ".json").
std::string resolve_scenario(const std::string& name_or_path, const std::string& user_dir = {});

/// Steady amplitude window of a scenario: last 5 s of the attack window, clipped to the run.
std::pair<double, double> steady_window(const Scenario& s, const std::optional<attack::MmaCommand>& cmd);

/// 1 - controlled / uncontrolled.
double suppression_rate(double controlled, double uncontrolled);

}  // namespace mma::scenario
