#pragma once

// Named experiment recipes: each builds its systems, runs the analyses
// and returns a JSON summary plus plot-ready tables.

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mma/modal.hpp"
#include "mma/scenario.hpp"
#include "mma/simulate.hpp"

namespace mma::exp {

/// Named numeric columns of equal length.
struct Table {
    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;

    static Table from_trace(const sim::Trace& t);
    void add(const std::string& name, std::vector<double> values);
    std::size_t rows() const { return cols.empty() ? 0 : cols.front().size(); }
    void write_csv(const std::string& path) const;
};

struct Figure {
    std::string id;
    nlohmann::json summary;
    std::vector<std::pair<std::string, Table>> tables;  // file stem, data
};

struct Options {
    modal::Execution exec = modal::Execution::Parallel;
    std::size_t mc_trials = 500;  // Monte Carlo trials for the stochastic recipe
    std::uint64_t seed = 1;
};

std::vector<std::string> figure_ids();

/// Dispatch by id; throws InputError listing the ids when unknown.
Figure run_figure(const std::string& id, const Options& opts = {});

/// Writes summary.json, one CSV per table and manifest.json into `dir`.
void write_figure(const Figure& f, const std::string& dir, const Options& opts);

Figure table2(const Options& opts = {});
Figure fig8(const Options& opts = {});
Figure fig9(const Options& opts = {});
Figure fig12(const Options& opts = {});
Figure fig13(const Options& opts = {});
Figure fig14(const Options& opts = {});
Figure fig15(const Options& opts = {});
Figure fig16(const Options& opts = {});
Figure fig17(const Options& opts = {});
Figure fig18_19(const Options& opts = {});
Figure fig20(const Options& opts = {});
Figure fig21(const Options& opts = {});

/// Bundled scenario by name.
scenario::Scenario bundled(const std::string& name);
/// Re-parse a scenario after applying dotted-path overrides to its document.
scenario::Scenario with_overrides(const scenario::Scenario& s, const std::vector<std::pair<std::string, nlohmann::json>>& kv);

/// Closed-loop damping coefficient of the controller path over a grid of
/// loop constants, exciter settings and frequencies. Every point with
/// D_e <= 0 is listed as a counterexample.
nlohmann::json zero_dynamics_grid(const miadrc::MultiIndexCoeffs& c = {});

/// Hourly charging demand of the 24-hour profile (pu, hour 0..23).
std::vector<double> daily_charging_profile();

}  // namespace mma::exp
