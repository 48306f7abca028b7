// Command-line front end: run, batch, reproduce, modal, sweep, list.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mma/core.hpp"
#include "mma/experiments.hpp"
#include "mma/scenario.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mma;

namespace {

json error_json(const std::exception& e) {
    json err = {{"kind", "internal"}, {"message", e.what()}};
    if (const auto* me = dynamic_cast<const Error*>(&e)) err["kind"] = me->kind();
    if (const auto* de = dynamic_cast<const DivergenceError*>(&e)) err["time"] = de->time();
    return {{"error", err}};
}

scenario::Scenario load(const std::string& name, const std::string& user_dir, const std::vector<std::string>& sets) {
    const auto path = scenario::resolve_scenario(name, user_dir);
    std::ifstream f(path);
    if (!f) throw InputError("cannot open scenario " + path);
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
    for (const auto& s : sets) scenario::apply_override(doc, s);
    return scenario::parse_scenario(doc);
}

void emit(const json& j, const std::string& out_file) {
    if (out_file.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    if (const auto dir = fs::path(out_file).parent_path(); !dir.empty()) fs::create_directories(dir);
    std::ofstream f(out_file);
    if (!f) throw InputError("cannot write " + out_file);
    f << j.dump(2) << '\n';
}

json run_summary(const scenario::ExperimentReport& r) {
    return {{"scenario", r.json["scenario"]}, {"report_hash", r.json["report_hash"]}, {"metrics", r.json["metrics"]}};
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find(',', pos), text.size());
        const auto item = text.substr(pos, end - pos);
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw InputError("--values: '" + item + "' is not a number");
        }
        pos = end + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modulated-attack oscillation toolkit"};
    app.require_subcommand(1);
    std::string user_dir;
    std::vector<std::string> sets;
    app.add_option("--scenario-dir", user_dir, "Extra directory searched for scenario names");

    auto* run = app.add_subcommand("run", "Run one scenario and write report, traces and manifest");
    std::string run_file, run_out;
    std::optional<std::uint64_t> run_seed;
    bool no_baseline = false;
    run->add_option("scenario", run_file, "Scenario path or bundled name")->required();
    run->add_option("--out", run_out, "Output directory (report JSON to stdout when omitted)");
    run->add_option("--seed", run_seed, "Override the scenario seed");
    run->add_option("--set", sets, "Override a field, path=value (repeatable)");
    run->add_flag("--no-baseline", no_baseline, "Skip the undefended comparison run");

    auto* batch = app.add_subcommand("batch", "Run several scenarios, one per worker thread");
    std::vector<std::string> batch_files;
    std::string batch_out;
    int batch_threads = 0;
    batch->add_option("scenarios", batch_files, "Scenario paths or bundled names")->required();
    batch->add_option("--out", batch_out, "Output root; one subdirectory per scenario")->required();
    batch->add_option("--threads", batch_threads, "Worker threads (default: OpenMP default)");

    auto* repro = app.add_subcommand("reproduce", "Regenerate the data behind a named figure or table");
    std::string fig_id, fig_out;
    std::size_t trials = 500;
    std::uint64_t fig_seed = 1;
    bool serial = false;
    repro->add_option("figure_id", fig_id, "Figure or table id")->required();
    repro->add_option("--out", fig_out, "Output directory (default: out/<figure_id>)");
    repro->add_option("--trials", trials, "Monte Carlo trials for the stochastic recipe");
    repro->add_option("--seed", fig_seed, "Seed for the stochastic recipe");
    repro->add_flag("--serial", serial, "Use the serial reference kernels");

    auto* modal_cmd = app.add_subcommand("modal", "Modal report of a scenario's operating point");
    std::string modal_file, modal_out;
    modal_cmd->add_option("scenario", modal_file, "Scenario path or bundled name")->required();
    modal_cmd->add_option("--out", modal_out, "Write JSON here instead of stdout");
    modal_cmd->add_option("--set", sets, "Override a field, path=value (repeatable)");

    auto* sweep = app.add_subcommand("sweep", "Run a scenario once per parameter value");
    std::string sweep_file, sweep_param, sweep_values, sweep_out;
    sweep->add_option("scenario", sweep_file, "Scenario path or bundled name")->required();
    sweep->add_option("--param", sweep_param, "Dotted field path")->required();
    sweep->add_option("--values", sweep_values, "Comma-separated values")->required();
    sweep->add_option("--out", sweep_out, "Write JSON here instead of stdout");
    sweep->add_option("--set", sets, "Override a field, path=value (repeatable)");

    auto* list = app.add_subcommand("list", "List bundled and user scenarios, and figure ids");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << json{{"error", {{"kind", "usage"}, {"message", e.what()}}}}.dump() << '\n';
        return 2;
    }

    try {
        if (*run) {
            const auto s = load(run_file, user_dir, sets);
            scenario::RunOptions o;
            o.seed = run_seed;
            o.baseline = !no_baseline;
            const auto rep = scenario::run_scenario(s, o);
            if (run_out.empty()) {
                std::cout << rep.json.dump(2) << '\n';
            } else {
                rep.write(run_out);
                std::cout << run_summary(rep).dump(2) << '\n';
            }
        } else if (*batch) {
            const auto n = static_cast<int>(batch_files.size());
            std::vector<json> results(batch_files.size());
            if (batch_threads > 0) omp_set_num_threads(batch_threads);
#pragma omp parallel for schedule(dynamic, 1)
            for (int i = 0; i < n; ++i) {
                const auto& name = batch_files[static_cast<std::size_t>(i)];
                try {
                    const auto s = load(name, user_dir, {});
                    const auto rep = scenario::run_scenario(s);
                    rep.write((fs::path(batch_out) / s.name).string());
                    results[static_cast<std::size_t>(i)] = run_summary(rep);
                } catch (const std::exception& e) {
                    results[static_cast<std::size_t>(i)] = {{"scenario", name}, {"error", error_json(e)["error"]}};
                }
            }
            bool ok = true;
            for (const auto& r : results) ok = ok && !r.contains("error");
            std::cout << json(results).dump(2) << '\n';
            if (!ok) {
                std::cerr << json{{"error", {{"kind", "batch"}, {"message", "one or more scenarios failed"}}}}.dump() << '\n';
                return 1;
            }
        } else if (*repro) {
            exp::Options o;
            o.exec = serial ? modal::Execution::Serial : modal::Execution::Parallel;
            o.mc_trials = trials;
            o.seed = fig_seed;
            const auto t0 = std::chrono::steady_clock::now();
            const auto fig = exp::run_figure(fig_id, o);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const auto dir = fig_out.empty() ? (fs::path("out") / fig_id).string() : fig_out;
            exp::write_figure(fig, dir, o);
            std::cout << json{{"figure", fig_id}, {"out", dir}, {"seconds", secs}, {"summary", fig.summary}}.dump(2) << '\n';
        } else if (*modal_cmd) {
            emit(scenario::modal_report(load(modal_file, user_dir, sets)), modal_out);
        } else if (*sweep) {
            const auto base = load(sweep_file, user_dir, sets);
            const auto values = parse_values(sweep_values);
            const auto n = static_cast<int>(values.size());
            std::vector<json> rows(values.size());
            std::vector<std::string> errors(values.size());
#pragma omp parallel for schedule(dynamic, 1)
            for (int i = 0; i < n; ++i) {
                const auto k = static_cast<std::size_t>(i);
                try {
                    const auto s = exp::with_overrides(base, {{sweep_param, values[k]}});
                    const auto rep = scenario::run_scenario(s);
                    rows[k] = {{"value", values[k]},
                               {"report_hash", rep.json["report_hash"]},
                               {"mode", rep.json["modal"]["target"]},
                               {"metrics", rep.json["metrics"]}};
                } catch (const std::exception& e) {
                    errors[k] = e.what();
                }
            }
            for (std::size_t k = 0; k < errors.size(); ++k) {
                if (!errors[k].empty()) {
                    throw InputError("sweep value " + std::to_string(values[k]) + ": " + errors[k]);
                }
            }
            emit({{"scenario", base.name}, {"param", sweep_param}, {"points", rows}}, sweep_out);
        } else if (*list) {
            std::cout << json{{"scenarios", scenario::list_scenarios(user_dir)}, {"figures", exp::figure_ids()}}.dump(2)
                      << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << error_json(e).dump() << '\n';
        return 1;
    }
    return 0;
}
