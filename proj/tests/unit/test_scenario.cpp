#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "mma/experiments.hpp"
#include "mma/scenario.hpp"

using namespace mma;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() {
    return json{{"schema", scenario::kScenarioSchema}, {"name", "t"}, {"network", {{"builtin", "kundur2area"}}}};
}

std::string error_of(const json& doc) {
    try {
        scenario::parse_scenario(doc);
    } catch (const InputError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("unknown keys are rejected with their dotted path") {
    auto doc = minimal();
    doc["sim"]["dtt"] = 0.01;
    const auto msg = error_of(doc);
    CHECK(msg.find("sim.dtt") != std::string::npos);
    auto doc2 = minimal();
    doc2["colour"] = "red";
    CHECK(error_of(doc2).find("colour") != std::string::npos);
}

TEST_CASE("schema and bus references are validated") {
    auto doc = minimal();
    doc["schema"] = "mma-scenario/9";
    CHECK_FALSE(error_of(doc).empty());
    auto doc2 = minimal();
    doc2["pile"] = {{"enabled", true}, {"bus", 999}};
    CHECK(error_of(doc2).find("999") != std::string::npos);
}

TEST_CASE("overrides set nested values and parse JSON literals") {
    auto doc = minimal();
    scenario::apply_override(doc, "sim.t_end=12.5");
    scenario::apply_override(doc, "attack.frequency_hz", "mode");
    CHECK(doc["sim"]["t_end"].get<double>() == 12.5);
    CHECK(doc["attack"]["frequency_hz"] == "mode");
    CHECK_THROWS_AS(scenario::apply_override(doc, "no-equals-sign"), InputError);
}

TEST_CASE("scenario listing: bundled first, then the user directory") {
    const auto bundled = scenario::list_scenarios();
    CHECK(std::find(bundled.begin(), bundled.end(), "kundur_heavy_mma_miadrc") != bundled.end());
    const auto dir = fs::temp_directory_path() / "mma_test_user_scenarios";
    fs::remove_all(dir);
    fs::create_directories(dir);
    CHECK(scenario::list_scenarios(dir.string()) == bundled);
    auto doc = minimal();
    doc["name"] = "zz_user_case";
    std::ofstream(dir / "zz_user_case.json") << doc.dump();
    const auto all = scenario::list_scenarios(dir.string());
    CHECK(all.size() == bundled.size() + 1);
    CHECK(all.back() == "zz_user_case");
    CHECK(scenario::resolve_scenario("zz_user_case", dir.string()) == (dir / "zz_user_case.json").string());
    fs::remove_all(dir);
}

TEST_CASE("json hash is stable and order independent") {
    const json a = {{"x", 1}, {"y", {1, 2, 3}}};
    const json b = json::parse(R"({"y":[1,2,3],"x":1})");
    CHECK(scenario::json_hash(a) == scenario::json_hash(b));
    CHECK(scenario::json_hash(a).size() == 16);
    CHECK(scenario::json_hash(a) != scenario::json_hash(json{{"x", 2}}));
}

TEST_CASE("running a scenario twice gives the same report hash") {
    auto s = exp::with_overrides(exp::bundled("kundur_base_mma"), {{"sim.t_end", 4.0}, {"attack.t_stop", 4.0}});
    const auto r1 = scenario::run_scenario(s);
    const auto r2 = scenario::run_scenario(s);
    CHECK(r1.json["report_hash"] == r2.json["report_hash"]);
    CHECK(r1.json["schema"] == scenario::kReportSchema);

    const auto dir = fs::temp_directory_path() / "mma_test_report";
    fs::remove_all(dir);
    r1.write(dir.string());
    const auto man = json::parse(std::ifstream(dir / "manifest.json"));
    CHECK(man["schema"] == "mma-manifest/1");
    CHECK(man["report_hash"] == r1.json["report_hash"]);
    for (const auto& f : man["files"]) CHECK(fs::exists(dir / f.get<std::string>()));
    fs::remove_all(dir);
}

TEST_CASE("figure output carries a manifest with the summary hash") {
    exp::Figure f;
    f.id = "unit";
    f.summary = {{"value", 1.5}};
    exp::Table t;
    t.add("a", {1.0, 2.0});
    t.add("b", {3.0, 4.0});
    f.tables.emplace_back("data", t);
    const auto dir = fs::temp_directory_path() / "mma_test_figure";
    fs::remove_all(dir);
    exp::write_figure(f, dir.string(), exp::Options{});
    const auto man = json::parse(std::ifstream(dir / "manifest.json"));
    CHECK(man["schema"] == "mma-manifest/1");
    CHECK(man["summary_hash"] == scenario::json_hash(f.summary));
    CHECK(fs::exists(dir / "data.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    fs::remove_all(dir);
    CHECK_THROWS_AS(exp::run_figure("fig99"), InputError);
}

TEST_CASE("the 39-bus controllers stay off until their enable time") {
    auto s = exp::with_overrides(exp::bundled("ieee39_mma_miadrc"), {{"sim.t_end", 8.0}, {"attack.t_stop", 8.0}});
    scenario::RunOptions o;
    o.baseline = false;
    const auto r = scenario::run_scenario(s, o);
    const auto& t = r.trace.time;
    const auto& ue = r.trace.channel("G3.ue");
    double before = 0.0, after = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (t[k] < 5.0 - 1e-9) before = std::max(before, std::abs(ue[k]));
        else if (t[k] > 5.5) after = std::max(after, std::abs(ue[k]));
    }
    CHECK(before == 0.0);
    CHECK(after > 0.0);
}

TEST_CASE("the detection gate switches the controllers on and keeps them on") {
    auto s = exp::with_overrides(exp::bundled("kundur_heavy_mma_miadrc"), {{"miadrc.auto_detect", true}});
    const auto r = scenario::run_scenario(s);
    CHECK(r.json["metrics"]["suppression_rate"].get<double>() >= 0.9);
}
