#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spinmux/scenarios.hpp"

using namespace spinmux;
using namespace spinmux::cli;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("spinmux_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config JSON round-trips through the schema boundary") {
    const auto cfg = config::preset_two_ion();
    const auto j = config::config_to_json(cfg);
    const auto back = config::config_from_json(j);
    REQUIRE(back.ions.size() == cfg.ions.size());
    REQUIRE(back.ions[0].label == "ion1");
    REQUIRE(back.ions[0].gamma_eff == Catch::Approx(cfg.ions[0].gamma_eff));
    REQUIRE(back.cavity.q_factor == cfg.cavity.q_factor);
    REQUIRE(back.hardware.detect_prob_per_cycle ==
            cfg.hardware.detect_prob_per_cycle);
}

TEST_CASE("config schema violations raise ConfigError") {
    auto j = config::config_to_json(config::preset_two_ion());
    j["ions"][0].erase("cyclicity");
    REQUIRE_THROWS_AS(config::config_from_json(j), ConfigError);

    auto j2 = config::config_to_json(config::preset_two_ion());
    j2["ions"][0]["cyclicity"] = 0.2;  // violates the >= 1 invariant
    REQUIRE_THROWS_AS(config::config_from_json(j2), ConfigError);

    auto j3 = config::config_to_json(config::preset_two_ion());
    j3["version"] = 99;
    REQUIRE_THROWS_AS(config::config_from_json(j3), ConfigError);

    auto j4 = config::config_to_json(config::preset_two_ion());
    j4["ions"][0]["f_a_hz"] = "fast";
    REQUIRE_THROWS_AS(config::config_from_json(j4), ConfigError);
}

TEST_CASE("rotation_synthesis scenario reports sub-1e-10 residuals") {
    const auto dir = fresh_dir("rotsynth");
    Scenario s{.name = "synth", .experiment = "rotation_synthesis",
               .parameters = {{"count", 300}}, .seed = 11,
               .output_dir = dir.string()};
    run_scenario(s, config::preset_two_ion());
    const auto summary =
        nlohmann::json::parse(slurp(dir / "synth" / "summary.json"));
    REQUIRE(summary["max_residual"].get<double>() < 1e-10);
    REQUIRE(summary["max_circuit_error"].get<double>() < 1e-9);
    REQUIRE(summary["seed"] == 11);
}

TEST_CASE("stark_sweep scenario writes the documented CSV") {
    const auto dir = fresh_dir("sweep");
    Scenario s{.name = "sweep", .experiment = "stark_sweep",
               .parameters = {{"points", 101}}, .seed = 1,
               .output_dir = dir.string()};
    run_scenario(s, config::preset_two_ion());
    const std::string csv = slurp(dir / "sweep" / "stark_sweep.csv");
    REQUIRE(csv.find("f_laser_hz,phase_rad,visibility_loss") != std::string::npos);
    REQUIRE(csv.find("# experiment=stark_sweep") != std::string::npos);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 103);  // header+title+rows
}

TEST_CASE("unknown experiment and empty name are rejected") {
    Scenario s{.name = "x", .experiment = "warp_drive"};
    REQUIRE_THROWS_AS(run_scenario(s, config::preset_two_ion()), ConfigError);
    Scenario s2{.name = "", .experiment = "stark_sweep"};
    REQUIRE_THROWS_AS(run_scenario(s2, config::preset_two_ion()), ConfigError);
}

TEST_CASE("stochastic scenarios rerun byte-identically with the same seed") {
    auto run_once = [&](const std::string& tag) {
        const auto dir = fresh_dir(tag);
        Scenario s{.name = "readout", .experiment = "single_shot_readout",
                   .parameters = {{"shots", 500}, {"n_i", 10}}, .seed = 42,
                   .output_dir = dir.string()};
        run_scenario(s, config::preset_two_ion());
        return slurp(dir / "readout" / "difference_histograms.csv");
    };
    REQUIRE(run_once("det_a") == run_once("det_b"));
}

TEST_CASE("scenario files load and validate") {
    const auto dir = fresh_dir("scenfile");
    {
        std::ofstream out(dir / "scenarios.json");
        out << R"({"scenarios":[
            {"name":"a","experiment":"rotation_synthesis","seed":1,
             "parameters":{"count":10}},
            {"name":"b","experiment":"tone_plan","seed":2,
             "parameters":{"coarse_step_hz":1e7}}]})";
    }
    const auto list = load_scenario_file((dir / "scenarios.json").string(),
                                         dir.string());
    REQUIRE(list.size() == 2);
    REQUIRE(list[0].experiment == "rotation_synthesis");
    for (const auto& s : list) run_scenario(s, config::preset_two_ion());
    REQUIRE(fs::exists(dir / "a" / "summary.json"));
    REQUIRE(fs::exists(dir / "b" / "summary.json"));

    {
        std::ofstream out(dir / "bad.json");
        out << R"({"scenarios":[{"name":"x","experiment":"nope"}]})";
    }
    REQUIRE_THROWS_AS(load_scenario_file((dir / "bad.json").string(), "."),
                      ConfigError);
}

TEST_CASE("tone_plan scenario emits tones and per-ion losses") {
    const auto dir = fresh_dir("tones");
    Scenario s{.name = "plan", .experiment = "tone_plan",
               .parameters = {{"targets", {1.0, 0.0}}, {"coarse_step_hz", 5e6}},
               .seed = 3, .output_dir = dir.string()};
    run_scenario(s, config::preset_two_ion());
    const auto summary = nlohmann::json::parse(slurp(dir / "plan" / "summary.json"));
    REQUIRE(summary["tones"].size() == 1);
    REQUIRE(summary["per_ion_visibility_loss"].size() == 2);
    REQUIRE(summary["residual_rad"].get<double>() < 1e-9);
}
