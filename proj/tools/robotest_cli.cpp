#include <cstdio>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "robotest/error.hpp"
#include "robotest/harness.hpp"

using nlohmann::json;

int main(int argc, char** argv) {
    CLI::App app{"robotest - desk-scale GUI exploration testbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string strategy;
    long long seed = -1;
    int budget_steps = -1;
    double budget_seconds = -1;
    bool debug_overlays = false;
    bool show_config = false;

    app.add_option("--config", config_path, "benchmark config document (json)");
    app.add_option("--out", out_dir, "output directory override");
    app.add_option("--seed", seed, "single seed override");
    app.add_option("--strategy", strategy, "strategy override: random|edge|center")
        ->check(CLI::IsMember({"random", "edge", "center"}));
    app.add_option("--budget-steps", budget_steps, "step budget override");
    app.add_option("--budget-seconds", budget_seconds, "simulated-seconds budget override");
    app.add_flag("--debug-overlays", debug_overlays, "write per-step detection overlays");
    app.add_flag("--show-config", show_config, "print the effective config and exit");

    auto* calibrate = app.add_subcommand("calibrate", "synthesize chessboard views and calibrate");
    auto* explore = app.add_subcommand("explore", "run the exploration grid");
    auto* compare = app.add_subcommand("compare", "run comparison-based bug detection");
    auto* report = app.add_subcommand("report", "summarize a completed run directory");

    std::string report_dir;
    report->add_option("dir", report_dir, "run directory (defaults to the config out_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    json overrides = json::object();
    if (!out_dir.empty()) overrides["out_dir"] = out_dir;
    if (seed >= 0) overrides["seeds"] = {static_cast<uint64_t>(seed)};
    if (!strategy.empty()) overrides["strategies"] = {strategy};
    if (budget_steps >= 0) overrides["budget_steps"] = budget_steps;
    if (budget_seconds >= 0) overrides["budget_seconds"] = budget_seconds;
    if (debug_overlays) overrides["debug_overlays"] = true;

    try {
        auto cfg = robotest::harness::load_config(config_path, overrides);
        if (show_config) {
            std::printf("%s\n", cfg.effective.dump(2).c_str());
            return 0;
        }
        if (calibrate->parsed()) return robotest::harness::cmd_calibrate(cfg);
        if (explore->parsed()) return robotest::harness::cmd_explore(cfg);
        if (compare->parsed()) return robotest::harness::cmd_compare(cfg);
        if (report->parsed())
            return robotest::harness::cmd_report(report_dir.empty() ? cfg.out_dir : report_dir);
        return 1;
    } catch (const robotest::Error& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return e.code() == robotest::ErrorCode::ConfigError ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
