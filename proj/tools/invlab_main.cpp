// Command-line front end: generate | invert | roundtrip | edit | ablate | report.
// Every run is driven by a JSON config file; flags override config values.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "invlab/harness.hpp"
#include "invlab/io.hpp"
#include "invlab/rng.hpp"

namespace fs = std::filesystem;
using invlab::ExperimentConfig;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> threads;
    std::string out_dir;
    std::vector<std::string> methods;
    bool budget_matched = false;
    bool stop_gradient = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
    auto* opt = cmd->add_option("--config", flags.config_path, "experiment config (json)");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", flags.seed, "override config seed");
    cmd->add_option("--trials", flags.trials, "override trial count");
    cmd->add_option("--threads", flags.threads, "worker threads for the trial loop");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--method", flags.methods,
                    "restrict to the named method(s) from the config");
    cmd->add_flag("--budget-matched", flags.budget_matched,
                  "match aidi predictor-call budgets to spdinv per step");
    cmd->add_flag("--stop-gradient", flags.stop_gradient,
                  "freeze eps within each spdinv round");
}

std::string default_out_dir(const std::string& subcommand, std::uint64_t seed) {
    const char* root = std::getenv("INVLAB_OUT_ROOT");
    const fs::path base = root != nullptr && *root != '\0' ? fs::path(root)
                                                           : fs::path("runs");
    return (base / (subcommand + "-seed" + std::to_string(seed))).string();
}

ExperimentConfig load_config(const CommonFlags& flags, const std::string& subcommand) {
    std::ifstream is(flags.config_path);
    if (!is) throw std::runtime_error("cannot open config '" + flags.config_path + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed config json: " + std::string(e.what()));
    }
    ExperimentConfig cfg = ExperimentConfig::from_json(j);

    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.trials) cfg.trials = *flags.trials;
    if (flags.threads) cfg.threads = *flags.threads;
    if (flags.budget_matched) cfg.budget_matched = true;
    if (flags.stop_gradient) {
        for (auto& m : cfg.methods) m.config.stop_gradient = true;
    }
    if (!flags.methods.empty()) {
        std::vector<invlab::MethodSpec> kept;
        for (const auto& name : flags.methods) {
            bool found = false;
            for (const auto& spec : cfg.methods) {
                if (spec.name == name) {
                    kept.push_back(spec);
                    found = true;
                }
            }
            if (!found) {
                throw std::runtime_error("config has no method named '" + name + "'");
            }
        }
        cfg.methods = std::move(kept);
    }
    if (!flags.out_dir.empty()) {
        cfg.out_dir = flags.out_dir;
    } else if (cfg.out_dir.empty()) {
        cfg.out_dir = default_out_dir(subcommand, cfg.seed);
    }
    cfg.validate();
    return cfg;
}

int finish_run(const invlab::RunResult& result) {
    for (const auto& agg : result.aggregates) {
        std::cout << agg.name << ": trials_ok=" << agg.trials_ok
                  << " trials_failed=" << agg.trials_failed
                  << " mean_final_gap=" << agg.mean_final_gap
                  << " mean_recon_mse=" << agg.mean_recon_mse
                  << " mean_final_residual=" << agg.mean_final_residual << "\n";
    }
    std::cout << "outputs: " << result.config.out_dir << "\n";
    if (result.run_failed) {
        std::cerr << "error: a method failed on every trial\n";
        return 2;
    }
    if (result.summary.contains("checks_pass") &&
        !result.summary.at("checks_pass").get<bool>()) {
        std::cerr << "error: declared thresholds not met (see summary.json checks)\n";
        return 3;
    }
    return 0;
}

std::vector<double> parse_grid_values(const std::string& grid, std::string& parameter) {
    const auto eq = grid.find('=');
    if (eq == std::string::npos) {
        throw std::runtime_error("grid must look like 'k=5,25,50'");
    }
    std::string key = grid.substr(0, eq);
    for (auto& c : key) c = static_cast<char>(std::tolower(c));
    if (key == "k") parameter = "K";
    else if (key == "delta") parameter = "delta";
    else if (key == "eta") parameter = "eta";
    else if (key == "t") parameter = "T";
    else throw std::runtime_error("unknown grid parameter '" + key + "'");

    std::vector<double> values;
    std::stringstream ss(grid.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        values.push_back(std::stod(item));
    }
    if (values.empty()) throw std::runtime_error("grid has no values");
    return values;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion inversion laboratory"};
    app.require_subcommand(1);

    CommonFlags gen_flags, inv_flags, round_flags, edit_flags, ablate_flags;
    std::string grid_spec;

    auto* cmd_generate = app.add_subcommand(
        "generate", "generate ground-truth trajectories and persist them");
    add_common(cmd_generate, gen_flags);

    auto* cmd_invert = app.add_subcommand(
        "invert", "run the full generate/invert/score protocol");
    add_common(cmd_invert, inv_flags);

    auto* cmd_roundtrip = app.add_subcommand(
        "roundtrip", "invert and regenerate, reporting reconstruction error");
    add_common(cmd_roundtrip, round_flags);

    auto* cmd_edit = app.add_subcommand(
        "edit", "compare edits from inverted and ideal noise codes");
    add_common(cmd_edit, edit_flags);

    auto* cmd_ablate = app.add_subcommand("ablate", "sweep one hyper-parameter");
    add_common(cmd_ablate, ablate_flags);
    cmd_ablate->add_option("--grid", grid_spec, "sweep spec, e.g. k=5,25,50")->required();

    std::vector<std::string> report_inputs;
    std::string plot_path;
    auto* cmd_report = app.add_subcommand(
        "report", "aggregate run outputs into a flat plot table");
    cmd_report->add_option("--in", report_inputs, "run directories")->required();
    cmd_report->add_option("--plot", plot_path, "output csv path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_generate->parsed()) {
            ExperimentConfig cfg = load_config(gen_flags, "generate");
            // Persist every trial's ground-truth path; inversion metrics and
            // edits are out of scope for this subcommand.
            cfg.save_trajectories = cfg.trials;
            cfg.compute_edit = false;
            cfg.compute_coupling = false;
            ExperimentConfig pruned = cfg;
            pruned.methods.clear();
            invlab::MethodSpec naive;
            naive.name = "naive";
            naive.config.method = invlab::Method::Naive;
            pruned.methods.push_back(naive);
            return finish_run(invlab::run_experiment(pruned));
        }
        if (cmd_invert->parsed()) {
            ExperimentConfig cfg = load_config(inv_flags, "invert");
            if (cfg.save_trajectories == 0) cfg.save_trajectories = 1;
            return finish_run(invlab::run_experiment(cfg));
        }
        if (cmd_roundtrip->parsed()) {
            ExperimentConfig cfg = load_config(round_flags, "roundtrip");
            cfg.compute_edit = false;
            return finish_run(invlab::run_experiment(cfg));
        }
        if (cmd_edit->parsed()) {
            ExperimentConfig cfg = load_config(edit_flags, "edit");
            cfg.compute_edit = true;
            return finish_run(invlab::run_experiment(cfg));
        }
        if (cmd_ablate->parsed()) {
            ExperimentConfig cfg = load_config(ablate_flags, "ablate");
            std::string parameter;
            const auto values = parse_grid_values(grid_spec, parameter);
            const json rows = invlab::run_ablation(cfg, parameter, values);
            for (const auto& row : rows) {
                std::cout << row.dump() << "\n";
            }
            return 0;
        }
        if (cmd_report->parsed()) {
            invlab::write_plot_table(report_inputs, plot_path);
            std::cout << "wrote " << plot_path << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
