#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "invlab/inversion.hpp"
#include "invlab/metrics.hpp"

namespace invlab {

struct MethodSpec {
    std::string name;  // defaults to the method tag
    SPDInvConfig config;
};

// Declarative experiment description; see configs/ for the JSON shape.
struct ExperimentConfig {
    int num_train_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    int inference_steps = 50;

    nlohmann::json predictor;  // {"kind": ...}

    int trials = 10;
    std::uint64_t seed = 1;
    int condition_source = Condition::null_id;
    int condition_target = Condition::null_id;
    double generation_guidance = 1.0;
    bool budget_matched = false;
    bool compute_edit = true;
    bool compute_coupling = true;
    int save_trajectories = 0;  // persist the first N trials' paths
    int threads = 1;
    std::vector<MethodSpec> methods;
    std::string out_dir;
    nlohmann::json thresholds;  // optional declared pass/fail levels

    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    void validate() const;
};

struct TrialResult {
    int trial = -1;
    bool ok = false;
    std::string error;
    int abort_step = -1;
    double abort_residual = 0.0;

    std::vector<double> gap;  // per-step noise gap, length T+1
    double final_gap = 0.0;
    double recon_mse = 0.0;
    double recon_psnr = 0.0;
    double edit_divergence = 0.0;  // NaN when not computed
    double coupling = 0.0;         // NaN when not computed
    double mean_initial_residual = 0.0;
    double mean_final_residual = 0.0;
    double mean_rounds = 0.0;
    long predictor_calls = 0;

    // Per-step series for completed steps (shorter than T for aborted trials).
    std::vector<double> step_initial_residual;
    std::vector<double> step_final_residual;
    std::vector<double> step_rounds;
    std::vector<long> step_calls;
};

struct MethodAggregate {
    std::string name;
    Method method = Method::Naive;
    int trials_ok = 0;
    int trials_failed = 0;
    int guard_trips = 0;

    double mean_final_gap = 0.0;
    double mean_recon_mse = 0.0;
    double mean_recon_psnr = 0.0;  // over finite entries
    int recon_psnr_inf_count = 0;
    double mean_edit_divergence = 0.0;
    double edit_win_rate_vs_naive = 0.0;  // fraction of paired trials won strictly
    double mean_coupling = 0.0;
    double mean_abs_coupling = 0.0;
    double mean_initial_residual = 0.0;
    double mean_final_residual = 0.0;
    double mean_rounds = 0.0;
    double mean_rounds_first_half = 0.0;   // steps t <= T/2
    double mean_rounds_second_half = 0.0;  // steps t > T/2
    long total_predictor_calls = 0;

    std::vector<double> mean_gap_per_step;  // over ok trials, length T+1
    // Per step t (index t-1), averaged over every trial that ran the step;
    // an aborted step contributes its last measured residual.
    std::vector<double> mean_step_final_residual;
    std::vector<double> mean_step_rounds;
    std::vector<long> step_samples;
};

struct RunResult {
    ExperimentConfig config;
    std::vector<MethodAggregate> aggregates;
    std::vector<std::vector<TrialResult>> trials;  // [method][trial]
    bool run_failed = false;                       // a method failed on every trial
    nlohmann::json summary;

    const MethodAggregate& aggregate(const std::string& name) const;
};

std::unique_ptr<EpsilonPredictor> build_predictor(const nlohmann::json& spec,
                                                  const NoiseSchedule& schedule);

// Runs the full protocol: per trial, draw the ideal noise code, generate the
// ground-truth path under the source condition, invert its z_0 with every
// configured method, and score the results. Deterministic for a given
// config+seed for any thread count. Writes summary.json, trials.jsonl and
// gap.csv into out_dir when it is set.
RunResult run_experiment(const ExperimentConfig& config);

// One run per value of a single hyper-parameter ("K", "delta", "eta", "T");
// writes per-run outputs under <out_dir>/<param>_<value> plus ablation.json
// and ablation.csv at the top.
nlohmann::json run_ablation(const ExperimentConfig& base, const std::string& parameter,
                            const std::vector<double>& values);

// Aggregates summary.json files found under the given run directories into a
// flat plot table (columns: t, method, gap).
void write_plot_table(const std::vector<std::string>& run_dirs,
                      const std::string& csv_path);

}  // namespace invlab
