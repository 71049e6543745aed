#include "invlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "invlab/io.hpp"
#include "invlab/rng.hpp"

namespace invlab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

json json_double(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

json json_doubles(const std::vector<double>& v) {
    json arr = json::array();
    for (double x : v) arr.push_back(json_double(x));
    return arr;
}

void check_known_keys(const json& j, const std::vector<std::string>& known,
                      const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("config: unknown key '" + key + "' in " + where);
        }
    }
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return nan_value;
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    check_known_keys(j, {"schedule", "predictor", "trials", "seed", "conditions",
                         "generation_guidance", "budget_matched", "compute_edit",
                         "compute_coupling", "save_trajectories", "threads", "methods",
                         "out_dir", "thresholds"},
                     "top level");
    ExperimentConfig cfg;
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        check_known_keys(s, {"num_train_steps", "beta_start", "beta_end", "inference_steps"},
                         "schedule");
        cfg.num_train_steps = s.value("num_train_steps", cfg.num_train_steps);
        cfg.beta_start = s.value("beta_start", cfg.beta_start);
        cfg.beta_end = s.value("beta_end", cfg.beta_end);
        cfg.inference_steps = s.value("inference_steps", cfg.inference_steps);
    }
    if (!j.contains("predictor")) {
        throw std::invalid_argument("config: missing 'predictor'");
    }
    cfg.predictor = j.at("predictor");
    cfg.trials = j.value("trials", cfg.trials);
    if (!j.contains("seed")) {
        throw std::invalid_argument("config: missing 'seed' (all randomness is seeded)");
    }
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("conditions")) {
        const auto& c = j.at("conditions");
        check_known_keys(c, {"source", "target"}, "conditions");
        cfg.condition_source = c.value("source", cfg.condition_source);
        cfg.condition_target = c.value("target", cfg.condition_target);
    }
    cfg.generation_guidance = j.value("generation_guidance", cfg.generation_guidance);
    cfg.budget_matched = j.value("budget_matched", cfg.budget_matched);
    cfg.compute_edit = j.value("compute_edit", cfg.compute_edit);
    cfg.compute_coupling = j.value("compute_coupling", cfg.compute_coupling);
    cfg.save_trajectories = j.value("save_trajectories", cfg.save_trajectories);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    if (j.contains("thresholds")) cfg.thresholds = j.at("thresholds");

    if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty()) {
        throw std::invalid_argument("config: 'methods' must be a non-empty array");
    }
    for (const auto& m : j.at("methods")) {
        check_known_keys(m, {"name", "method", "max_rounds", "delta", "eta", "guidance",
                             "aidi_rounds", "stop_gradient", "normalized_step"},
                         "methods[]");
        MethodSpec spec;
        if (!m.contains("method")) {
            throw std::invalid_argument("config: methods[] entry is missing 'method'");
        }
        spec.config.method = method_from_string(m.at("method").get<std::string>());
        spec.config.max_rounds = m.value("max_rounds", spec.config.max_rounds);
        spec.config.delta = m.value("delta", spec.config.delta);
        spec.config.eta = m.value("eta", spec.config.eta);
        spec.config.guidance = m.value("guidance", spec.config.guidance);
        spec.config.aidi_rounds = m.value("aidi_rounds", spec.config.aidi_rounds);
        spec.config.stop_gradient = m.value("stop_gradient", spec.config.stop_gradient);
        spec.config.normalized_step =
            m.value("normalized_step", spec.config.normalized_step);
        spec.name = m.value("name", to_string(spec.config.method));
        cfg.methods.push_back(std::move(spec));
    }
    cfg.validate();
    return cfg;
}

json ExperimentConfig::to_json() const {
    json j;
    j["schedule"] = {{"num_train_steps", num_train_steps},
                     {"beta_start", beta_start},
                     {"beta_end", beta_end},
                     {"inference_steps", inference_steps}};
    j["predictor"] = predictor;
    j["trials"] = trials;
    j["seed"] = seed;
    j["conditions"] = {{"source", condition_source}, {"target", condition_target}};
    j["generation_guidance"] = generation_guidance;
    j["budget_matched"] = budget_matched;
    j["compute_edit"] = compute_edit;
    j["compute_coupling"] = compute_coupling;
    j["save_trajectories"] = save_trajectories;
    j["threads"] = threads;
    json methods_json = json::array();
    for (const auto& spec : methods) {
        json m;
        m["name"] = spec.name;
        m["method"] = to_string(spec.config.method);
        m["max_rounds"] = spec.config.max_rounds;
        m["delta"] = spec.config.delta;
        m["eta"] = spec.config.eta;
        m["guidance"] = spec.config.guidance;
        m["aidi_rounds"] = spec.config.aidi_rounds;
        m["stop_gradient"] = spec.config.stop_gradient;
        m["normalized_step"] = spec.config.normalized_step;
        methods_json.push_back(std::move(m));
    }
    j["methods"] = std::move(methods_json);
    if (!out_dir.empty()) j["out_dir"] = out_dir;
    if (!thresholds.is_null()) j["thresholds"] = thresholds;
    return j;
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("config: trials must be positive");
    if (threads < 1) throw std::invalid_argument("config: threads must be positive");
    if (save_trajectories < 0) {
        throw std::invalid_argument("config: save_trajectories must be >= 0");
    }
    if (methods.empty()) throw std::invalid_argument("config: needs at least one method");
    for (const auto& spec : methods) spec.config.validate();
    std::vector<std::string> names;
    for (const auto& spec : methods) {
        if (std::find(names.begin(), names.end(), spec.name) != names.end()) {
            throw std::invalid_argument("config: duplicate method name '" + spec.name + "'");
        }
        names.push_back(spec.name);
    }
}

std::unique_ptr<EpsilonPredictor> build_predictor(const json& spec,
                                                  const NoiseSchedule& schedule) {
    if (!spec.is_object() || !spec.contains("kind")) {
        throw std::invalid_argument("predictor: spec needs a 'kind'");
    }
    const auto kind = spec.at("kind").get<std::string>();
    if (kind == "file") {
        return load_model(spec.at("path").get<std::string>(), schedule);
    }
    if (kind == "gaussian_mixture") {
        check_known_keys(spec, {"kind", "sigma0_sq", "components"}, "predictor");
        std::vector<GmComponent> comps;
        for (const auto& cj : spec.at("components")) {
            check_known_keys(cj, {"mean", "weight", "label"}, "predictor.components[]");
            GmComponent comp;
            comp.mean = cj.at("mean").get<Vec>();
            comp.weight = cj.value("weight", 1.0);
            comp.label = cj.value("label", Condition::null_id);
            comps.push_back(std::move(comp));
        }
        return std::make_unique<GaussianMixture>(std::move(comps),
                                                 spec.at("sigma0_sq").get<double>(),
                                                 schedule);
    }
    if (kind == "gm_random") {
        // Components on deterministic random directions, labels assigned
        // round-robin over 'labels' groups. Component k sits at radius
        // radius * radius_factor^k, so factors above 1 lay a geometric
        // ladder of scales.
        check_known_keys(spec, {"kind", "dim", "components", "radius", "radius_factor",
                                "sigma0_sq", "labels", "component_seed"},
                         "predictor");
        const int dim = spec.at("dim").get<int>();
        const int count = spec.at("components").get<int>();
        const double radius = spec.at("radius").get<double>();
        const double factor = spec.value("radius_factor", 1.0);
        const int labels = spec.value("labels", 1);
        if (dim < 1 || count < 1 || labels < 1 || !(radius > 0.0) || !(factor > 0.0)) {
            throw std::invalid_argument("predictor: invalid gm_random parameters");
        }
        Rng rng(spec.value("component_seed", std::uint64_t{17}) ^ 0x676d72616e64ULL);
        std::vector<GmComponent> comps(static_cast<std::size_t>(count));
        double r_k = radius;
        for (int k = 0; k < count; ++k) {
            Vec dir = rng.gaussian_vec(static_cast<std::size_t>(dim));
            const double len = std::sqrt(kernels::squared_norm(dir));
            for (auto& v : dir) v *= r_k / len;
            comps[static_cast<std::size_t>(k)].mean = std::move(dir);
            comps[static_cast<std::size_t>(k)].weight = 1.0;
            comps[static_cast<std::size_t>(k)].label = k % labels;
            r_k *= factor;
        }
        return std::make_unique<GaussianMixture>(std::move(comps),
                                                 spec.at("sigma0_sq").get<double>(),
                                                 schedule);
    }
    if (kind == "linear") {
        check_known_keys(spec, {"kind", "matrix", "offset"}, "predictor");
        const auto rows = spec.at("matrix").get<std::vector<Vec>>();
        Vec offset = spec.at("offset").get<Vec>();
        std::vector<double> flat;
        for (const auto& r : rows) {
            if (r.size() != offset.size()) {
                throw std::invalid_argument("predictor: linear matrix row size mismatch");
            }
            flat.insert(flat.end(), r.begin(), r.end());
        }
        return std::make_unique<LinearModel>(std::move(flat), std::move(offset), schedule);
    }
    throw std::invalid_argument("predictor: unknown kind '" + kind + "'");
}

namespace {

struct StepStatAccumulator {
    std::vector<double> residual_sum;
    std::vector<double> rounds_sum;
    std::vector<long> count;

    void resize(std::size_t t_steps) {
        residual_sum.assign(t_steps, 0.0);
        rounds_sum.assign(t_steps, 0.0);
        count.assign(t_steps, 0);
    }
};

void write_outputs(const RunResult& result);

}  // namespace

const MethodAggregate& RunResult::aggregate(const std::string& name) const {
    for (const auto& agg : aggregates) {
        if (agg.name == name) return agg;
    }
    throw std::out_of_range("run result: no method named '" + name + "'");
}

RunResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    const NoiseSchedule schedule = NoiseSchedule::linear(
        config.num_train_steps, config.beta_start, config.beta_end,
        config.inference_steps);
    const auto predictor = build_predictor(config.predictor, schedule);
    const auto* gm = dynamic_cast<const GaussianMixture*>(predictor.get());
    const int t_steps = schedule.total_steps();
    const auto dim = static_cast<std::size_t>(predictor->dim());
    const Condition c_src = config.condition_source == Condition::null_id
                                ? Condition::null()
                                : Condition::label(config.condition_source);
    const Condition c_tgt = config.condition_target == Condition::null_id
                                ? Condition::null()
                                : Condition::label(config.condition_target);
    predictor->check_condition(c_src);
    if (config.compute_edit) predictor->check_condition(c_tgt);

    // Budget matching needs the spdinv per-step calls before aidi runs.
    if (config.budget_matched) {
        int spdinv_at = -1;
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            if (config.methods[m].config.method == Method::Spdinv && spdinv_at < 0) {
                spdinv_at = static_cast<int>(m);
            }
            if (config.methods[m].config.method == Method::Aidi && spdinv_at < 0) {
                throw std::invalid_argument(
                    "config: budget_matched needs a spdinv method listed before aidi");
            }
        }
    }

    RunResult result;
    result.config = config;
    result.trials.assign(config.methods.size(),
                         std::vector<TrialResult>(static_cast<std::size_t>(config.trials)));

    auto run_trial = [&](int trial) {
        Rng rng = Rng::for_trial(config.seed, static_cast<std::uint64_t>(trial));
        const Vec ideal_noise = rng.gaussian_vec(dim);
        Trajectory truth;
        Vec edit_reference;
        try {
            truth = generate(ideal_noise, c_src, *predictor, schedule,
                             config.generation_guidance);
            if (config.compute_edit) {
                edit_reference = generate(ideal_noise, c_tgt, *predictor, schedule,
                                          config.generation_guidance)
                                     .z0();
            }
        } catch (const std::exception& e) {
            for (std::size_t m = 0; m < config.methods.size(); ++m) {
                auto& tr = result.trials[m][static_cast<std::size_t>(trial)];
                tr.trial = trial;
                tr.error = std::string("ground truth generation failed: ") + e.what();
            }
            return;
        }

        std::vector<int> spdinv_calls;
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            const auto& spec = config.methods[m];
            auto& tr = result.trials[m][static_cast<std::size_t>(trial)];
            tr.trial = trial;
            tr.edit_divergence = nan_value;
            tr.coupling = nan_value;
            std::vector<StepRecord> progress;
            progress.reserve(static_cast<std::size_t>(t_steps));
            try {
                std::vector<int> aidi_rounds;
                const std::vector<int>* rounds_override = nullptr;
                if (config.budget_matched && spec.config.method == Method::Aidi &&
                    static_cast<int>(spdinv_calls.size()) == t_steps) {
                    aidi_rounds.resize(static_cast<std::size_t>(t_steps));
                    for (int t = 0; t < t_steps; ++t) {
                        aidi_rounds[static_cast<std::size_t>(t)] =
                            std::max(1, spdinv_calls[static_cast<std::size_t>(t)] - 2);
                    }
                    rounds_override = &aidi_rounds;
                }

                const Trajectory inverted =
                    invert(truth.z0(), c_src, *predictor, schedule, spec.config,
                           rounds_override, &progress);
                if (config.save_trajectories > trial && !config.out_dir.empty()) {
                    save_trajectory(inverted,
                                    (fs::path(config.out_dir) / "trajectories" /
                                     ("trial" + std::to_string(trial) + "_" + spec.name +
                                      ".traj"))
                                        .string());
                }

                if (spec.config.method == Method::Spdinv && spdinv_calls.empty()) {
                    spdinv_calls.resize(static_cast<std::size_t>(t_steps));
                    for (int t = 0; t < t_steps; ++t) {
                        spdinv_calls[static_cast<std::size_t>(t)] = static_cast<int>(
                            inverted.steps[static_cast<std::size_t>(t)].predictor_calls);
                    }
                }

                tr.gap = noise_gap(truth, inverted);
                tr.final_gap = tr.gap.back();
                const Trajectory roundtrip = generate(inverted.zT(), c_src, *predictor,
                                                      schedule, config.generation_guidance);
                const ReconGap recon = reconstruction_gap(truth.z0(), roundtrip.z0());
                tr.recon_mse = recon.mse;
                tr.recon_psnr = recon.psnr;
                if (config.compute_edit) {
                    const Trajectory edited = generate(inverted.zT(), c_tgt, *predictor,
                                                       schedule, config.generation_guidance);
                    tr.edit_divergence =
                        kernels::mean_squared_error(edit_reference, edited.z0());
                }
                if (config.compute_coupling && gm != nullptr && !c_src.is_null()) {
                    tr.coupling = coupling_score(inverted.zT(), c_src, *gm, schedule);
                }
                tr.ok = true;
            } catch (const StepAbort& abort) {
                tr.ok = false;
                tr.error = abort.what();
                tr.abort_step = abort.step;
                tr.abort_residual = abort.last_residual;
            } catch (const std::exception& e) {
                tr.ok = false;
                tr.error = e.what();
            }

            tr.step_initial_residual.reserve(progress.size());
            for (const auto& rec : progress) {
                tr.step_initial_residual.push_back(rec.initial_residual);
                tr.step_final_residual.push_back(rec.final_residual);
                tr.step_rounds.push_back(static_cast<double>(rec.rounds));
                tr.step_calls.push_back(rec.predictor_calls);
                tr.predictor_calls += rec.predictor_calls;
            }
            if (tr.ok) {
                tr.mean_initial_residual = mean_of(tr.step_initial_residual);
                tr.mean_final_residual = mean_of(tr.step_final_residual);
                tr.mean_rounds = mean_of(tr.step_rounds);
            }
        }

        if (config.save_trajectories > trial && !config.out_dir.empty()) {
            try {
                save_trajectory(truth, (fs::path(config.out_dir) / "trajectories" /
                                        ("trial" + std::to_string(trial) + "_truth.traj"))
                                           .string());
            } catch (const std::exception& e) {
                for (std::size_t m = 0; m < config.methods.size(); ++m) {
                    auto& tr = result.trials[m][static_cast<std::size_t>(trial)];
                    if (tr.error.empty()) tr.error = e.what();
                    tr.ok = false;
                }
            }
        }
    };

    if (config.save_trajectories > 0 && !config.out_dir.empty()) {
        fs::create_directories(fs::path(config.out_dir) / "trajectories");
    }

#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) num_threads(config.threads) \
    if (config.threads > 1)
#endif
    for (int trial = 0; trial < config.trials; ++trial) {
        run_trial(trial);
    }

    // Aggregation runs serially in declaration/trial order so the summary is
    // byte-identical for any thread count.
    const auto* naive_trials = [&]() -> const std::vector<TrialResult>* {
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            if (config.methods[m].config.method == Method::Naive) {
                return &result.trials[m];
            }
        }
        return nullptr;
    }();

    for (std::size_t m = 0; m < config.methods.size(); ++m) {
        const auto& spec = config.methods[m];
        MethodAggregate agg;
        agg.name = spec.name;
        agg.method = spec.config.method;
        agg.mean_gap_per_step.assign(static_cast<std::size_t>(t_steps) + 1, 0.0);
        StepStatAccumulator steps;
        steps.resize(static_cast<std::size_t>(t_steps));

        std::vector<double> final_gaps, recon_mses, recon_psnrs, edit_divs, couplings,
            abs_couplings, l0s, lfs, rounds;
        double rounds_first = 0.0, rounds_second = 0.0;
        long count_first = 0, count_second = 0;
        int edit_wins = 0, edit_pairs = 0;

        for (const auto& tr : result.trials[m]) {
            if (tr.ok) {
                ++agg.trials_ok;
                final_gaps.push_back(tr.final_gap);
                recon_mses.push_back(tr.recon_mse);
                if (std::isfinite(tr.recon_psnr)) {
                    recon_psnrs.push_back(tr.recon_psnr);
                } else {
                    ++agg.recon_psnr_inf_count;
                }
                if (!std::isnan(tr.edit_divergence)) edit_divs.push_back(tr.edit_divergence);
                if (!std::isnan(tr.coupling)) {
                    couplings.push_back(tr.coupling);
                    abs_couplings.push_back(std::fabs(tr.coupling));
                }
                l0s.push_back(tr.mean_initial_residual);
                lfs.push_back(tr.mean_final_residual);
                rounds.push_back(tr.mean_rounds);
                for (std::size_t t = 0; t < tr.gap.size(); ++t) {
                    agg.mean_gap_per_step[t] += tr.gap[t];
                }
                if (naive_trials && spec.config.method != Method::Naive &&
                    !std::isnan(tr.edit_divergence)) {
                    const auto& ref = (*naive_trials)[static_cast<std::size_t>(tr.trial)];
                    if (ref.ok && !std::isnan(ref.edit_divergence)) {
                        ++edit_pairs;
                        if (tr.edit_divergence < ref.edit_divergence) ++edit_wins;
                    }
                }
            } else {
                ++agg.trials_failed;
                if (tr.abort_step > 0) ++agg.guard_trips;
            }
            agg.total_predictor_calls += tr.predictor_calls;

            for (std::size_t t = 0; t < tr.step_final_residual.size(); ++t) {
                steps.residual_sum[t] += tr.step_final_residual[t];
                steps.rounds_sum[t] += tr.step_rounds[t];
                ++steps.count[t];
                const int step_index = static_cast<int>(t) + 1;
                if (step_index <= t_steps / 2) {
                    rounds_first += tr.step_rounds[t];
                    ++count_first;
                } else {
                    rounds_second += tr.step_rounds[t];
                    ++count_second;
                }
            }
            // The aborted step's last measured residual is still a
            // measurement; fold it into that step's statistics.
            if (!tr.ok && tr.abort_step >= 1 && tr.abort_step <= t_steps) {
                const auto t = static_cast<std::size_t>(tr.abort_step - 1);
                steps.residual_sum[t] += tr.abort_residual;
                ++steps.count[t];
            }
        }

        if (agg.trials_ok > 0) {
            for (auto& g : agg.mean_gap_per_step) g /= static_cast<double>(agg.trials_ok);
        }
        agg.mean_final_gap = mean_of(final_gaps);
        agg.mean_recon_mse = mean_of(recon_mses);
        agg.mean_recon_psnr = mean_of(recon_psnrs);
        agg.mean_edit_divergence = mean_of(edit_divs);
        agg.edit_win_rate_vs_naive =
            edit_pairs > 0 ? static_cast<double>(edit_wins) / edit_pairs : nan_value;
        agg.mean_coupling = mean_of(couplings);
        agg.mean_abs_coupling = mean_of(abs_couplings);
        agg.mean_initial_residual = mean_of(l0s);
        agg.mean_final_residual = mean_of(lfs);
        agg.mean_rounds = mean_of(rounds);
        agg.mean_rounds_first_half =
            count_first > 0 ? rounds_first / static_cast<double>(count_first) : nan_value;
        agg.mean_rounds_second_half =
            count_second > 0 ? rounds_second / static_cast<double>(count_second) : nan_value;
        agg.mean_step_final_residual.assign(static_cast<std::size_t>(t_steps), nan_value);
        agg.mean_step_rounds.assign(static_cast<std::size_t>(t_steps), nan_value);
        agg.step_samples = steps.count;
        for (std::size_t t = 0; t < steps.count.size(); ++t) {
            if (steps.count[t] > 0) {
                agg.mean_step_final_residual[t] =
                    steps.residual_sum[t] / static_cast<double>(steps.count[t]);
                agg.mean_step_rounds[t] =
                    steps.rounds_sum[t] / static_cast<double>(steps.count[t]);
            }
        }
        if (agg.trials_ok == 0) result.run_failed = true;
        result.aggregates.push_back(std::move(agg));
    }

    // Summary document.
    json summary;
    summary["config"] = config.to_json();
    json methods_json = json::array();
    for (const auto& agg : result.aggregates) {
        json mj;
        mj["name"] = agg.name;
        mj["method"] = to_string(agg.method);
        mj["trials_ok"] = agg.trials_ok;
        mj["trials_failed"] = agg.trials_failed;
        mj["guard_trips"] = agg.guard_trips;
        mj["mean_final_gap"] = json_double(agg.mean_final_gap);
        mj["mean_recon_mse"] = json_double(agg.mean_recon_mse);
        mj["mean_recon_psnr"] = json_double(agg.mean_recon_psnr);
        mj["recon_psnr_inf_count"] = agg.recon_psnr_inf_count;
        mj["mean_edit_divergence"] = json_double(agg.mean_edit_divergence);
        mj["edit_win_rate_vs_naive"] = json_double(agg.edit_win_rate_vs_naive);
        mj["mean_coupling"] = json_double(agg.mean_coupling);
        mj["mean_abs_coupling"] = json_double(agg.mean_abs_coupling);
        mj["mean_initial_residual"] = json_double(agg.mean_initial_residual);
        mj["mean_final_residual"] = json_double(agg.mean_final_residual);
        mj["mean_rounds"] = json_double(agg.mean_rounds);
        mj["mean_rounds_first_half"] = json_double(agg.mean_rounds_first_half);
        mj["mean_rounds_second_half"] = json_double(agg.mean_rounds_second_half);
        mj["total_predictor_calls"] = agg.total_predictor_calls;
        mj["mean_gap_per_step"] = json_doubles(agg.mean_gap_per_step);
        mj["mean_step_final_residual"] = json_doubles(agg.mean_step_final_residual);
        mj["mean_step_rounds"] = json_doubles(agg.mean_step_rounds);
        methods_json.push_back(std::move(mj));
    }
    summary["methods"] = std::move(methods_json);
    summary["run_failed"] = result.run_failed;

    if (!config.thresholds.is_null() && !config.thresholds.empty()) {
        json checks = json::array();
        const MethodAggregate* naive_agg = nullptr;
        for (const auto& agg : result.aggregates) {
            if (agg.method == Method::Naive) naive_agg = &agg;
        }
        for (const auto& agg : result.aggregates) {
            if (agg.method == Method::Naive || naive_agg == nullptr) continue;
            auto add_check = [&](const std::string& name, double value, double limit,
                                 bool is_max) {
                json c;
                c["method"] = agg.name;
                c["check"] = name;
                c["value"] = json_double(value);
                c["limit"] = limit;
                c["pass"] = std::isfinite(value) && (is_max ? value <= limit : value >= limit);
                checks.push_back(std::move(c));
            };
            if (config.thresholds.contains("gap_ratio_max")) {
                add_check("final_gap_ratio_vs_naive",
                          agg.mean_final_gap / naive_agg->mean_final_gap,
                          config.thresholds.at("gap_ratio_max").get<double>(), true);
            }
            if (config.thresholds.contains("recon_ratio_max")) {
                add_check("recon_mse_ratio_vs_naive",
                          agg.mean_recon_mse / naive_agg->mean_recon_mse,
                          config.thresholds.at("recon_ratio_max").get<double>(), true);
            }
            if (config.thresholds.contains("edit_win_min")) {
                add_check("edit_win_rate_vs_naive", agg.edit_win_rate_vs_naive,
                          config.thresholds.at("edit_win_min").get<double>(), false);
            }
        }
        bool all_pass = true;
        for (const auto& c : checks) {
            if (!c.at("pass").get<bool>()) all_pass = false;
        }
        summary["checks"] = std::move(checks);
        summary["checks_pass"] = all_pass;
    }
    result.summary = std::move(summary);

    if (!config.out_dir.empty()) write_outputs(result);
    return result;
}

namespace {

void write_outputs(const RunResult& result) {
    const fs::path dir(result.config.out_dir);
    fs::create_directories(dir);

    {
        std::ofstream os(dir / "summary.json");
        if (!os) throw std::runtime_error("harness: cannot write summary.json");
        os << result.summary.dump(2) << "\n";
    }
    {
        std::ofstream os(dir / "trials.jsonl");
        if (!os) throw std::runtime_error("harness: cannot write trials.jsonl");
        for (std::size_t m = 0; m < result.trials.size(); ++m) {
            for (const auto& tr : result.trials[m]) {
                json j;
                j["method"] = result.config.methods[m].name;
                j["trial"] = tr.trial;
                j["ok"] = tr.ok;
                if (!tr.ok) {
                    j["error"] = tr.error;
                    j["abort_step"] = tr.abort_step;
                    j["abort_residual"] = json_double(tr.abort_residual);
                } else {
                    j["final_gap"] = json_double(tr.final_gap);
                    j["recon_mse"] = json_double(tr.recon_mse);
                    j["recon_psnr"] = json_double(tr.recon_psnr);
                    j["edit_divergence"] = json_double(tr.edit_divergence);
                    j["coupling"] = json_double(tr.coupling);
                    j["mean_initial_residual"] = json_double(tr.mean_initial_residual);
                    j["mean_final_residual"] = json_double(tr.mean_final_residual);
                    j["mean_rounds"] = json_double(tr.mean_rounds);
                }
                j["predictor_calls"] = tr.predictor_calls;
                os << j.dump() << "\n";
            }
        }
    }
    {
        std::ofstream os(dir / "gap.csv");
        if (!os) throw std::runtime_error("harness: cannot write gap.csv");
        os << "t,method,gap\n";
        char buf[64];
        for (std::size_t m = 0; m < result.aggregates.size(); ++m) {
            const auto& agg = result.aggregates[m];
            for (std::size_t t = 0; t < agg.mean_gap_per_step.size(); ++t) {
                std::snprintf(buf, sizeof(buf), "%.17g", agg.mean_gap_per_step[t]);
                os << t << "," << agg.name << "," << buf << "\n";
            }
        }
    }
}

}  // namespace

json run_ablation(const ExperimentConfig& base, const std::string& parameter,
                  const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("ablation: no values given");
    json rows = json::array();
    for (double value : values) {
        ExperimentConfig cfg = base;
        if (parameter == "K") {
            for (auto& m : cfg.methods) m.config.max_rounds = static_cast<int>(value);
        } else if (parameter == "delta") {
            for (auto& m : cfg.methods) m.config.delta = value;
        } else if (parameter == "eta") {
            for (auto& m : cfg.methods) m.config.eta = value;
        } else if (parameter == "T") {
            cfg.inference_steps = static_cast<int>(value);
        } else {
            throw std::invalid_argument("ablation: unknown parameter '" + parameter +
                                        "' (expected K, delta, eta or T)");
        }
        char tag[64];
        std::snprintf(tag, sizeof(tag), "%s_%g", parameter.c_str(), value);
        if (!base.out_dir.empty()) {
            cfg.out_dir = (fs::path(base.out_dir) / tag).string();
        }
        const RunResult run = run_experiment(cfg);
        for (const auto& agg : run.aggregates) {
            json row;
            row["parameter"] = parameter;
            row["value"] = value;
            row["method"] = agg.name;
            row["trials_ok"] = agg.trials_ok;
            row["trials_failed"] = agg.trials_failed;
            row["guard_trips"] = agg.guard_trips;
            row["mean_final_residual"] = json_double(agg.mean_final_residual);
            row["mean_rounds"] = json_double(agg.mean_rounds);
            row["mean_final_gap"] = json_double(agg.mean_final_gap);
            row["run_failed"] = run.run_failed;
            rows.push_back(std::move(row));
        }
    }
    if (!base.out_dir.empty()) {
        fs::create_directories(base.out_dir);
        std::ofstream os(fs::path(base.out_dir) / "ablation.json");
        os << rows.dump(2) << "\n";
        std::ofstream csv(fs::path(base.out_dir) / "ablation.csv");
        csv << "parameter,value,method,trials_ok,trials_failed,guard_trips,"
               "mean_final_residual,mean_rounds,mean_final_gap\n";
        char buf[64];
        for (const auto& row : rows) {
            csv << row.at("parameter").get<std::string>() << ",";
            std::snprintf(buf, sizeof(buf), "%g", row.at("value").get<double>());
            csv << buf << "," << row.at("method").get<std::string>() << ","
                << row.at("trials_ok").get<int>() << ","
                << row.at("trials_failed").get<int>() << ","
                << row.at("guard_trips").get<int>() << ",";
            auto num = [&](const char* key) {
                if (row.at(key).is_null()) return std::string("nan");
                std::snprintf(buf, sizeof(buf), "%.17g", row.at(key).get<double>());
                return std::string(buf);
            };
            csv << num("mean_final_residual") << "," << num("mean_rounds") << ","
                << num("mean_final_gap") << "\n";
        }
    }
    return rows;
}

void write_plot_table(const std::vector<std::string>& run_dirs,
                      const std::string& csv_path) {
    std::ofstream os(csv_path);
    if (!os) throw std::runtime_error("report: cannot write '" + csv_path + "'");
    os << "t,method,gap\n";
    char buf[64];
    bool found = false;
    for (const auto& dir : run_dirs) {
        const fs::path summary_path = fs::path(dir) / "summary.json";
        if (!fs::exists(summary_path)) continue;
        std::ifstream is(summary_path);
        json summary;
        try {
            is >> summary;
        } catch (const json::exception& e) {
            throw std::runtime_error("report: malformed " + summary_path.string() + ": " +
                                     e.what());
        }
        found = true;
        for (const auto& mj : summary.at("methods")) {
            const auto name = mj.at("name").get<std::string>();
            const auto& gaps = mj.at("mean_gap_per_step");
            for (std::size_t t = 0; t < gaps.size(); ++t) {
                if (gaps[t].is_null()) continue;
                std::snprintf(buf, sizeof(buf), "%.17g", gaps[t].get<double>());
                os << t << "," << name << "," << buf << "\n";
            }
        }
    }
    if (!found) {
        throw std::runtime_error("report: no summary.json found under the given inputs");
    }
}

}  // namespace invlab
