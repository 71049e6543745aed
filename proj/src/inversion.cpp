#include "invlab/inversion.hpp"

#include <cmath>
#include <stdexcept>

namespace invlab {

std::string to_string(Method m) {
    switch (m) {
        case Method::Naive: return "naive";
        case Method::Aidi: return "aidi";
        case Method::Spdinv: return "spdinv";
    }
    throw std::logic_error("unreachable");
}

Method method_from_string(const std::string& s) {
    if (s == "naive") return Method::Naive;
    if (s == "aidi") return Method::Aidi;
    if (s == "spdinv") return Method::Spdinv;
    throw std::invalid_argument("inversion: unknown method '" + s + "'");
}

void SPDInvConfig::validate() const {
    if (max_rounds < 0) throw std::invalid_argument("config: max_rounds must be >= 0");
    if (!(delta >= 0.0)) throw std::invalid_argument("config: delta must be >= 0");
    if (!(eta > 0.0)) throw std::invalid_argument("config: eta must be > 0");
    if (aidi_rounds < 1) throw std::invalid_argument("config: aidi_rounds must be >= 1");
    if (total_steps < 0) throw std::invalid_argument("config: total_steps must be >= 0");
}

namespace {

void check_step_range(int t, const NoiseSchedule& schedule, const char* what) {
    if (t < 1 || t > schedule.total_steps()) {
        throw std::out_of_range(std::string(what) + ": step " + std::to_string(t) +
                                " outside 1.." + std::to_string(schedule.total_steps()));
    }
}

}  // namespace

Vec naive_invert_step(const Vec& z_prev, int t, const EpsilonPredictor& model,
                      Condition c, const NoiseSchedule& schedule, double w,
                      long* calls) {
    check_step_range(t, schedule, "naive_invert_step");
    const auto k = schedule.coefficients(t);
    const Vec eps = guided_predict(model, z_prev, t - 1, c, w, calls);
    Vec out(z_prev.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = k.c1 * z_prev[i] + k.c2 * eps[i];
    }
    if (!kernels::all_finite(out)) {
        throw StepAbort("naive_invert_step: non-finite state", t, 0.0, 0.0);
    }
    return out;
}

Vec fixed_point_map(const Vec& z, const Vec& z_prev, int t,
                    const EpsilonPredictor& model, Condition c,
                    const NoiseSchedule& schedule, double w, long* calls) {
    check_step_range(t, schedule, "fixed_point_map");
    if (z.size() != z_prev.size()) {
        throw std::invalid_argument("fixed_point_map: dimension mismatch");
    }
    const auto k = schedule.coefficients(t);
    const Vec eps = guided_predict(model, z, t, c, w, calls);
    Vec out(z.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = k.c2 * eps[i] + k.c1 * z_prev[i];
    }
    return out;
}

double residual_loss(const Vec& z, const Vec& z_prev, int t,
                     const EpsilonPredictor& model, Condition c,
                     const NoiseSchedule& schedule, double w, long* calls) {
    const Vec f = fixed_point_map(z, z_prev, t, model, c, schedule, w, calls);
    return std::sqrt(kernels::squared_distance(f, z));
}

Vec residual_grad(const Vec& z, const Vec& z_prev, int t,
                  const EpsilonPredictor& model, Condition c,
                  const NoiseSchedule& schedule, double w, long* calls) {
    const Vec f = fixed_point_map(z, z_prev, t, model, c, schedule, w, calls);
    const Vec r = kernels::sub(f, z);
    const double l = std::sqrt(kernels::squared_norm(r));
    if (l == 0.0) return Vec(z.size(), 0.0);

    const auto k = schedule.coefficients(t);
    const Vec jr = guided_vjp(model, z, t, c, r, w, calls);
    Vec grad(z.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] = (k.c2 * jr[i] - r[i]) / l;
    }
    return grad;
}

StepResult spdinv_step(const Vec& z_prev, int t, const EpsilonPredictor& model,
                       Condition c, const NoiseSchedule& schedule,
                       const SPDInvConfig& config) {
    config.validate();
    check_step_range(t, schedule, "spdinv_step");
    const auto k = schedule.coefficients(t);
    const double w = config.guidance;

    StepResult res;
    Vec z = naive_invert_step(z_prev, t, model, c, schedule, w, &res.predictor_calls);

    Vec best = z;
    double best_l = -1.0;
    for (int i = 0;; ++i) {
        const Vec f = fixed_point_map(z, z_prev, t, model, c, schedule, w,
                                      &res.predictor_calls);
        const Vec r = kernels::sub(f, z);
        const double l = std::sqrt(kernels::squared_norm(r));
        if (!std::isfinite(l)) {
            throw StepAbort("spdinv_step: non-finite residual", t, res.initial_residual, l);
        }
        if (i == 0) res.initial_residual = l;
        if (best_l < 0.0 || l < best_l) {
            best_l = l;
            best = z;
        }
        if (l < config.delta || i == config.max_rounds) break;
        if (l > 10.0 * res.initial_residual && res.initial_residual > 0.0) {
            throw StepAbort("spdinv_step: residual exceeded 10x its initial value"
                            " (eta too large for this predictor)",
                            t, res.initial_residual, l);
        }

        const double scale = config.normalized_step && l > 0.0 ? 1.0 / l : 1.0;
        if (config.stop_gradient) {
            // eps frozen within the round: descend along r.
            for (std::size_t j = 0; j < z.size(); ++j) z[j] += config.eta * scale * r[j];
        } else {
            const Vec jr = guided_vjp(model, z, t, c, r, w, &res.predictor_calls);
            for (std::size_t j = 0; j < z.size(); ++j) {
                z[j] -= config.eta * scale * (k.c2 * jr[j] - r[j]);
            }
        }
        res.rounds = i + 1;
    }
    res.z = std::move(best);
    res.final_residual = best_l;
    return res;
}

StepResult aidi_step(const Vec& z_prev, int t, const EpsilonPredictor& model,
                     Condition c, const NoiseSchedule& schedule, double w, int rounds) {
    if (rounds < 1) throw std::invalid_argument("aidi_step: rounds must be >= 1");
    check_step_range(t, schedule, "aidi_step");

    StepResult res;
    Vec z = naive_invert_step(z_prev, t, model, c, schedule, w, &res.predictor_calls);
    Vec f = fixed_point_map(z, z_prev, t, model, c, schedule, w, &res.predictor_calls);
    res.initial_residual = std::sqrt(kernels::squared_distance(f, z));

    double l = res.initial_residual;
    for (int n = 1; n <= rounds; ++n) {
        z = std::move(f);
        f = fixed_point_map(z, z_prev, t, model, c, schedule, w, &res.predictor_calls);
        l = std::sqrt(kernels::squared_distance(f, z));
        if (!std::isfinite(l)) {
            throw StepAbort("aidi_step: non-finite residual", t, res.initial_residual, l);
        }
        if (l > 10.0 * res.initial_residual && res.initial_residual > 0.0) {
            throw StepAbort("aidi_step: residual exceeded 10x its initial value"
                            " (the map is not a contraction here)",
                            t, res.initial_residual, l);
        }
        res.rounds = n;
    }
    res.z = std::move(z);
    res.final_residual = l;
    return res;
}

Trajectory invert(const Vec& z0, Condition c, const EpsilonPredictor& model,
                  const NoiseSchedule& schedule, const SPDInvConfig& config,
                  const std::vector<int>* aidi_round_schedule,
                  std::vector<StepRecord>* progress) {
    config.validate();
    if (!kernels::all_finite(z0)) {
        throw std::invalid_argument("invert: non-finite input latent");
    }
    if (static_cast<int>(z0.size()) != model.dim()) {
        throw std::invalid_argument("invert: dimension mismatch");
    }
    if (auto bound = model.schedule_hash(); bound && *bound != schedule.hash()) {
        throw std::invalid_argument("invert: model is bound to a different schedule");
    }
    const int t_steps = schedule.total_steps();
    if (config.total_steps != 0 && config.total_steps != t_steps) {
        throw std::invalid_argument("invert: config total_steps (" +
                                    std::to_string(config.total_steps) +
                                    ") disagrees with schedule (" +
                                    std::to_string(t_steps) + ")");
    }
    if (aidi_round_schedule &&
        static_cast<int>(aidi_round_schedule->size()) != t_steps) {
        throw std::invalid_argument("invert: aidi round schedule length mismatch");
    }
    model.check_condition(c);

    Trajectory traj;
    traj.direction = Direction::Inversion;
    traj.dim = static_cast<int>(z0.size());
    traj.total_steps = t_steps;
    traj.condition = c;
    traj.guidance = config.guidance;
    traj.schedule_hash = schedule.hash();
    traj.method = to_string(config.method);
    traj.states.assign(static_cast<std::size_t>(t_steps) + 1, Vec{});
    traj.steps.assign(static_cast<std::size_t>(t_steps), StepRecord{});
    traj.states[0] = z0;

    for (int t = 1; t <= t_steps; ++t) {
        const Vec& prev = traj.states[static_cast<std::size_t>(t) - 1];
        StepResult res;
        switch (config.method) {
            case Method::Naive: {
                Vec z = naive_invert_step(prev, t, model, c, schedule, config.guidance,
                                          &res.predictor_calls);
                const double l = residual_loss(z, prev, t, model, c, schedule,
                                               config.guidance, &res.predictor_calls);
                res.z = std::move(z);
                res.initial_residual = l;
                res.final_residual = l;
                break;
            }
            case Method::Spdinv:
                res = spdinv_step(prev, t, model, c, schedule, config);
                break;
            case Method::Aidi: {
                const int rounds = aidi_round_schedule
                                       ? (*aidi_round_schedule)[static_cast<std::size_t>(t) - 1]
                                       : config.aidi_rounds;
                res = aidi_step(prev, t, model, c, schedule, config.guidance, rounds);
                break;
            }
        }
        traj.states[static_cast<std::size_t>(t)] = std::move(res.z);
        auto& rec = traj.steps[static_cast<std::size_t>(t) - 1];
        rec.initial_residual = res.initial_residual;
        rec.final_residual = res.final_residual;
        rec.rounds = res.rounds;
        rec.predictor_calls = res.predictor_calls;
        if (progress) progress->push_back(rec);
    }
    return traj;
}

}  // namespace invlab
