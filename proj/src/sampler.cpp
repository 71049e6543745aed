#include "invlab/sampler.hpp"

namespace invlab {

std::string to_string(Direction d) {
    return d == Direction::Generation ? "generation" : "inversion";
}

Direction direction_from_string(const std::string& s) {
    if (s == "generation") return Direction::Generation;
    if (s == "inversion") return Direction::Inversion;
    throw std::invalid_argument("trajectory: unknown direction '" + s + "'");
}

long Trajectory::total_predictor_calls() const {
    long total = 0;
    for (const auto& rec : steps) total += rec.predictor_calls;
    return total;
}

void Trajectory::validate() const {
    if (static_cast<int>(states.size()) != total_steps + 1) {
        throw std::invalid_argument("trajectory: expected " +
                                    std::to_string(total_steps + 1) + " states, got " +
                                    std::to_string(states.size()));
    }
    if (static_cast<int>(steps.size()) != total_steps) {
        throw std::invalid_argument("trajectory: diagnostics length mismatch");
    }
    if (!noise_record.empty() && static_cast<int>(noise_record.size()) != total_steps) {
        throw std::invalid_argument("trajectory: noise record length mismatch");
    }
    for (const auto& s : states) {
        if (static_cast<int>(s.size()) != dim) {
            throw std::invalid_argument("trajectory: state dimension mismatch");
        }
        if (!kernels::all_finite(s)) {
            throw std::invalid_argument("trajectory: non-finite state");
        }
    }
}

Vec ddim_step(const Vec& z_t, int t, const EpsilonPredictor& model, Condition c,
              const NoiseSchedule& schedule, double w, long* calls) {
    if (t < 1 || t > schedule.total_steps()) {
        throw std::out_of_range("ddim_step: step " + std::to_string(t) + " outside 1.." +
                                std::to_string(schedule.total_steps()));
    }
    const auto k = schedule.coefficients(t);
    const Vec eps = guided_predict(model, z_t, t, c, w, calls);
    Vec out(z_t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = k.s1 * z_t[i] + k.s2 * eps[i];
    if (!kernels::all_finite(out)) {
        throw StepAbort("ddim_step: non-finite state", t, 0.0, 0.0);
    }
    return out;
}

Trajectory generate(const Vec& z_T, Condition c, const EpsilonPredictor& model,
                    const NoiseSchedule& schedule, double w) {
    if (!kernels::all_finite(z_T)) {
        throw std::invalid_argument("generate: non-finite starting noise");
    }
    if (static_cast<int>(z_T.size()) != model.dim()) {
        throw std::invalid_argument("generate: dimension mismatch");
    }
    if (auto bound = model.schedule_hash(); bound && *bound != schedule.hash()) {
        throw std::invalid_argument("generate: model is bound to a different schedule");
    }
    model.check_condition(c);

    const int t_steps = schedule.total_steps();
    Trajectory traj;
    traj.direction = Direction::Generation;
    traj.dim = static_cast<int>(z_T.size());
    traj.total_steps = t_steps;
    traj.condition = c;
    traj.guidance = w;
    traj.schedule_hash = schedule.hash();
    traj.method = "generate";
    traj.states.assign(static_cast<std::size_t>(t_steps) + 1, Vec{});
    traj.noise_record.assign(static_cast<std::size_t>(t_steps), Vec{});
    traj.steps.assign(static_cast<std::size_t>(t_steps), StepRecord{});

    traj.states[static_cast<std::size_t>(t_steps)] = z_T;
    for (int t = t_steps; t >= 1; --t) {
        long calls = 0;
        const auto k = schedule.coefficients(t);
        const Vec& cur = traj.states[static_cast<std::size_t>(t)];
        Vec eps = guided_predict(model, cur, t, c, w, &calls);
        Vec next(cur.size());
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] = k.s1 * cur[i] + k.s2 * eps[i];
        }
        if (!kernels::all_finite(next)) {
            throw StepAbort("generate: non-finite state", t, 0.0, 0.0);
        }
        traj.states[static_cast<std::size_t>(t) - 1] = std::move(next);
        traj.noise_record[static_cast<std::size_t>(t) - 1] = std::move(eps);
        traj.steps[static_cast<std::size_t>(t) - 1].predictor_calls = calls;
    }
    return traj;
}

}  // namespace invlab
