#include "invlab/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace invlab {

std::vector<double> noise_gap(const Trajectory& truth, const Trajectory& inverted) {
    if (truth.direction != Direction::Generation) {
        throw std::invalid_argument("noise_gap: first trajectory must be a generation path");
    }
    if (inverted.direction != Direction::Inversion) {
        throw std::invalid_argument("noise_gap: second trajectory must be an inversion path");
    }
    if (truth.dim != inverted.dim) {
        throw std::invalid_argument("noise_gap: dim mismatch (" + std::to_string(truth.dim) +
                                    " vs " + std::to_string(inverted.dim) + ")");
    }
    if (truth.total_steps != inverted.total_steps) {
        throw std::invalid_argument("noise_gap: total_steps mismatch (" +
                                    std::to_string(truth.total_steps) + " vs " +
                                    std::to_string(inverted.total_steps) + ")");
    }
    if (truth.schedule_hash != inverted.schedule_hash) {
        throw std::invalid_argument(
            "noise_gap: schedule_hash mismatch, refusing to pair trajectories");
    }
    std::vector<double> gap(truth.states.size());
    for (std::size_t t = 0; t < truth.states.size(); ++t) {
        gap[t] = kernels::mean_squared_error(truth.states[t], inverted.states[t]);
    }
    return gap;
}

ReconGap reconstruction_gap(const Vec& z0, const Vec& z0_rec) {
    ReconGap out;
    out.mse = kernels::mean_squared_error(z0, z0_rec);
    if (out.mse == 0.0) {
        out.psnr = std::numeric_limits<double>::infinity();
        return out;
    }
    const double peak = kernels::max_abs(z0);
    out.psnr = 10.0 * std::log10(peak * peak / out.mse);
    return out;
}

double edit_divergence(const Vec& zT_star, const Vec& zT_hat, Condition c_target,
                       const EpsilonPredictor& model, const NoiseSchedule& schedule,
                       double w) {
    if (zT_star.size() != zT_hat.size()) {
        throw std::invalid_argument("edit_divergence: dimension mismatch");
    }
    const Trajectory ideal = generate(zT_star, c_target, model, schedule, w);
    const Trajectory edited = generate(zT_hat, c_target, model, schedule, w);
    return kernels::mean_squared_error(ideal.z0(), edited.z0());
}

double coupling_score(const Vec& zT, Condition c, const GaussianMixture& model,
                      const NoiseSchedule& schedule) {
    if (model.schedule_hash() != schedule.hash()) {
        throw std::invalid_argument("coupling_score: model is bound to a different schedule");
    }
    if (c.is_null()) return 0.0;
    const int t_steps = schedule.total_steps();
    return model.log_marginal(zT, t_steps, c) -
           model.log_marginal(zT, t_steps, Condition::null());
}

}  // namespace invlab
