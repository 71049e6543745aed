#pragma once

#include <vector>

#include "invlab/inversion.hpp"
#include "invlab/sampler.hpp"

namespace invlab {

// Per-step MSE between a ground-truth generation path and an inverted path
// over the same schedule; entry t compares the two z_t (length T+1, /dim).
std::vector<double> noise_gap(const Trajectory& truth, const Trajectory& inverted);

struct ReconGap {
    double mse = 0.0;
    double psnr = 0.0;  // +inf sentinel when mse == 0
};

// Round-trip reconstruction error; PSNR peak is the max |value| of the
// reference latent.
ReconGap reconstruction_gap(const Vec& z0, const Vec& z0_rec);

// Distance (MSE) between the generation endpoints reached from an inverted
// noise code and from the ideal one, under the target condition.
double edit_divergence(const Vec& zT_star, const Vec& zT_hat, Condition c_target,
                       const EpsilonPredictor& model, const NoiseSchedule& schedule,
                       double w = 1.0);

// Conditional-vs-unconditional log-likelihood difference of a noise code
// under the time-T marginal; zero for prompt-independent noise (and exactly
// zero for the null condition).
double coupling_score(const Vec& zT, Condition c, const GaussianMixture& model,
                      const NoiseSchedule& schedule);

}  // namespace invlab
