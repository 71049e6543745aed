#pragma once

#include <cstdint>
#include <vector>

namespace invlab {

// Per-step affine coefficients shared by the sampler and the inversion maps.
//
// Inversion direction:  z_t     = c1 * z_{t-1} + c2 * eps
// Sampling direction:   z_{t-1} = s1 * z_t     + s2 * eps
//
// c1 = sqrt(ab_t / ab_{t-1}),  c2 = sqrt(ab_t) * (sqrt(1/ab_t - 1) - sqrt(1/ab_{t-1} - 1))
// and (s1, s2) is the same pair with the two indices swapped, so the two maps
// are exact mutual inverses for a shared eps.
struct StepCoefficients {
    double c1 = 0.0;
    double c2 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
};

// Cumulative signal-retention sequence alpha_bar over inference steps.
// Index t runs 0..T with t = 0 the clean-data end; alpha_bar is
// non-increasing, positive, and at most 1.
class NoiseSchedule {
public:
    // Linear beta schedule over num_train_steps training steps, subsampled to
    // inference_steps evenly spaced entries of the running product
    // P_i = prod_{j<i} (1 - beta_j) (P_0 = 1). Strictly decreasing.
    static NoiseSchedule linear(int num_train_steps, double beta_start,
                                double beta_end, int inference_steps);

    // Direct construction, used by tests to build degenerate schedules.
    // Requires entries in (0, 1], finite, non-increasing.
    static NoiseSchedule from_alpha_bar(std::vector<double> alpha_bar);

    int total_steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    double alpha_bar(int t) const;
    const std::vector<double>& alpha_bar() const { return alpha_bar_; }

    // Coefficients of the step between t-1 and t, 1 <= t <= total_steps().
    StepCoefficients coefficients(int t) const;

    std::uint64_t hash() const { return hash_; }

private:
    explicit NoiseSchedule(std::vector<double> alpha_bar);

    std::vector<double> alpha_bar_;
    std::uint64_t hash_ = 0;
};

}  // namespace invlab
