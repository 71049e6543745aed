#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "invlab/predictor.hpp"
#include "invlab/schedule.hpp"

namespace invlab {

enum class Direction { Generation, Inversion };

std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

// A step produced non-finite values or the inner loop diverged.
struct StepAbort : std::runtime_error {
    StepAbort(const std::string& what, int step_index, double initial_residual_in,
              double last_residual_in)
        : std::runtime_error(what + " (step t=" + std::to_string(step_index) + ")"),
          step(step_index),
          initial_residual(initial_residual_in),
          last_residual(last_residual_in) {}

    int step;
    double initial_residual;
    double last_residual;
};

// Per-step diagnostics; for generation only the call count is meaningful.
struct StepRecord {
    double initial_residual = 0.0;
    double final_residual = 0.0;
    int rounds = 0;
    long predictor_calls = 0;
};

// Ordered latent states z_0..z_T, indexed by t regardless of the direction
// the path was produced in, plus per-step diagnostics. Generation paths also
// record every noise estimate so inverse-consistency checks need no model.
struct Trajectory {
    Direction direction = Direction::Generation;
    int dim = 0;
    int total_steps = 0;
    Condition condition;
    double guidance = 1.0;
    std::uint64_t schedule_hash = 0;
    std::string method;
    std::vector<Vec> states;        // size T+1, index t
    std::vector<Vec> noise_record;  // size T when recorded; [t-1] is eps of step t
    std::vector<StepRecord> steps;  // size T, [t-1] is the record for step t

    const Vec& z0() const { return states.front(); }
    const Vec& zT() const { return states.back(); }
    long total_predictor_calls() const;
    void validate() const;
};

// One deterministic denoising step z_t -> z_{t-1}.
Vec ddim_step(const Vec& z_t, int t, const EpsilonPredictor& model, Condition c,
              const NoiseSchedule& schedule, double w = 1.0, long* calls = nullptr);

// Full denoising path from z_T; records every noise estimate.
Trajectory generate(const Vec& z_T, Condition c, const EpsilonPredictor& model,
                    const NoiseSchedule& schedule, double w = 1.0);

}  // namespace invlab
