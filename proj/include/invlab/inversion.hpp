#pragma once

#include <string>
#include <vector>

#include "invlab/sampler.hpp"

namespace invlab {

enum class Method { Naive, Aidi, Spdinv };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// Knobs of the per-step fixed-point search and of the baselines.
struct SPDInvConfig {
    int max_rounds = 25;      // K
    double delta = 5e-6;      // residual threshold for early stop
    double eta = 1e-3;        // learning rate
    int total_steps = 0;      // T; 0 means "whatever the schedule says"
    double guidance = 1.0;    // w applied inside inversion
    Method method = Method::Spdinv;
    int aidi_rounds = 50;
    bool stop_gradient = false;   // treat eps as constant within a round
    bool normalized_step = false; // step along grad L itself, not L * grad L

    void validate() const;
};

struct StepResult {
    Vec z;
    double initial_residual = 0.0;  // L0 at the one-step initialization
    double final_residual = 0.0;    // residual of the returned iterate
    int rounds = 0;                 // gradient updates / map applications
    long predictor_calls = 0;
};

// One-step inversion that feeds the model the previous state and step:
// z_t = c1 * z_{t-1} + c2 * eps(z_{t-1}, t-1, c).
Vec naive_invert_step(const Vec& z_prev, int t, const EpsilonPredictor& model,
                      Condition c, const NoiseSchedule& schedule, double w = 1.0,
                      long* calls = nullptr);

// f(z) = c2 * eps(z, t, c) + c1 * z_{t-1}; its fixed point is the state the
// sampler would have denoised into z_{t-1}.
Vec fixed_point_map(const Vec& z, const Vec& z_prev, int t,
                    const EpsilonPredictor& model, Condition c,
                    const NoiseSchedule& schedule, double w = 1.0,
                    long* calls = nullptr);

// L = ||f(z) - z||_2 over the flattened latent (no normalization, so
// thresholds are dimension-dependent).
double residual_loss(const Vec& z, const Vec& z_prev, int t,
                     const EpsilonPredictor& model, Condition c,
                     const NoiseSchedule& schedule, double w = 1.0,
                     long* calls = nullptr);

// grad L = (J_f - I)^T r / ||r|| with r = f(z) - z and J_f = c2 * d eps/d z;
// one predict plus one vjp. Returns the zero vector at r = 0.
Vec residual_grad(const Vec& z, const Vec& z_prev, int t,
                  const EpsilonPredictor& model, Condition c,
                  const NoiseSchedule& schedule, double w = 1.0,
                  long* calls = nullptr);

// Gradient-descent fixed-point search from the one-step initialization.
// Each round costs one predict (residual) and, unless the threshold fires,
// one vjp (update). By default the update steps along (J_f - I)^T r, i.e.
// descends L^2/2, so steps shrink with the residual and delta is reachable;
// with normalized_step it follows grad L itself (unit-scale steps of size
// eta, the textbook norm gradient). delta and the divergence guard act on L
// in both cases; the returned iterate is the lowest-residual one seen.
// Aborts if L exceeds 10x L0.
StepResult spdinv_step(const Vec& z_prev, int t, const EpsilonPredictor& model,
                       Condition c, const NoiseSchedule& schedule,
                       const SPDInvConfig& config);

// Fixed-round direct iteration z <- f(z) from the same initialization, with
// the residual of the returned iterate measured at the end. Same guard.
StepResult aidi_step(const Vec& z_prev, int t, const EpsilonPredictor& model,
                     Condition c, const NoiseSchedule& schedule, double w, int rounds);

// Full inversion z_0 -> z_T with per-step diagnostics. For AIDI an optional
// per-step round budget overrides config.aidi_rounds (used for call-budget
// matched comparisons). When `progress` is given, each completed step's
// record is appended to it as the loop runs, so an abort still leaves the
// diagnostics of everything that finished.
Trajectory invert(const Vec& z0, Condition c, const EpsilonPredictor& model,
                  const NoiseSchedule& schedule, const SPDInvConfig& config,
                  const std::vector<int>* aidi_round_schedule = nullptr,
                  std::vector<StepRecord>* progress = nullptr);

}  // namespace invlab
