#pragma once

#include <cstdint>
#include <vector>

#include "invlab/predictor.hpp"

namespace invlab {

struct MlpShape {
    int dim = 2;
    int hidden = 64;
    int time_features = 8;   // even; sin/cos pairs of t/T
    int cond_features = 4;   // learned embedding width
    int num_labels = 0;      // labels are 0..num_labels-1; null has its own row
    int total_steps = 50;    // normalizes the time embedding

    int input_size() const { return dim + time_features + cond_features; }
};

struct MlpTrainingRecord {
    int epochs = 0;
    double learning_rate = 0.0;
    std::uint64_t seed = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

// Two hidden tanh layers over [z, time embedding, condition embedding].
// Reverse-mode rules are written out by hand; no autodiff dependency.
// Parameters are frozen after construction; vjp differentiates through z only.
class MlpDenoiser : public EpsilonPredictor {
public:
    MlpDenoiser(MlpShape shape, std::vector<double> params, MlpTrainingRecord record);

    static MlpDenoiser random_init(const MlpShape& shape, std::uint64_t seed);

    int dim() const override { return shape_.dim; }
    Vec predict(const Vec& z, int t, Condition c) const override;
    Vec vjp(const Vec& z, int t, Condition c, const Vec& v) const override;
    void check_condition(Condition c) const override;

    const MlpShape& shape() const { return shape_; }
    const std::vector<double>& params() const { return params_; }
    const MlpTrainingRecord& record() const { return record_; }

    static std::size_t param_count(const MlpShape& shape);

private:
    friend MlpDenoiser train_mlp(const std::vector<std::pair<Vec, Condition>>&,
                                 const NoiseSchedule&, int, double, std::uint64_t,
                                 const MlpShape&);

    struct Activations {
        Vec input, a1, h1, a2, h2, out;
    };
    Activations forward(const Vec& z, int t, Condition c) const;
    Vec embed_input(const Vec& z, int t, Condition c) const;
    int cond_row(Condition c) const;

    // Parameter layout offsets into params_.
    std::size_t w1_off_, b1_off_, w2_off_, b2_off_, w3_off_, b3_off_, cond_off_;

    MlpShape shape_;
    std::vector<double> params_;
    MlpTrainingRecord record_;
};

Vec sinusoidal_time_embedding(int t, int total_steps, int features);

// Denoising objective: draw t uniform in 1..T, corrupt a data point with
// gaussian noise through the schedule, regress the injected noise. Adam,
// fixed minibatch of 32, 10% condition dropout to the null row.
// Deterministic for a given seed.
MlpDenoiser train_mlp(const std::vector<std::pair<Vec, Condition>>& dataset,
                      const NoiseSchedule& schedule, int epochs, double learning_rate,
                      std::uint64_t seed, const MlpShape& shape);

}  // namespace invlab
