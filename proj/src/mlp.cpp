#include "invlab/mlp.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "invlab/rng.hpp"

namespace invlab {

namespace {

void validate_shape(const MlpShape& s) {
    if (s.dim < 1 || s.hidden < 1 || s.cond_features < 1 || s.total_steps < 1) {
        throw std::invalid_argument("mlp: invalid shape");
    }
    if (s.time_features < 2 || s.time_features % 2 != 0) {
        throw std::invalid_argument("mlp: time_features must be even and >= 2");
    }
    if (s.num_labels < 0) throw std::invalid_argument("mlp: negative label count");
}

}  // namespace

Vec sinusoidal_time_embedding(int t, int total_steps, int features) {
    Vec te(static_cast<std::size_t>(features));
    const double tau = static_cast<double>(t) / static_cast<double>(total_steps);
    const double pi = 3.14159265358979323846;
    for (int j = 0; j < features / 2; ++j) {
        const double freq = pi * std::pow(2.0, j);
        te[static_cast<std::size_t>(2 * j)] = std::sin(freq * tau);
        te[static_cast<std::size_t>(2 * j) + 1] = std::cos(freq * tau);
    }
    return te;
}

std::size_t MlpDenoiser::param_count(const MlpShape& s) {
    const auto in = static_cast<std::size_t>(s.input_size());
    const auto h = static_cast<std::size_t>(s.hidden);
    const auto d = static_cast<std::size_t>(s.dim);
    const auto rows = static_cast<std::size_t>(s.num_labels) + 1;
    return h * in + h + h * h + h + d * h + d + rows * static_cast<std::size_t>(s.cond_features);
}

MlpDenoiser::MlpDenoiser(MlpShape shape, std::vector<double> params,
                         MlpTrainingRecord record)
    : shape_(shape), params_(std::move(params)), record_(record) {
    validate_shape(shape_);
    if (params_.size() != param_count(shape_)) {
        throw std::invalid_argument("mlp: parameter blob size mismatch, expected " +
                                    std::to_string(param_count(shape_)) + ", got " +
                                    std::to_string(params_.size()));
    }
    if (!kernels::all_finite(params_)) {
        throw std::invalid_argument("mlp: non-finite parameters");
    }
    const auto in = static_cast<std::size_t>(shape_.input_size());
    const auto h = static_cast<std::size_t>(shape_.hidden);
    const auto d = static_cast<std::size_t>(shape_.dim);
    w1_off_ = 0;
    b1_off_ = w1_off_ + h * in;
    w2_off_ = b1_off_ + h;
    b2_off_ = w2_off_ + h * h;
    w3_off_ = b2_off_ + h;
    b3_off_ = w3_off_ + d * h;
    cond_off_ = b3_off_ + d;
}

MlpDenoiser MlpDenoiser::random_init(const MlpShape& shape, std::uint64_t seed) {
    validate_shape(shape);
    Rng rng(seed ^ 0x6d6c70696e6974ULL);
    std::vector<double> params(param_count(shape));
    const auto in = static_cast<std::size_t>(shape.input_size());
    const auto h = static_cast<std::size_t>(shape.hidden);
    const auto d = static_cast<std::size_t>(shape.dim);
    std::size_t pos = 0;
    auto fill_layer = [&](std::size_t rows, std::size_t cols) {
        const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (std::size_t i = 0; i < rows * cols; ++i) {
            params[pos++] = s * (2.0 * rng.uniform() - 1.0);
        }
        pos += rows;  // biases stay zero
    };
    fill_layer(h, in);
    fill_layer(h, h);
    fill_layer(d, h);
    const auto rows = static_cast<std::size_t>(shape.num_labels) + 1;
    for (std::size_t i = 0; i < rows * static_cast<std::size_t>(shape.cond_features); ++i) {
        params[pos++] = 0.1 * (2.0 * rng.uniform() - 1.0);
    }
    MlpTrainingRecord record;
    record.seed = seed;
    return MlpDenoiser(shape, std::move(params), record);
}

void MlpDenoiser::check_condition(Condition c) const {
    if (c.is_null()) return;
    if (c.id < 0 || c.id >= shape_.num_labels) {
        throw std::invalid_argument("mlp: unknown condition label " + std::to_string(c.id));
    }
}

int MlpDenoiser::cond_row(Condition c) const {
    check_condition(c);
    return c.is_null() ? 0 : 1 + c.id;
}

Vec MlpDenoiser::embed_input(const Vec& z, int t, Condition c) const {
    if (static_cast<int>(z.size()) != shape_.dim) {
        throw std::invalid_argument("mlp: dimension mismatch, expected " +
                                    std::to_string(shape_.dim) + ", got " +
                                    std::to_string(z.size()));
    }
    if (t < 0) throw std::out_of_range("mlp: negative step");
    Vec x(static_cast<std::size_t>(shape_.input_size()));
    std::size_t pos = 0;
    for (double v : z) x[pos++] = v;
    const Vec te = sinusoidal_time_embedding(t, shape_.total_steps, shape_.time_features);
    for (double v : te) x[pos++] = v;
    const auto row = static_cast<std::size_t>(cond_row(c));
    const auto cf = static_cast<std::size_t>(shape_.cond_features);
    for (std::size_t j = 0; j < cf; ++j) x[pos++] = params_[cond_off_ + row * cf + j];
    return x;
}

MlpDenoiser::Activations MlpDenoiser::forward(const Vec& z, int t, Condition c) const {
    Activations act;
    act.input = embed_input(z, t, c);
    const auto in = static_cast<std::size_t>(shape_.input_size());
    const auto h = static_cast<std::size_t>(shape_.hidden);
    const auto d = static_cast<std::size_t>(shape_.dim);

    act.a1.resize(h);
    act.h1.resize(h);
    for (std::size_t r = 0; r < h; ++r) {
        double acc = params_[b1_off_ + r];
        const double* w = &params_[w1_off_ + r * in];
        for (std::size_t cix = 0; cix < in; ++cix) acc += w[cix] * act.input[cix];
        act.a1[r] = acc;
        act.h1[r] = std::tanh(acc);
    }
    act.a2.resize(h);
    act.h2.resize(h);
    for (std::size_t r = 0; r < h; ++r) {
        double acc = params_[b2_off_ + r];
        const double* w = &params_[w2_off_ + r * h];
        for (std::size_t cix = 0; cix < h; ++cix) acc += w[cix] * act.h1[cix];
        act.a2[r] = acc;
        act.h2[r] = std::tanh(acc);
    }
    act.out.resize(d);
    for (std::size_t r = 0; r < d; ++r) {
        double acc = params_[b3_off_ + r];
        const double* w = &params_[w3_off_ + r * h];
        for (std::size_t cix = 0; cix < h; ++cix) acc += w[cix] * act.h2[cix];
        act.out[r] = acc;
    }
    return act;
}

Vec MlpDenoiser::predict(const Vec& z, int t, Condition c) const {
    return forward(z, t, c).out;
}

Vec MlpDenoiser::vjp(const Vec& z, int t, Condition c, const Vec& v) const {
    if (v.size() != static_cast<std::size_t>(shape_.dim)) {
        throw std::invalid_argument("mlp: vjp vector dimension mismatch");
    }
    const Activations act = forward(z, t, c);
    const auto in = static_cast<std::size_t>(shape_.input_size());
    const auto h = static_cast<std::size_t>(shape_.hidden);
    const auto d = static_cast<std::size_t>(shape_.dim);

    Vec g_a2(h, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        const double* w = &params_[w3_off_ + r * h];
        for (std::size_t cix = 0; cix < h; ++cix) g_a2[cix] += w[cix] * v[r];
    }
    for (std::size_t cix = 0; cix < h; ++cix) {
        g_a2[cix] *= 1.0 - act.h2[cix] * act.h2[cix];
    }
    Vec g_a1(h, 0.0);
    for (std::size_t r = 0; r < h; ++r) {
        const double* w = &params_[w2_off_ + r * h];
        for (std::size_t cix = 0; cix < h; ++cix) g_a1[cix] += w[cix] * g_a2[r];
    }
    for (std::size_t cix = 0; cix < h; ++cix) {
        g_a1[cix] *= 1.0 - act.h1[cix] * act.h1[cix];
    }
    Vec g_z(d, 0.0);
    for (std::size_t r = 0; r < h; ++r) {
        const double* w = &params_[w1_off_ + r * in];
        for (std::size_t cix = 0; cix < d; ++cix) g_z[cix] += w[cix] * g_a1[r];
    }
    return g_z;
}

MlpDenoiser train_mlp(const std::vector<std::pair<Vec, Condition>>& dataset,
                      const NoiseSchedule& schedule, int epochs, double learning_rate,
                      std::uint64_t seed, const MlpShape& shape) {
    if (dataset.empty()) throw std::invalid_argument("train_mlp: empty dataset");
    if (epochs < 0) throw std::invalid_argument("train_mlp: negative epochs");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train_mlp: lr must be > 0");
    MlpShape s = shape;
    s.total_steps = schedule.total_steps();

    MlpDenoiser model = MlpDenoiser::random_init(s, seed);
    for (const auto& [x, c] : dataset) {
        if (static_cast<int>(x.size()) != s.dim) {
            throw std::invalid_argument("train_mlp: data point dimension mismatch");
        }
        model.check_condition(c);
    }
    model.record_.epochs = epochs;
    model.record_.learning_rate = learning_rate;
    model.record_.seed = seed;
    if (epochs == 0) return model;

    auto& params = model.params_;
    const std::size_t np = params.size();
    std::vector<double> grad(np), m1(np, 0.0), m2(np, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long adam_step = 0;

    Rng rng(seed ^ 0x747261696eULL);
    const auto in = static_cast<std::size_t>(s.input_size());
    const auto h = static_cast<std::size_t>(s.hidden);
    const auto d = static_cast<std::size_t>(s.dim);
    const int batch = 32;
    const int total_steps = schedule.total_steps();

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        double epoch_loss = 0.0;
        std::size_t epoch_count = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            double batch_loss = 0.0;
            for (std::size_t pos = start; pos < stop; ++pos) {
                const auto& [x0, cond_raw] = dataset[order[pos]];
                const Condition cond = rng.uniform() < 0.1 ? Condition::null() : cond_raw;
                const int t = rng.uniform_int(1, total_steps);
                const double ab = schedule.alpha_bar(t);
                const double sig = std::sqrt(1.0 - ab);
                const double sc = std::sqrt(ab);
                Vec noise = rng.gaussian_vec(d);
                Vec z(d);
                for (std::size_t i2 = 0; i2 < d; ++i2) z[i2] = sc * x0[i2] + sig * noise[i2];

                const auto act = model.forward(z, t, cond);
                Vec g_out(d);
                double sample_loss = 0.0;
                for (std::size_t i2 = 0; i2 < d; ++i2) {
                    const double r = act.out[i2] - noise[i2];
                    sample_loss += r * r;
                    g_out[i2] = 2.0 * r / static_cast<double>(d);
                }
                batch_loss += sample_loss / static_cast<double>(d);

                // Backprop into all parameters (z itself is not a parameter).
                Vec g_a2(h, 0.0);
                for (std::size_t r = 0; r < d; ++r) {
                    grad[model.b3_off_ + r] += g_out[r];
                    double* gw = &grad[model.w3_off_ + r * h];
                    const double* w = &params[model.w3_off_ + r * h];
                    for (std::size_t cix = 0; cix < h; ++cix) {
                        gw[cix] += g_out[r] * act.h2[cix];
                        g_a2[cix] += w[cix] * g_out[r];
                    }
                }
                for (std::size_t cix = 0; cix < h; ++cix) {
                    g_a2[cix] *= 1.0 - act.h2[cix] * act.h2[cix];
                }
                Vec g_a1(h, 0.0);
                for (std::size_t r = 0; r < h; ++r) {
                    grad[model.b2_off_ + r] += g_a2[r];
                    double* gw = &grad[model.w2_off_ + r * h];
                    const double* w = &params[model.w2_off_ + r * h];
                    for (std::size_t cix = 0; cix < h; ++cix) {
                        gw[cix] += g_a2[r] * act.h1[cix];
                        g_a1[cix] += w[cix] * g_a2[r];
                    }
                }
                for (std::size_t cix = 0; cix < h; ++cix) {
                    g_a1[cix] *= 1.0 - act.h1[cix] * act.h1[cix];
                }
                Vec g_in(in, 0.0);
                for (std::size_t r = 0; r < h; ++r) {
                    grad[model.b1_off_ + r] += g_a1[r];
                    double* gw = &grad[model.w1_off_ + r * in];
                    const double* w = &params[model.w1_off_ + r * in];
                    for (std::size_t cix = 0; cix < in; ++cix) {
                        gw[cix] += g_a1[r] * act.input[cix];
                        g_in[cix] += w[cix] * g_a1[r];
                    }
                }
                const auto row = static_cast<std::size_t>(model.cond_row(cond));
                const auto cf = static_cast<std::size_t>(s.cond_features);
                for (std::size_t j = 0; j < cf; ++j) {
                    grad[model.cond_off_ + row * cf + j] +=
                        g_in[d + static_cast<std::size_t>(s.time_features) + j];
                }
            }
            const auto count = static_cast<double>(stop - start);
            epoch_loss += batch_loss;
            epoch_count += stop - start;
            ++adam_step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_step));
            for (std::size_t i2 = 0; i2 < np; ++i2) {
                const double g = grad[i2] / count;
                m1[i2] = beta1 * m1[i2] + (1.0 - beta1) * g;
                m2[i2] = beta2 * m2[i2] + (1.0 - beta2) * g * g;
                params[i2] -= learning_rate * (m1[i2] / bc1) /
                              (std::sqrt(m2[i2] / bc2) + adam_eps);
            }
        }
        const double mean_loss = epoch_loss / static_cast<double>(epoch_count);
        if (epoch == 0) model.record_.initial_loss = mean_loss;
        model.record_.final_loss = mean_loss;
    }
    return model;
}

}  // namespace invlab
