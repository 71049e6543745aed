#include "invlab/schedule.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace invlab {

namespace {

std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar)
    : alpha_bar_(std::move(alpha_bar)) {
    hash_ = 0xcbf29ce484222325ULL;
    const std::uint64_t len = alpha_bar_.size();
    hash_ = fnv1a_bytes(&len, sizeof(len), hash_);
    hash_ = fnv1a_bytes(alpha_bar_.data(), alpha_bar_.size() * sizeof(double), hash_);
}

NoiseSchedule NoiseSchedule::linear(int num_train_steps, double beta_start,
                                    double beta_end, int inference_steps) {
    if (num_train_steps < 1) {
        throw std::invalid_argument("schedule: num_train_steps must be positive");
    }
    if (inference_steps < 1) {
        throw std::invalid_argument("schedule: inference_steps must be positive");
    }
    if (inference_steps > num_train_steps) {
        throw std::invalid_argument(
            "schedule: inference_steps (" + std::to_string(inference_steps) +
            ") exceeds num_train_steps (" + std::to_string(num_train_steps) + ")");
    }
    if (!(beta_start > 0.0 && beta_start < 1.0) || !(beta_end > 0.0 && beta_end < 1.0)) {
        throw std::invalid_argument("schedule: beta values must lie in (0, 1)");
    }
    if (!(beta_start < beta_end)) {
        throw std::invalid_argument("schedule: beta_start must be below beta_end");
    }

    const int n = num_train_steps;
    // Running products including the empty product at index 0.
    std::vector<double> products(static_cast<std::size_t>(n) + 1);
    products[0] = 1.0;
    for (int i = 0; i < n; ++i) {
        const double beta =
            n == 1 ? beta_start
                   : beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                                      static_cast<double>(n - 1);
        products[static_cast<std::size_t>(i) + 1] =
            products[static_cast<std::size_t>(i)] * (1.0 - beta);
    }

    const int t_steps = inference_steps;
    std::vector<double> alpha_bar(static_cast<std::size_t>(t_steps) + 1);
    for (int t = 0; t <= t_steps; ++t) {
        const auto idx = static_cast<std::size_t>(std::llround(
            static_cast<double>(t) * static_cast<double>(n) / static_cast<double>(t_steps)));
        alpha_bar[static_cast<std::size_t>(t)] = products[idx];
    }
    for (int t = 1; t <= t_steps; ++t) {
        if (!(alpha_bar[static_cast<std::size_t>(t)] <
              alpha_bar[static_cast<std::size_t>(t) - 1])) {
            throw std::invalid_argument("schedule: alpha_bar is not strictly decreasing");
        }
    }
    if (!(alpha_bar.back() > 0.0)) {
        throw std::invalid_argument("schedule: alpha_bar[T] underflowed to zero");
    }
    return NoiseSchedule(std::move(alpha_bar));
}

NoiseSchedule NoiseSchedule::from_alpha_bar(std::vector<double> alpha_bar) {
    if (alpha_bar.size() < 2) {
        throw std::invalid_argument("schedule: need at least two alpha_bar entries");
    }
    double prev = 1.0 + 1e-15;
    for (double a : alpha_bar) {
        if (!std::isfinite(a) || !(a > 0.0) || a > 1.0) {
            throw std::invalid_argument("schedule: alpha_bar entries must lie in (0, 1]");
        }
        if (a > prev) {
            throw std::invalid_argument("schedule: alpha_bar must be non-increasing");
        }
        prev = a;
    }
    return NoiseSchedule(std::move(alpha_bar));
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > total_steps()) {
        throw std::out_of_range("schedule: step index " + std::to_string(t) +
                                " outside 0.." + std::to_string(total_steps()));
    }
    return alpha_bar_[static_cast<std::size_t>(t)];
}

StepCoefficients NoiseSchedule::coefficients(int t) const {
    if (t < 1 || t > total_steps()) {
        throw std::out_of_range("schedule: coefficient step " + std::to_string(t) +
                                " outside 1.." + std::to_string(total_steps()));
    }
    const double ab_cur = alpha_bar_[static_cast<std::size_t>(t)];
    const double ab_prev = alpha_bar_[static_cast<std::size_t>(t) - 1];
    const double root_cur = std::sqrt(ab_cur);
    const double root_prev = std::sqrt(ab_prev);
    const double tail_cur = std::sqrt(1.0 / ab_cur - 1.0);
    const double tail_prev = std::sqrt(1.0 / ab_prev - 1.0);

    StepCoefficients k;
    k.c1 = root_cur / root_prev;
    k.c2 = root_cur * (tail_cur - tail_prev);
    k.s1 = root_prev / root_cur;
    k.s2 = root_prev * (tail_prev - tail_cur);
    return k;
}

}  // namespace invlab
