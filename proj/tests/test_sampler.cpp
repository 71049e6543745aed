#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "invlab/sampler.hpp"
#include "invlab/rng.hpp"
#include "test_helpers.hpp"

using namespace invlab;
using namespace invlab::test;

namespace {

const NoiseSchedule& sched() {
    static const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2, 50);
    return s;
}

}  // namespace

TEST_CASE("ddim_step with eps == 0 scales by s1") {
    const auto zero = constant_predictor(Vec{0.0, 0.0}, sched());
    const Vec z{2.0, -4.0};
    const Vec out = ddim_step(z, 10, zero, Condition::null(), sched());
    const auto k = sched().coefficients(10);
    CHECK(out == Vec{k.s1 * 2.0, k.s1 * -4.0});
}

TEST_CASE("degenerate equal-alpha step is the identity") {
    const auto s = NoiseSchedule::from_alpha_bar({0.9, 0.5, 0.5});
    const auto gm = single_gaussian(2, 1.0, s);
    const Vec z{1.25, -0.75};
    const Vec out = ddim_step(z, 2, gm, Condition::null(), s);
    CHECK(out == z);
}

TEST_CASE("one linear-predictor step matches the affine closed form") {
    const LinearModel lin({0.2, 0.1, -0.1, 0.3}, Vec{0.5, -0.5}, sched());
    const Vec z{1.0, 2.0};
    const int t = 7;
    const auto k = sched().coefficients(t);
    const Vec out = ddim_step(z, t, lin, Condition::null(), sched());
    const Vec eps{0.2 * 1.0 + 0.1 * 2.0 + 0.5, -0.1 * 1.0 + 0.3 * 2.0 - 0.5};
    for (int i = 0; i < 2; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        CHECK(out[ui] == doctest::Approx(k.s1 * z[ui] + k.s2 * eps[ui]).epsilon(1e-15));
    }
}

TEST_CASE("T = 1 trajectory has two states") {
    const auto s = NoiseSchedule::from_alpha_bar({1.0, 0.25});
    const auto gm = single_gaussian(2, 1.0, s);
    const auto traj = generate(Vec{1.0, -1.0}, Condition::null(), gm, s);
    CHECK(traj.states.size() == 2);
    CHECK(traj.noise_record.size() == 1);
    CHECK(traj.direction == Direction::Generation);
    CHECK(traj.zT() == Vec{1.0, -1.0});
}

TEST_CASE("generation is deterministic") {
    const auto gm = labeled_mixture(3, 4, 2.0, 0.5, sched(), 42);
    Rng rng(17);
    const Vec zT = rng.gaussian_vec(3);
    const auto a = generate(zT, Condition::label(0), gm, sched());
    const auto b = generate(zT, Condition::label(0), gm, sched());
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t t = 0; t < a.states.size(); ++t) CHECK(a.states[t] == b.states[t]);
}

TEST_CASE("inverse-consistency: recorded noise reconstructs every state") {
    const auto gm = labeled_mixture(4, 5, 2.5, 0.4, sched(), 43);
    Rng rng(18);
    const Vec zT = rng.gaussian_vec(4);
    const auto traj = generate(zT, Condition::label(1), gm, sched());
    for (int t = 1; t <= traj.total_steps; ++t) {
        const auto k = sched().coefficients(t);
        const Vec& below = traj.states[static_cast<std::size_t>(t) - 1];
        const Vec& eps = traj.noise_record[static_cast<std::size_t>(t) - 1];
        const Vec& expected = traj.states[static_cast<std::size_t>(t)];
        for (std::size_t i = 0; i < below.size(); ++i) {
            const double rebuilt = k.c1 * below[i] + k.c2 * eps[i];
            CHECK(std::fabs(rebuilt - expected[i]) < 1e-10);
        }
    }
}

TEST_CASE("generated z0 population variance approaches the data variance") {
    // Single zero-mean component with sigma0^2 = 1: the data law is N(0, I).
    const auto gm = single_gaussian(2, 1.0, sched());
    Rng rng(19);
    double sum = 0.0, sum_sq = 0.0;
    long n = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Vec zT = rng.gaussian_vec(2);
        const auto traj = generate(zT, Condition::null(), gm, sched());
        for (double v : traj.z0()) {
            sum += v;
            sum_sq += v * v;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum_sq / static_cast<double>(n) - mean * mean;
    CHECK(var == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("non-finite states abort with the failing step named") {
    // An expanding predictor quickly overflows a large starting state.
    const LinearModel boom({1e200, 0.0, 0.0, 1e200}, Vec{0.0, 0.0}, sched());
    try {
        (void)generate(Vec{1e200, 1e200}, Condition::null(), boom, sched());
        FAIL("expected StepAbort");
    } catch (const StepAbort& e) {
        CHECK(e.step >= 1);
        CHECK(std::string(e.what()).find("step t=") != std::string::npos);
    }
}

TEST_CASE("trajectory validation catches malformed shapes") {
    const auto gm = single_gaussian(2, 1.0, sched());
    Rng rng(20);
    auto traj = generate(rng.gaussian_vec(2), Condition::null(), gm, sched());
    CHECK_NOTHROW(traj.validate());
    auto broken = traj;
    broken.states.pop_back();
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
    broken = traj;
    broken.states[3] = Vec{1.0};
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);
}
