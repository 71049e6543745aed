#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "invlab/metrics.hpp"
#include "invlab/rng.hpp"
#include "test_helpers.hpp"

using namespace invlab;
using namespace invlab::test;

namespace {

const NoiseSchedule& sched() {
    static const auto s = NoiseSchedule::linear(1000, 1e-4, 2e-2, 50);
    return s;
}

std::pair<Trajectory, Trajectory> matched_pair(std::uint64_t seed) {
    const auto gm = labeled_mixture(4, 4, 2.5, 0.2, sched(), 80);
    Rng rng(seed);
    const auto truth = generate(rng.gaussian_vec(4), Condition::label(0), gm, sched());
    SPDInvConfig cfg;
    cfg.method = Method::Naive;
    const auto inv = invert(truth.z0(), Condition::label(0), gm, sched(), cfg);
    return {truth, inv};
}

}  // namespace

TEST_CASE("noise_gap of a trajectory against itself is zero") {
    auto [truth, inv] = matched_pair(81);
    Trajectory clone = inv;
    clone.states = truth.states;  // identical states, inversion tag
    const auto gap = noise_gap(truth, clone);
    REQUIRE(gap.size() == 51);
    for (double g : gap) CHECK(g == 0.0);
}

TEST_CASE("noise_gap of a constant offset is |u|^2 / d") {
    auto [truth, inv] = matched_pair(82);
    Trajectory shifted = inv;
    const Vec u{0.1, -0.2, 0.3, 0.4};
    shifted.states = truth.states;
    for (auto& s : shifted.states) {
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += u[i];
    }
    const double expected = kernels::squared_norm(u) / 4.0;
    for (double g : noise_gap(truth, shifted)) {
        CHECK(g == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("noise_gap is symmetric in the two states and zero iff identical") {
    auto [truth, inv] = matched_pair(83);
    const auto gap_ab = noise_gap(truth, inv);
    // Swap the state payloads between the two wrappers.
    Trajectory truth_swapped = truth;
    Trajectory inv_swapped = inv;
    truth_swapped.states = inv.states;
    inv_swapped.states = truth.states;
    const auto gap_ba = noise_gap(truth_swapped, inv_swapped);
    REQUIRE(gap_ab.size() == gap_ba.size());
    for (std::size_t t = 0; t < gap_ab.size(); ++t) {
        CHECK(gap_ab[t] == gap_ba[t]);
        CHECK((gap_ab[t] == 0.0) == (truth.states[t] == inv.states[t]));
    }
}

TEST_CASE("noise_gap rejects mismatched pairings") {
    auto [truth, inv] = matched_pair(84);
    CHECK_THROWS_AS((void)noise_gap(truth, truth), std::invalid_argument);
    CHECK_THROWS_AS((void)noise_gap(inv, inv), std::invalid_argument);

    Trajectory wrong_hash = inv;
    wrong_hash.schedule_hash ^= 1;
    CHECK_THROWS_WITH_AS((void)noise_gap(truth, wrong_hash),
                         doctest::Contains("schedule_hash"), std::invalid_argument);

    const auto other_sched = NoiseSchedule::linear(1000, 1e-4, 2e-2, 25);
    const auto gm25 = labeled_mixture(4, 4, 2.5, 0.2, other_sched, 80);
    Rng rng(85);
    const auto truth25 =
        generate(rng.gaussian_vec(4), Condition::label(0), gm25, other_sched);
    CHECK_THROWS_AS((void)noise_gap(truth25, inv), std::invalid_argument);
}

TEST_CASE("reconstruction_gap basics") {
    const Vec z{1.0, -2.0, 0.5};
    const auto same = reconstruction_gap(z, z);
    CHECK(same.mse == 0.0);
    CHECK(std::isinf(same.psnr));

    Vec off = z;
    for (auto& v : off) v += 0.1;
    const auto shifted = reconstruction_gap(z, off);
    CHECK(shifted.mse == doctest::Approx(0.01).epsilon(1e-9));
    // peak = 2, so psnr = 10 log10(4 / 0.01)
    CHECK(shifted.psnr == doctest::Approx(10.0 * std::log10(400.0)).epsilon(1e-9));
}

TEST_CASE("psnr strictly decreases as mse grows") {
    const Vec z{1.0, 1.0, 1.0, 1.0};
    double last_psnr = std::numeric_limits<double>::infinity();
    for (double step : {0.01, 0.05, 0.2, 0.7}) {
        Vec off = z;
        for (auto& v : off) v += step;
        const auto g = reconstruction_gap(z, off);
        CHECK(g.psnr < last_psnr);
        last_psnr = g.psnr;
    }
}

TEST_CASE("edit_divergence is zero for the ideal code and scales with the gap") {
    const auto gm = labeled_mixture(3, 4, 2.0, 0.3, sched(), 86);
    Rng rng(87);
    const Vec zT = rng.gaussian_vec(3);
    CHECK(edit_divergence(zT, zT, Condition::label(1), gm, sched()) == 0.0);
}

TEST_CASE("edit_divergence closed form under eps == 0") {
    const auto zero = constant_predictor(Vec{0.0, 0.0}, sched());
    Rng rng(88);
    const Vec z_star = rng.gaussian_vec(2);
    Vec z_hat = z_star;
    z_hat[0] += 0.25;
    z_hat[1] -= 0.5;
    // Every step multiplies by s1, so the endpoint gap is (prod s1)^2 |dz|^2 / d.
    double prod = 1.0;
    for (int t = 1; t <= 50; ++t) prod *= sched().coefficients(t).s1;
    const double expected =
        prod * prod * (0.25 * 0.25 + 0.5 * 0.5) / 2.0;
    const double got = edit_divergence(z_star, z_hat, Condition::null(), zero, sched());
    CHECK(got == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("coupling_score: null condition is exactly zero") {
    const auto gm = labeled_mixture(3, 4, 2.0, 0.3, sched(), 89);
    Rng rng(90);
    CHECK(coupling_score(rng.gaussian_vec(3), Condition::null(), gm, sched()) == 0.0);
}

TEST_CASE("coupling_score: unconditional draws average near zero") {
    // E_p0[log p(c|z)] - something; the spec asks |mean| < 3 standard errors
    // over draws from the unconditional time-T marginal. At T the marginal is
    // nearly the standard normal prior.
    const auto gm = labeled_mixture(3, 4, 2.0, 0.3, sched(), 91);
    Rng rng(92);
    const int n = 1000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        // Draw from the unconditional time-T marginal: pick a component by
        // weight, then scale and add noise.
        const auto& comps = gm.components();
        double u = rng.uniform();
        std::size_t pick = 0;
        for (; pick + 1 < comps.size(); ++pick) {
            if (u < comps[pick].weight) break;
            u -= comps[pick].weight;
        }
        const double ab = sched().alpha_bar(50);
        const double v = ab * gm.sigma0_sq() + (1.0 - ab);
        Vec z(3);
        for (int j = 0; j < 3; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            z[uj] = std::sqrt(ab) * comps[pick].mean[uj] + std::sqrt(v) * rng.gaussian();
        }
        const double s = coupling_score(z, Condition::label(0), gm, sched());
        sum += s;
        sum_sq += s * s;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    const double stderr_mean = std::sqrt(var / n);
    CHECK(std::fabs(mean) < 3.0 * stderr_mean);
}

TEST_CASE("coupling_score rejects a foreign schedule") {
    const auto gm = labeled_mixture(3, 4, 2.0, 0.3, sched(), 93);
    const auto other = NoiseSchedule::linear(1000, 1e-4, 2e-2, 25);
    Rng rng(94);
    CHECK_THROWS_AS(
        (void)coupling_score(rng.gaussian_vec(3), Condition::label(0), gm, other),
        std::invalid_argument);
}

TEST_CASE("metrics do not mutate their inputs") {
    auto [truth, inv] = matched_pair(95);
    const auto truth_states = truth.states;
    const auto inv_states = inv.states;
    (void)noise_gap(truth, inv);
    (void)reconstruction_gap(truth.z0(), inv.z0());
    CHECK(truth.states == truth_states);
    CHECK(inv.states == inv_states);
}
