#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "invlab/kernels.hpp"
#include "invlab/rng.hpp"

using namespace invlab;

TEST_CASE("serial and parallel kernels are bit-identical") {
    Rng rng(31);
    // Sizes straddling the reduction block boundary.
    for (std::size_t n : {std::size_t{1}, std::size_t{7}, kernels::reduce_block - 1,
                          kernels::reduce_block, kernels::reduce_block + 1,
                          3 * kernels::reduce_block + 17}) {
        Vec x = rng.gaussian_vec(n), y = rng.gaussian_vec(n);
        CHECK(kernels::serial::dot(x.data(), y.data(), n) ==
              kernels::parallel::dot(x.data(), y.data(), n));
        CHECK(kernels::serial::squared_norm(x.data(), n) ==
              kernels::parallel::squared_norm(x.data(), n));
        CHECK(kernels::serial::squared_distance(x.data(), y.data(), n) ==
              kernels::parallel::squared_distance(x.data(), y.data(), n));

        Vec ys = y, yp = y;
        kernels::serial::axpby(0.3, x.data(), -1.7, ys.data(), n);
        kernels::parallel::axpby(0.3, x.data(), -1.7, yp.data(), n);
        CHECK(ys == yp);

        Vec outs(n), outp(n);
        kernels::serial::sub(x.data(), y.data(), outs.data(), n);
        kernels::parallel::sub(x.data(), y.data(), outp.data(), n);
        CHECK(outs == outp);
    }
}

TEST_CASE("blocked reductions agree with a plain loop") {
    Rng rng(32);
    const std::size_t n = 10001;
    Vec x = rng.gaussian_vec(n), y = rng.gaussian_vec(n);
    double plain = 0.0;
    for (std::size_t i = 0; i < n; ++i) plain += x[i] * y[i];
    const double blocked = kernels::dot(x, y);
    CHECK(std::fabs(blocked - plain) <= 1e-9 * std::fabs(plain) + 1e-12);
}

TEST_CASE("vector helpers") {
    Vec x{1.0, 2.0, 3.0};
    Vec y{0.5, 0.5, 0.5};
    CHECK(kernels::norm(y) == doctest::Approx(std::sqrt(0.75)));
    CHECK(kernels::mean_squared_error(x, x) == 0.0);
    CHECK(kernels::mean_squared_error(x, y) ==
          doctest::Approx((0.25 + 2.25 + 6.25) / 3.0));
    Vec d = kernels::sub(x, y);
    CHECK(d == Vec{0.5, 1.5, 2.5});
    kernels::axpby(2.0, x, 1.0, y);
    CHECK(y == Vec{2.5, 4.5, 6.5});

    CHECK(kernels::all_finite(x));
    Vec bad{1.0, std::nan(""), 0.0};
    CHECK_FALSE(kernels::all_finite(bad));
    Vec inf{1.0, std::numeric_limits<double>::infinity()};
    CHECK_FALSE(kernels::all_finite(inf));
    CHECK(kernels::max_abs(Vec{-3.0, 2.0}) == 3.0);

    CHECK_THROWS_AS((void)kernels::dot(x, Vec{1.0}), std::invalid_argument);
}
