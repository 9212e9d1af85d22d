#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "fbq/errors.hpp"
#include "fbq/numerics.hpp"
#include "fbq/rng.hpp"
#include "fbq/stats.hpp"

using namespace fbq;

TEST_CASE("quadrature against closed forms") {
    CHECK(num::integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(num::integrate([](double x) { return std::exp(-x); }, 0.0, 30.0) ==
          doctest::Approx(-std::expm1(-30.0)).epsilon(1e-12));
    // Kinked integrand: |x - 0.3| on [0, 1] = (0.09 + 0.49) / 2.
    const std::vector<double> bp = {0.3};
    CHECK(num::integrate([](double x) { return std::abs(x - 0.3); }, 0.0, 1.0, bp) ==
          doctest::Approx(0.29).epsilon(1e-13));
    CHECK(num::integrate([](double) { return 1.0; }, 2.0, 2.0) == 0.0);
}

TEST_CASE("bisection and golden section") {
    const double r = num::bisect([](double x) { return x * x - 2.0; }, 0.0, 2.0);
    CHECK(r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS_AS(num::bisect([](double x) { return x * x + 1.0; }, 0.0, 2.0), NumericError);
    const auto [x, fx] = num::golden_max([](double x) { return -(x - 1.25) * (x - 1.25) + 3.0; }, -4.0, 4.0);
    CHECK(x == doctest::Approx(1.25).epsilon(1e-6));
    CHECK(fx == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("expm1_ratio matches its series near zero and the direct form away from it") {
    CHECK(num::expm1_ratio(0.0, 2.5) == 2.5);
    const double u = 1e-9, m = 3.0;
    CHECK(num::expm1_ratio(u, m) == doctest::Approx(m - u * m * m / 2.0).epsilon(1e-15));
    CHECK(num::expm1_ratio(0.7, 2.0) == doctest::Approx((1.0 - std::exp(-1.4)) / 0.7).epsilon(1e-14));
}

TEST_CASE("rng streams are reproducible and uniform in (0, 1)") {
    RngStream a(42), b(42), c = RngStream::derive(42, 1);
    double sum = 0.0;
    bool differs = false;
    for (int i = 0; i < 100000; ++i) {
        const double u = a.uniform();
        CHECK_UNARY(u > 0.0 && u < 1.0);
        CHECK(u == b.uniform());
        differs |= c.uniform() != u;
        sum += u;
    }
    CHECK(differs);
    // Mean of 1e5 uniforms: SE = 1/sqrt(12e5) ~ 9.1e-4.
    CHECK(std::abs(sum / 100000 - 0.5) < 5 * 9.2e-4);
}

TEST_CASE("batch-means estimates") {
    const std::vector<double> v = {1, 2, 3, 4, 5};
    const auto e = stats::mean_estimate(v);
    CHECK(e.value == 3.0);
    // sample sd = sqrt(2.5), SE = sqrt(2.5/5)
    CHECK(e.std_error == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    CHECK(e.dof == 4.0);
    // t_{0.975, 4} = 2.776445105
    CHECK(e.half_width(0.95) == doctest::Approx(2.776445105 * std::sqrt(0.5)).epsilon(1e-8));

    const std::vector<double> sums = {2, 4, 6}, counts = {1, 2, 3};
    const auto r = stats::ratio_estimate(sums, counts);
    CHECK(r.value == 2.0);
    CHECK(r.std_error == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("distribution helpers against tabulated values") {
    CHECK(stats::normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-9));
    CHECK(stats::t_quantile(0.995, 19) == doctest::Approx(2.860934606).epsilon(1e-8));
    // chi-square sf at 3.841458821 on 1 dof is 0.05
    CHECK(stats::chi_square_sf(3.841458821, 1) == doctest::Approx(0.05).epsilon(1e-8));
    CHECK(stats::poisson_pmf(0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
    CHECK(stats::poisson_pmf(3, 2.0) == doctest::Approx(8.0 / 6.0 * std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("chi-square goodness of fit") {
    // Exact fit: statistic 0.
    const std::vector<double> obs = {25, 50, 25}, p = {0.25, 0.5, 0.25};
    const auto r = stats::chi_square_gof(obs, p);
    CHECK(r.statistic == doctest::Approx(0.0));
    CHECK(r.dof == 2.0);
    // Hand value: (30-25)^2/25 + (45-50)^2/50 + (25-25)^2/25 = 1.5
    const std::vector<double> obs2 = {30, 45, 25};
    CHECK(stats::chi_square_gof(obs2, p).statistic == doctest::Approx(1.5));
    // Pooling: with 20 observations the two small tails merge into neighbours.
    const std::vector<double> obs3 = {1, 9, 9, 1}, p3 = {0.05, 0.45, 0.45, 0.05};
    CHECK(stats::chi_square_gof(obs3, p3).cells < 4);
}

TEST_CASE("KS distance by hand") {
    // Sample {0.5} against U(0,1): sup |F_n - F| = 0.5.
    CHECK(stats::ks_distance({0.5}, [](double x) { return x; }) == doctest::Approx(0.5));
    // {0.25, 0.75}: max over steps = 0.25.
    CHECK(stats::ks_distance({0.75, 0.25}, [](double x) { return x; }) == doctest::Approx(0.25));
}
