#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fbq/dists.hpp"
#include "fbq/errors.hpp"
#include "fbq/rng.hpp"

using namespace fbq;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Test-side composite Simpson; deliberately independent of the library quadrature.
template <class F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

// Split at 1, where the test families have their jumps and kinks.
template <class F>
double simpson_split(F f, double a, double b, int n = 20000) {
    if (a < 1.0 && b > 1.0) return simpson(f, a, 1.0, n) + simpson(f, 1.0, b, n);
    return simpson(f, a, b, n);
}

std::vector<ServiceDistribution> families() {
    return {ServiceDistribution::deterministic(1.0),
            ServiceDistribution::exponential(1.0),
            ServiceDistribution::pareto(1.0, 2.5),
            ServiceDistribution::weibull(1.0, 0.5),
            ServiceDistribution::gamma(2.0, 1.0),
            ServiceDistribution::uniform(0.0, 2.0),
            ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 2.0 / 11.0}),
            ServiceDistribution::bounded_pareto(1.0, 1.5, 100.0)};
}

}  // namespace

TEST_CASE("cdf spot values") {
    CHECK(ServiceDistribution::deterministic(1.0).cdf(0.5) == 0.0);
    CHECK(ServiceDistribution::deterministic(1.0).cdf(1.0) == 1.0);
    CHECK(ServiceDistribution::pareto(1.0, 2.0).cdf(1.0) == 0.0);
    CHECK(ServiceDistribution::pareto(1.0, 2.0).survival(4.0) == doctest::Approx(1.0 / 16.0).epsilon(1e-15));
    CHECK(ServiceDistribution::exponential(1.0).cdf(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ServiceDistribution::weibull(1.0, 0.5).survival(4.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
    CHECK(ServiceDistribution::uniform(0.0, 2.0).cdf(0.5) == doctest::Approx(0.25));
}

TEST_CASE("invalid parameters are rejected") {
    CHECK_THROWS_AS(ServiceDistribution::pareto(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(ServiceDistribution::exponential(0.0), DomainError);
    CHECK_THROWS_AS(ServiceDistribution::deterministic(-1.0), DomainError);
    CHECK_THROWS_AS(ServiceDistribution::uniform(2.0, 1.0), DomainError);
    CHECK_THROWS_AS(ServiceDistribution::hyperexponential({0.5, 0.4}, {1.0, 2.0}), DomainError);
}

TEST_CASE("truncated moments") {
    for (const auto& d : families()) {
        CAPTURE(d.name());
        CHECK(d.truncated_moment(0.0, 1) == 0.0);
        CHECK(d.truncated_moment(kInf, 1) == doctest::Approx(d.mean()).epsilon(1e-10));
        for (double x : {0.3, 1.0, 2.5, 7.0}) {
            const double m1 = d.truncated_moment(x, 1), m2 = d.truncated_moment(x, 2);
            CHECK(m2 <= x * m1 * (1 + 1e-12));
            CHECK(x * m1 <= x * x * (1 + 1e-12));
            if (!d.has_density()) {
                CHECK(m1 == std::min(1.0, x));
                continue;
            }
            // Oracle: E(B ∧ x) = ∫_0^x S, E(B ∧ x)^2 = ∫_0^x 2t S(t) dt.
            CHECK(m1 == doctest::Approx(simpson_split([&](double t) { return d.survival(t); }, 0.0, x)).epsilon(1e-6));
            CHECK(m2 == doctest::Approx(simpson_split([&](double t) { return 2 * t * d.survival(t); }, 0.0, x)).epsilon(1e-6));
        }
    }
    CHECK(ServiceDistribution::deterministic(1.0).truncated_moment(2.0, 2) == 1.0);
    CHECK(ServiceDistribution::exponential(1.0).truncated_moment(1.0, 1) ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("densities integrate to one and match the cdf") {
    for (const auto& d : families()) {
        CAPTURE(d.name());
        if (!d.has_density()) {
            CHECK_THROWS_AS(d.pdf(1.0), NoDensityError);
            continue;
        }
        CHECK(d.integrate_density([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-8));
        // Finite difference of the cdf at an interior point.
        const double x = d.quantile(0.6), h = 1e-5 * x;
        CHECK(d.pdf(x) == doctest::Approx((d.cdf(x + h) - d.cdf(x - h)) / (2 * h)).epsilon(1e-5));
        CHECK(d.hazard_rate(x) == doctest::Approx(d.pdf(x) / d.survival(x)).epsilon(1e-12));
        CHECK(d.quantile(d.cdf(x)) == doctest::Approx(x).epsilon(1e-9));
    }
    CHECK(ServiceDistribution::exponential(3.0).hazard_rate(5.0) == doctest::Approx(3.0));
}

TEST_CASE("moments and coefficient of variation") {
    CHECK(coefficient_of_variation(ServiceDistribution::deterministic(2.0)) == 0.0);
    CHECK(coefficient_of_variation(ServiceDistribution::exponential(4.0)) == doctest::Approx(1.0));
    // Gamma(2,1): mean 2, E B^2 = 6, var 2.
    CHECK(coefficient_of_variation(ServiceDistribution::gamma(2.0, 1.0)) == doctest::Approx(std::sqrt(2.0) / 2.0));
    // Pareto(1, 2.5): E B^2 = 2.5 / 0.5 = 5.
    CHECK(ServiceDistribution::pareto(1.0, 2.5).second_moment() == doctest::Approx(5.0));
    CHECK(ServiceDistribution::pareto(1.0, 1.5).second_moment() == kInf);
    CHECK_THROWS_AS(coefficient_of_variation(ServiceDistribution::pareto(1.0, 1.5)), InfiniteMomentError);
    const auto h = ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 2.0 / 11.0});
    CHECK(h.mean() == doctest::Approx(0.45 + 0.55));
}

TEST_CASE("moment generating function") {
    for (const auto& d : families()) {
        CAPTURE(d.name());
        CHECK(d.mgf(0.0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(d.lst(0.5) == doctest::Approx(d.mgf(-0.5)));
        // LST oracle: 1 - s ∫ e^{-st} S(t) dt, with t = u^2 to tame the cusp at 0.
        const double s = 0.7, top = std::min(d.right_endpoint(), 60.0 / s);
        const double oracle =
            1.0 - s * simpson_split([&](double u) { return 2 * u * std::exp(-s * u * u) * d.survival(u * u); }, 0.0,
                                    std::sqrt(top), 200000);
        CHECK(d.lst(s) == doctest::Approx(oracle).epsilon(1e-6));
    }
    CHECK(ServiceDistribution::exponential(2.0).mgf(1.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(ServiceDistribution::pareto(1.0, 2.5).mgf(0.1), DivergenceError);
    CHECK_THROWS_AS(ServiceDistribution::exponential(2.0).mgf(2.0), DivergenceError);
    CHECK(ServiceDistribution::deterministic(1.0).mgf(1.0) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("sampling") {
    RngStream rng(7);
    CHECK(ServiceDistribution::deterministic(1.0).sample(rng) == 1.0);

    RngStream a(99), b(99);
    const auto e = ServiceDistribution::exponential(1.0);
    for (int i = 0; i < 100; ++i) CHECK(e.sample(a) == e.sample(b));

    // Sample mean within 5 standard errors for every family.
    for (const auto& d : families()) {
        CAPTURE(d.name());
        RngStream r(12345);
        const int n = 400000;
        double s = 0, s2 = 0;
        int outside = 0;
        for (int i = 0; i < n; ++i) {
            const double x = d.sample(r);
            outside += x < d.lower_endpoint() || x > d.right_endpoint();
            s += x;
            s2 += x * x;
        }
        CHECK(outside == 0);
        const double mean = s / n, sd = std::sqrt(std::max(s2 / n - mean * mean, 0.0));
        CHECK(std::abs(mean - d.mean()) <= 5 * sd / std::sqrt(n) + 1e-12);
    }
}

TEST_CASE("empirical cdf within the DKW band") {
    const int n = 100000;
    // P(sup |F_n - F| > eps) <= 2 exp(-2 n eps^2) = 1e-3
    const double eps = std::sqrt(std::log(2.0 / 1e-3) / (2.0 * n));
    for (const auto& d : families()) {
        if (!d.has_density()) continue;
        CAPTURE(d.name());
        RngStream r(2024);
        std::vector<double> xs(n);
        for (auto& x : xs) x = d.sample(r);
        std::sort(xs.begin(), xs.end());
        double dmax = 0.0;
        for (int i = 0; i < n; ++i) {
            const double f = d.cdf(xs[i]);
            dmax = std::max({dmax, std::abs(f - double(i) / n), std::abs(f - double(i + 1) / n)});
        }
        CHECK(dmax < eps);
    }
}

TEST_CASE("hazard classification") {
    CHECK(classify(ServiceDistribution::exponential(1.0)).classification != HazardClassification::Neither);
    CHECK(classify(ServiceDistribution::uniform(0.0, 1.0)).classification == HazardClassification::IFR);
    // Log-concave density is the stronger class and implies IFR.
    const auto gc = classify(ServiceDistribution::gamma(2.0, 1.0)).classification;
    CHECK_UNARY(gc == HazardClassification::IFR || gc == HazardClassification::LogConcaveDensity);
    const auto w = classify(ServiceDistribution::weibull(1.0, 0.5)).classification;
    CHECK_UNARY(w == HazardClassification::DFR || w == HazardClassification::LogConvexDensity);
    const auto h = classify(ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 0.2})).classification;
    CHECK_UNARY(h == HazardClassification::DFR || h == HazardClassification::LogConvexDensity);
    CHECK(classify(ServiceDistribution::pareto(1.0, 2.0)).classification == HazardClassification::LogConvexDensity);
    const auto det = classify(ServiceDistribution::deterministic(1.0));
    CHECK(det.classification == HazardClassification::Neither);
    CHECK(det.no_density);
    // A non-DFR law carries a witness where the hazard rises.
    const auto g = classify(ServiceDistribution::gamma(2.0, 1.0));
    REQUIRE(g.witness.has_value());
    const auto [x1, x2] = *g.witness;
    CHECK(x1 < x2);
    const auto gd = ServiceDistribution::gamma(2.0, 1.0);
    CHECK(gd.hazard_rate(x1) < gd.hazard_rate(x2));

    // Log-convex density must also have a decreasing hazard (test-side grid).
    const auto hx = ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 0.2});
    double prev = kInf;
    for (double x = 0.01; x < 50; x *= 1.1) {
        const double r = hx.hazard_rate(x);
        CHECK(r <= prev + 1e-12);
        prev = r;
    }
}

TEST_CASE("names are stable") {
    CHECK(ServiceDistribution::exponential(1.0).name() == "exponential(rate=1)");
    CHECK(ServiceDistribution::pareto(1.0, 2.5).name() == "pareto(k=1, alpha=2.5)");
    CHECK(ServiceDistribution::deterministic(1.0).name() == "deterministic(1)");
}
