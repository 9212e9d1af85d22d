#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "fbq/analytic.hpp"
#include "fbq/errors.hpp"

using namespace fbq;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
double simpson(F f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

AnalyticModel at(const ServiceDistribution& d, double rho) { return AnalyticModel::at_load(d, rho); }

// Closed-form truncated moments of Pareto(1, a), written out here so the
// mean-queue oracle shares nothing with the library.
double pareto_m1(double a, double x) { return x <= 1 ? x : 1 + (1 - std::pow(x, 1 - a)) / (a - 1); }
double pareto_m2(double a, double x) {
    return x <= 1 ? x * x : 1 + 2 * (1 - std::pow(x, 2 - a)) / (a - 2);
}

}  // namespace

TEST_CASE("truncated load") {
    const auto e = ServiceDistribution::exponential(1.0);
    CHECK(rho_x(AnalyticModel{0.5, e, {}}, 0.0) == 0.0);
    CHECK(rho_x(AnalyticModel{0.5, e, {}}, kInf) == doctest::Approx(0.5));
    CHECK(rho_x(AnalyticModel{1.0, e, {}}, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("mean conditional sojourn") {
    const auto d = ServiceDistribution::deterministic(1.0);
    // No traffic: V(x) = x.
    CHECK(mean_cond_sojourn(AnalyticModel{0.0, ServiceDistribution::pareto(1.0, 2.5), {}}, 3.0) == doctest::Approx(3.0));
    // M/D/1 at x = d: (2 - rho) x / (2 (1 - rho)^2).
    for (double rho : {0.1, 0.5, 0.9})
        CHECK(mean_cond_sojourn(at(d, rho), 1.0) == doctest::Approx((2 - rho) / (2 * (1 - rho) * (1 - rho))).epsilon(1e-12));
    // M/M/1 at x: hand-evaluated Schrage form with m1 = 1 - e^{-x}, m2 = 2(1 - (1+x) e^{-x}).
    const double lam = 0.5, x = 2.0;
    const double m1 = 1 - std::exp(-x), m2 = 2 * (1 - (1 + x) * std::exp(-x));
    const double r = lam * m1;
    const double oracle = x / (1 - r) + lam * m2 / (2 * (1 - r) * (1 - r));
    CHECK(mean_cond_sojourn(AnalyticModel{lam, ServiceDistribution::exponential(1.0), {}}, x) ==
          doctest::Approx(oracle).epsilon(1e-12));
    // Overloaded truncation: lambda = 2, x beyond ln 2.
    try {
        mean_cond_sojourn(AnalyticModel{2.0, ServiceDistribution::exponential(1.0), {}}, 1.0);
        FAIL("expected OverloadError");
    } catch (const OverloadError& e) {
        CHECK(e.critical_size() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("mean queue length") {
    CHECK(mean_queue_length(at(ServiceDistribution::exponential(1.0), 0.5)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(mean_queue_length(at(ServiceDistribution::deterministic(1.0), 0.5)) == doctest::Approx(1.5).epsilon(1e-10));
    // Pareto(1, 2.5) at rho = 0.5 against a test-side quadrature of lambda ∫ E V(x) dF(x),
    // in log coordinates x = e^u.
    const double a = 2.5, lam = 0.5 / (a / (a - 1));
    auto ev = [&](double x) {
        const double r = lam * pareto_m1(a, x);
        return x / (1 - r) + lam * pareto_m2(a, x) / (2 * (1 - r) * (1 - r));
    };
    const double oracle = lam * simpson([&](double u) {
        const double x = std::exp(u);
        return ev(x) * a * std::pow(x, -a - 1) * x;
    }, 0.0, 60.0, 400000);
    const double eq = mean_queue_length(at(ServiceDistribution::pareto(1.0, a), 0.5));
    CHECK(eq == doctest::Approx(oracle).epsilon(1e-7));
    // Sandwich: -log(1 - rho) <= E Q <= rho (2 - rho) / (2 (1 - rho)^2).
    for (const auto& d : {ServiceDistribution::pareto(1.0, 2.5), ServiceDistribution::uniform(0.0, 2.0),
                          ServiceDistribution::weibull(1.0, 0.5), ServiceDistribution::gamma(2.0, 1.0)}) {
        for (double rho : {0.3, 0.7, 0.9}) {
            const double q = mean_queue_length(at(d, rho));
            CHECK(q >= -std::log(1 - rho) - 1e-9);
            CHECK(q <= det_bound(rho) + 1e-9);
        }
    }
}

TEST_CASE("deterministic bound and M/D/1 FIFO ratio") {
    CHECK(det_bound(0.0) == 0.0);
    CHECK(det_bound(0.5) == doctest::Approx(1.5));
    // Pollaczek-Khinchine for M/D/1: waiting room Lq = rho^2 / (2 (1 - rho)).
    for (double rho : {0.2, 0.5, 0.9}) {
        const double lq = rho * rho / (2 * (1 - rho));
        CHECK(fifo_fb_md1_ratio(rho) == doctest::Approx(lq / det_bound(rho)).epsilon(1e-13));
        CHECK((lq + rho) / det_bound(rho) == doctest::Approx(1 - rho).epsilon(1e-13));
    }
}

TEST_CASE("Borel law of the maximal queue length") {
    const double lam = 0.5;
    CHECK(borel_pmf(lam, 1) == doctest::Approx(std::exp(-lam)).epsilon(1e-15));
    // P(M = 2) = lambda e^{-2 lambda}
    CHECK(borel_pmf(lam, 2) == doctest::Approx(lam * std::exp(-2 * lam)).epsilon(1e-14));
    double s = 0;
    for (std::uint64_t n = 1; n <= 400; ++n) s += borel_pmf(lam, n);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
    // Mean of Borel(lambda) is 1 / (1 - lambda).
    double m = 0;
    for (std::uint64_t n = 1; n <= 400; ++n) m += n * borel_pmf(lam, n);
    CHECK(m == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(borel_pmf(lam, 2000) / borel_tail_asymptote(lam, 2000) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("max-queue bounds") {
    CHECK(maxq_geometric_bound(0.5, 10) == doctest::Approx(std::pow(0.5, 10)));
    const double lam = 0.7, rho = 0.7, t = 1e4, x = 2.0;
    const double a = -1 / std::log(rho), b = -(std::log(lam) + std::log(1 - rho)) / std::log(rho) + 1;
    CHECK(maxq_time_bound(lam, rho, t, x) == doctest::Approx(a * std::log(t) + b + x));
}

TEST_CASE("fixed point v and the queue-length PGF") {
    const auto m = at(ServiceDistribution::exponential(1.0), 0.5);
    CHECK(v_fixed_point(m, 1.0, 1.0) == 0.0);
    CHECK(v_fixed_point(AnalyticModel{0.0, ServiceDistribution::exponential(1.0), {}}, 1.0, 0.0) == 0.0);
    // Residual evaluated here with the closed form of ∫_0^t e^{-vx} e^{-x} dx.
    for (double z : {0.0, 0.4, 0.9}) {
        const double t = 1.0, v = v_fixed_point(m, t, z);
        const double integral = (1 - std::exp(-(1 + v) * t)) / (1 + v);
        const double res = v - 0.5 * (1 - integral - z * std::exp(-t) * std::exp(-v * t));
        CHECK(std::abs(res) < 1e-10);
    }
    // M/M/1: E z^Q = (1 - rho) / (1 - rho z).
    for (double z : {0.0, 0.2, 0.5, 0.8, 1.0})
        CHECK(queue_length_pgf(m, z) == doctest::Approx(0.5 / (1 - 0.5 * z)).epsilon(1e-8));
    // P(Q = 0) = 1 - rho for any service law.
    const auto h = at(ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 2.0 / 11.0}), 0.6);
    CHECK(queue_length_pgf(h, 0.0) == doctest::Approx(0.4).epsilon(1e-8));
    // Derivative at 1 is E Q.
    const double hstep = 1e-3;
    const double d1 = (queue_length_pgf(h, 1.0) - queue_length_pgf(h, 1.0 - hstep)) / hstep;
    CHECK(d1 == doctest::Approx(mean_queue_length(h)).epsilon(5e-3));
}

TEST_CASE("cohort intensity") {
    const auto e = ServiceDistribution::exponential(1.0);
    const AnalyticModel m{0.5, e, {}};
    CHECK(cohort_intensity(m, 0.0) == doctest::Approx(0.5));
    // lambda e^{-x} / (1 - lambda (1 - e^{-x}))
    CHECK(cohort_intensity(m, 1.0) == doctest::Approx(0.5 * std::exp(-1.0) / (1 - 0.5 * (1 - std::exp(-1.0)))));
    CHECK(cohort_intensity_integral(m) == doctest::Approx(std::log(2.0)).epsilon(1e-8));
    const auto p = at(ServiceDistribution::pareto(1.0, 2.5), 0.7);
    CHECK(cohort_intensity_integral(p) == doctest::Approx(-std::log(0.3)).epsilon(1e-8));
}

TEST_CASE("sojourn transform and moments") {
    const auto m = at(ServiceDistribution::exponential(1.0), 0.5);
    CHECK(sojourn_lst(m, 1.5, 0.0) == doctest::Approx(1.0));
    // Without traffic V(x) = x.
    const AnalyticModel idle{0.0, ServiceDistribution::exponential(1.0), {}};
    CHECK(sojourn_lst(idle, 1.5, 0.4) == doctest::Approx(std::exp(-0.6)).epsilon(1e-12));
    // -d/ds at 0 is E V(x).
    const double h = 1e-5;
    for (double x : {0.5, 2.0}) {
        const double deriv = -(sojourn_lst(m, x, h) - sojourn_lst(m, x, 0.0)) / h;
        CHECK(deriv == doctest::Approx(mean_cond_sojourn(m, x)).epsilon(1e-3));
        CHECK(cond_sojourn_moment(m, x, 1).value == doctest::Approx(mean_cond_sojourn(m, x)).epsilon(1e-6));
    }
    CHECK(cond_sojourn_moment(idle, 2.0, 2).value == doctest::Approx(4.0).epsilon(1e-6));
}

TEST_CASE("decay rate") {
    // M/M/1 with mu = 1, lambda = 1/4: gamma = (1 - sqrt(lambda))^2.
    for (double lam : {0.25, 0.5}) {
        const AnalyticModel m{lam, ServiceDistribution::exponential(1.0), {}};
        CHECK(decay_objective(m, 0.0) == doctest::Approx(0.0).epsilon(1e-14));
        const auto r = decay_rate(m);
        CHECK(r.gamma == doctest::Approx(std::pow(1 - std::sqrt(lam), 2)).epsilon(1e-9));
        CHECK(r.s_star == doctest::Approx(1 - std::sqrt(lam)).epsilon(1e-6));
    }
    const auto p = at(ServiceDistribution::pareto(1.0, 2.5), 0.5);
    CHECK_THROWS_AS(decay_rate(p), DomainError);
    const auto c = cond_decay_rate(p, 5.0);
    CHECK(std::isfinite(c.gamma));
    CHECK(c.gamma > 0.0);
    // Truncating deterministic sizes at or above d changes nothing.
    const auto d = at(ServiceDistribution::deterministic(1.0), 0.5);
    CHECK(cond_decay_rate(d, 2.0).gamma == doctest::Approx(decay_rate(d).gamma).epsilon(1e-10));
}

TEST_CASE("tail-equivalence ingredients") {
    const auto pa = ServiceDistribution::pareto(1.0, 2.5);
    CHECK(reduced_load_tail(AnalyticModel{0.0, pa, {}}, 7.0) == doctest::Approx(pa.survival(7.0)));
    CHECK(reduced_load_tail(at(pa, 0.5), 100.0) == doctest::Approx(std::pow(1.0 / 50.0, 2.5)));
    CHECK(busy_tail_factor(0.5, 2.5) == doctest::Approx(std::pow(2.0, 3.5)));
}

TEST_CASE("critical size") {
    CHECK(critical_size(at(ServiceDistribution::exponential(1.0), 0.9)) == kInf);
    CHECK(critical_size(AnalyticModel{2.0, ServiceDistribution::exponential(1.0), {}}) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(critical_size(AnalyticModel{3.0, ServiceDistribution::deterministic(1.0), {}}) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("slowdown profile") {
    const auto pa = ServiceDistribution::pareto(1.0, 2.5);
    const std::vector<double> xs = {1.0, 10.0, pa.quantile(0.9999)};
    const auto idle = slowdown_profile(AnalyticModel{0.0, pa, {}}, xs);
    for (double s : idle.slowdown) CHECK(s == doctest::Approx(1.0));
    const auto p = slowdown_profile(at(pa, 0.5), xs);
    CHECK(p.limit == doctest::Approx(2.0));
    // ES(1) = 1/(1 - 0.3) + 0.3 / (2 * 0.49): below the limit for the smallest jobs.
    CHECK(p.slowdown[0] == doctest::Approx(1 / 0.7 + 0.3 / 0.98).epsilon(1e-10));
    CHECK(p.slowdown.back() >= p.limit);
    CHECK(p.slowdown.back() == doctest::Approx(p.limit).epsilon(0.05));
    CHECK(p.mean_bound == doctest::Approx(1.5 / (2 * 0.25)));
    CHECK(p.mean_slowdown <= p.mean_bound);
}

TEST_CASE("heavy-traffic scan stays between the bounds") {
    const auto rows = heavy_traffic_scan(ServiceDistribution::uniform(0.0, 2.0), Compensator{CompensatorKind::Power, 1.5},
                                         default_heavy_traffic_grid());
    REQUIRE(rows.size() > 5);
    for (const auto& r : rows) {
        REQUIRE_FALSE(r.error);
        CHECK(r.eq >= r.lower_bound - 1e-9);
        CHECK(r.eq <= det_bound(r.rho) + 1e-9);
        CHECK(r.compensated == doctest::Approx(r.eq * std::pow(1 - r.rho, 1.5)));
    }
}
