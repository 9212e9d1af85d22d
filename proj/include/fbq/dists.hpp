#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fbq/rng.hpp"

namespace fbq {

// Parametric families. All parameters are in job-size units (rates in 1/size).

struct Deterministic {
    double value;
};
struct Exponential {
    double rate;
};
/// 1 - F(x) = (scale / x)^shape for x >= scale.
struct Pareto {
    double scale;
    double shape;
};
/// F(x) = 1 - exp(-a x^beta).
struct Weibull {
    double a;
    double beta;
};
struct Gamma {
    double shape;
    double rate;
};
struct Uniform {
    double lo;
    double hi;
};
struct Hyperexponential {
    std::vector<double> weights;
    std::vector<double> rates;
};
/// Pareto(scale, shape) conditioned on B <= cap.
struct BoundedPareto {
    double scale;
    double shape;
    double cap;
};

using DistributionKind = std::variant<Deterministic, Exponential, Pareto, Weibull, Gamma, Uniform,
                                      Hyperexponential, BoundedPareto>;

/// Where the moment generating function E e^{sB} is finite: s < abscissa,
/// or s <= abscissa when `inclusive`.
struct MgfDomain {
    double abscissa;
    bool inclusive;
    bool contains(double s) const { return inclusive ? s <= abscissa : s < abscissa; }
};

/// Law of the job size B. Immutable after construction; every member is const
/// and safe to call concurrently.
class ServiceDistribution {
public:
    explicit ServiceDistribution(DistributionKind kind);

    static ServiceDistribution deterministic(double d) { return ServiceDistribution(Deterministic{d}); }
    static ServiceDistribution exponential(double rate) { return ServiceDistribution(Exponential{rate}); }
    static ServiceDistribution pareto(double k, double alpha) { return ServiceDistribution(Pareto{k, alpha}); }
    static ServiceDistribution weibull(double a, double beta) { return ServiceDistribution(Weibull{a, beta}); }
    static ServiceDistribution gamma(double shape, double rate) { return ServiceDistribution(Gamma{shape, rate}); }
    static ServiceDistribution uniform(double lo, double hi) { return ServiceDistribution(Uniform{lo, hi}); }
    static ServiceDistribution hyperexponential(std::vector<double> weights, std::vector<double> rates) {
        return ServiceDistribution(Hyperexponential{std::move(weights), std::move(rates)});
    }
    static ServiceDistribution bounded_pareto(double k, double alpha, double cap) {
        return ServiceDistribution(BoundedPareto{k, alpha, cap});
    }

    const DistributionKind& kind() const { return kind_; }
    std::string name() const;

    double cdf(double x) const;
    double survival(double x) const;
    bool has_density() const;
    double pdf(double x) const;      // throws NoDensityError for Deterministic
    double log_pdf(double x) const;  // same
    double hazard_rate(double x) const;

    double quantile(double p) const;
    /// x with P(B > x) = eps, accurate for tiny eps.
    double tail_quantile(double eps) const;
    /// inf{x : F(x) > 0}.
    double lower_endpoint() const;
    /// x_F = sup{x : F(x) < 1}; +inf for unbounded support.
    double right_endpoint() const;

    double mean() const;
    /// E B^2; +inf when it diverges.
    double second_moment() const;
    /// E (B ∧ x)^order for order in {1, 2}. x may be +inf.
    double truncated_moment(double x, int order) const;
    /// E[B; B > x].
    double tail_expectation(double x) const;

    MgfDomain mgf_domain() const;
    double mgf(double s) const;  // throws DivergenceError outside mgf_domain()
    double lst(double s) const { return mgf(-s); }
    /// ∫_0^x e^{-u t} P(B > t) dt; any real u, finite x.
    double survival_transform(double x, double u) const;
    /// E e^{s (B ∧ x)} = 1 + s ∫_0^x e^{st} P(B > t) dt.
    double truncated_mgf(double x, double s) const;

    /// ∫ g dF over the support. Unbounded supports are cut at the tail quantile
    /// 1e-10 unless `tail_bound` is given: it must bound ∫_x^∞ |g| dF, and the
    /// cut is then pushed out until that bound is below `abs_tail_tol`.
    double integrate_density(const std::function<double(double)>& g, double rel_tol = 1e-10,
                             const std::function<double(double)>& tail_bound = {},
                             double abs_tail_tol = 0.0) const;

    double sample(RngStream& rng) const;

    /// Points where the survival function has a kink or jump.
    std::vector<double> breakpoints() const;

private:
    DistributionKind kind_;
};

enum class HazardClassification { DFR, IFR, LogConvexDensity, LogConcaveDensity, Neither };

struct HazardClass {
    HazardClassification classification;
    /// Two grid points (x1 < x2) where the hazard rate rises; set when the
    /// law is not DFR.
    std::optional<std::pair<double, double>> witness;
    bool no_density = false;
};

/// Grid-based classification: 10^3 log-spaced points up to quantile 0.9999.
HazardClass classify(const ServiceDistribution& d);

double coefficient_of_variation(const ServiceDistribution& d);

std::string to_string(HazardClassification c);

}  // namespace fbq
