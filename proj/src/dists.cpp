#include "fbq/dists.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "fbq/errors.hpp"
#include "fbq/numerics.hpp"

namespace fbq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// ∫_k^x t^p dt for 0 < k <= x.
double power_integral(double k, double x, double p) {
    if (x <= k) return 0.0;
    if (std::abs(p + 1.0) < 1e-14) return std::log(x / k);
    return std::pow(k, p + 1.0) * std::expm1((p + 1.0) * std::log(x / k)) / (p + 1.0);
}

// 1 - e^{-y}(1 + y), accurate for small y.
double one_minus_exp_poly(double y) {
    if (y < 0.1) {
        double term = y * y / 2.0;  // k = 2
        double sum = term;
        for (int k = 3; k < 20; ++k) {
            term *= -y / k * (k - 1.0) / (k - 2.0);
            sum += term;
        }
        return sum;
    }
    return -std::expm1(-y) - y * std::exp(-y);
}

// E (B ∧ x)^order for exponential rate mu.
double exp_truncated(double mu, double x, int order) {
    if (order == 1) return -std::expm1(-mu * x) / mu;
    return 2.0 * one_minus_exp_poly(mu * x) / (mu * mu);
}

double bp_norm(const BoundedPareto& b) { return 1.0 - std::pow(b.scale / b.cap, b.shape); }

void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

double sample_gamma(double shape, RngStream& rng) {
    if (shape < 1.0) {
        const double u = rng.uniform();
        return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
}


// Upper incomplete gamma Γ(a, y) for any real a and y > 0. Boost covers a > 0;
// below that, step down with Γ(a - 1, y) = (Γ(a, y) - y^{a-1} e^{-y}) / (a - 1).
double upper_gamma(double a, double y) {
    if (a > 0.0) return boost::math::tgamma(a, y);
    const double steps = std::ceil(-a);
    double b = a + steps;  // in [0, 1)
    double g;
    if (b == 0.0) {
        g = boost::math::expint(1, y);
    } else {
        g = boost::math::tgamma(b, y);
    }
    for (; b > a + 0.5; b -= 1.0) g = (g - std::pow(y, b - 1.0) * std::exp(-y)) / (b - 1.0);
    return g;
}

// ∫_k^x e^{-u t} (k/t)^alpha dt for u > 0, x > k.
double pareto_tail_transform(double k, double alpha, double x, double u) {
    const double a = 1.0 - alpha;
    const double upper = std::isinf(x) ? 0.0 : upper_gamma(a, u * x);
    return std::pow(k, alpha) * std::pow(u, alpha - 1.0) * (upper_gamma(a, u * k) - upper);
}

}  // namespace

ServiceDistribution::ServiceDistribution(DistributionKind kind) : kind_(std::move(kind)) {
    std::visit(overloaded{
                   [](const Deterministic& d) { require(d.value > 0.0, "deterministic: value must be > 0"); },
                   [](const Exponential& e) { require(e.rate > 0.0, "exponential: rate must be > 0"); },
                   [](const Pareto& p) {
                       require(p.scale > 0.0, "pareto: scale must be > 0");
                       require(p.shape > 1.0, "pareto: shape must be > 1 (finite mean)");
                   },
                   [](const Weibull& w) {
                       require(w.a > 0.0 && w.beta > 0.0, "weibull: a and beta must be > 0");
                   },
                   [](const Gamma& g) { require(g.shape > 0.0 && g.rate > 0.0, "gamma: shape and rate must be > 0"); },
                   [](const Uniform& u) { require(u.lo >= 0.0 && u.hi > u.lo, "uniform: need 0 <= lo < hi"); },
                   [](const Hyperexponential& h) {
                       require(!h.weights.empty() && h.weights.size() == h.rates.size(),
                               "hyperexponential: weights and rates must be non-empty and equal length");
                       double sum = 0.0;
                       for (std::size_t i = 0; i < h.weights.size(); ++i) {
                           require(h.weights[i] > 0.0 && h.rates[i] > 0.0,
                                   "hyperexponential: weights and rates must be > 0");
                           sum += h.weights[i];
                       }
                       require(std::abs(sum - 1.0) < 1e-9, "hyperexponential: weights must sum to 1");
                   },
                   [](const BoundedPareto& b) {
                       require(b.scale > 0.0 && b.shape > 0.0, "bounded_pareto: scale and shape must be > 0");
                       require(b.cap > b.scale, "bounded_pareto: cap must exceed scale");
                   },
               },
               kind_);
}

std::string ServiceDistribution::name() const {
    std::ostringstream os;
    os.precision(12);
    std::visit(overloaded{
                   [&](const Deterministic& d) { os << "deterministic(" << d.value << ")"; },
                   [&](const Exponential& e) { os << "exponential(rate=" << e.rate << ")"; },
                   [&](const Pareto& p) { os << "pareto(k=" << p.scale << ", alpha=" << p.shape << ")"; },
                   [&](const Weibull& w) { os << "weibull(a=" << w.a << ", beta=" << w.beta << ")"; },
                   [&](const Gamma& g) { os << "gamma(shape=" << g.shape << ", rate=" << g.rate << ")"; },
                   [&](const Uniform& u) { os << "uniform(" << u.lo << ", " << u.hi << ")"; },
                   [&](const Hyperexponential& h) {
                       os << "hyperexponential(";
                       for (std::size_t i = 0; i < h.rates.size(); ++i) {
                           os << (i ? "; " : "") << h.weights[i] << "@" << h.rates[i];
                       }
                       os << ")";
                   },
                   [&](const BoundedPareto& b) {
                       os << "bounded_pareto(k=" << b.scale << ", alpha=" << b.shape << ", cap=" << b.cap << ")";
                   },
               },
               kind_);
    return os.str();
}

double ServiceDistribution::survival(double x) const {
    if (x < 0.0) return 1.0;
    return std::visit(overloaded{
                          [&](const Deterministic& d) { return x < d.value ? 1.0 : 0.0; },
                          [&](const Exponential& e) { return std::exp(-e.rate * x); },
                          [&](const Pareto& p) { return x < p.scale ? 1.0 : std::pow(p.scale / x, p.shape); },
                          [&](const Weibull& w) { return std::exp(-w.a * std::pow(x, w.beta)); },
                          [&](const Gamma& g) { return boost::math::gamma_q(g.shape, g.rate * x); },
                          [&](const Uniform& u) {
                              if (x <= u.lo) return 1.0;
                              if (x >= u.hi) return 0.0;
                              return (u.hi - x) / (u.hi - u.lo);
                          },
                          [&](const Hyperexponential& h) {
                              double s = 0.0;
                              for (std::size_t i = 0; i < h.rates.size(); ++i) s += h.weights[i] * std::exp(-h.rates[i] * x);
                              return s;
                          },
                          [&](const BoundedPareto& b) {
                              if (x < b.scale) return 1.0;
                              if (x >= b.cap) return 0.0;
                              const double c = std::pow(b.scale / b.cap, b.shape);
                              return (std::pow(b.scale / x, b.shape) - c) / (1.0 - c);
                          },
                      },
                      kind_);
}

double ServiceDistribution::cdf(double x) const {
    if (x < 0.0) return 0.0;
    return std::visit(overloaded{
                          [&](const Exponential& e) { return -std::expm1(-e.rate * x); },
                          [&](const Weibull& w) { return -std::expm1(-w.a * std::pow(x, w.beta)); },
                          [&](const Gamma& g) { return boost::math::gamma_p(g.shape, g.rate * x); },
                          [&](const Hyperexponential& h) {
                              double s = 0.0;
                              for (std::size_t i = 0; i < h.rates.size(); ++i) s -= h.weights[i] * std::expm1(-h.rates[i] * x);
                              return s;
                          },
                          [&](const auto&) { return 1.0 - survival(x); },
                      },
                      kind_);
}

bool ServiceDistribution::has_density() const { return !std::holds_alternative<Deterministic>(kind_); }

double ServiceDistribution::log_pdf(double x) const {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    if (x < 0.0) return kNegInf;
    return std::visit(
        overloaded{
            [&](const Deterministic&) -> double {
                throw NoDensityError("deterministic law has no density");
            },
            [&](const Exponential& e) { return std::log(e.rate) - e.rate * x; },
            [&](const Pareto& p) {
                if (x < p.scale) return kNegInf;
                return std::log(p.shape) + p.shape * std::log(p.scale) - (p.shape + 1.0) * std::log(x);
            },
            [&](const Weibull& w) {
                if (x == 0.0) return w.beta < 1.0 ? kInf : (w.beta == 1.0 ? std::log(w.a) : kNegInf);
                return std::log(w.a * w.beta) + (w.beta - 1.0) * std::log(x) - w.a * std::pow(x, w.beta);
            },
            [&](const Gamma& g) {
                if (x == 0.0) return g.shape < 1.0 ? kInf : (g.shape == 1.0 ? std::log(g.rate) : kNegInf);
                return g.shape * std::log(g.rate) + (g.shape - 1.0) * std::log(x) - g.rate * x - std::lgamma(g.shape);
            },
            [&](const Uniform& u) { return (x >= u.lo && x <= u.hi) ? -std::log(u.hi - u.lo) : kNegInf; },
            [&](const Hyperexponential& h) {
                double mx = kNegInf;
                std::vector<double> terms(h.rates.size());
                for (std::size_t i = 0; i < h.rates.size(); ++i) {
                    terms[i] = std::log(h.weights[i] * h.rates[i]) - h.rates[i] * x;
                    mx = std::max(mx, terms[i]);
                }
                double s = 0.0;
                for (double t : terms) s += std::exp(t - mx);
                return mx + std::log(s);
            },
            [&](const BoundedPareto& b) {
                if (x < b.scale || x > b.cap) return kNegInf;
                return std::log(b.shape) + b.shape * std::log(b.scale) - (b.shape + 1.0) * std::log(x) -
                       std::log(bp_norm(b));
            },
        },
        kind_);
}

double ServiceDistribution::pdf(double x) const { return std::exp(log_pdf(x)); }

double ServiceDistribution::hazard_rate(double x) const {
    const double f = pdf(x);
    const double s = survival(x);
    if (s <= 0.0) return kInf;
    return f / s;
}

double ServiceDistribution::quantile(double p) const {
    if (p <= 0.0) return lower_endpoint();
    if (p >= 1.0) return right_endpoint();
    return std::visit(overloaded{
                          [&](const Deterministic& d) { return d.value; },
                          [&](const Exponential& e) { return -std::log1p(-p) / e.rate; },
                          [&](const Pareto& q) { return q.scale * std::pow(1.0 - p, -1.0 / q.shape); },
                          [&](const Weibull& w) { return std::pow(-std::log1p(-p) / w.a, 1.0 / w.beta); },
                          [&](const Gamma& g) { return boost::math::gamma_p_inv(g.shape, p) / g.rate; },
                          [&](const Uniform& u) { return u.lo + p * (u.hi - u.lo); },
                          [&](const Hyperexponential&) { return tail_quantile(1.0 - p); },
                          [&](const BoundedPareto& b) {
                              const double c = std::pow(b.scale / b.cap, b.shape);
                              return b.scale * std::pow(1.0 - p * (1.0 - c), -1.0 / b.shape);
                          },
                      },
                      kind_);
}

double ServiceDistribution::tail_quantile(double eps) const {
    if (eps >= 1.0) return lower_endpoint();
    if (eps <= 0.0) return right_endpoint();
    return std::visit(overloaded{
                          [&](const Deterministic& d) { return d.value; },
                          [&](const Exponential& e) { return -std::log(eps) / e.rate; },
                          [&](const Pareto& q) { return q.scale * std::pow(eps, -1.0 / q.shape); },
                          [&](const Weibull& w) { return std::pow(-std::log(eps) / w.a, 1.0 / w.beta); },
                          [&](const Gamma& g) { return boost::math::gamma_q_inv(g.shape, eps) / g.rate; },
                          [&](const Uniform& u) { return u.hi - eps * (u.hi - u.lo); },
                          [&](const Hyperexponential& h) {
                              const double mu_min = *std::min_element(h.rates.begin(), h.rates.end());
                              const double hi = -std::log(eps) / mu_min + 1.0;
                              const double log_eps = std::log(eps);
                              return num::bisect(
                                  [&](double x) { return std::log(survival(x)) - log_eps; }, 0.0, hi, 0.0, 300);
                          },
                          [&](const BoundedPareto& b) {
                              const double c = std::pow(b.scale / b.cap, b.shape);
                              return b.scale * std::pow(c + eps * (1.0 - c), -1.0 / b.shape);
                          },
                      },
                      kind_);
}

double ServiceDistribution::lower_endpoint() const {
    return std::visit(overloaded{
                          [](const Deterministic& d) { return d.value; },
                          [](const Pareto& p) { return p.scale; },
                          [](const Uniform& u) { return u.lo; },
                          [](const BoundedPareto& b) { return b.scale; },
                          [](const auto&) { return 0.0; },
                      },
                      kind_);
}

double ServiceDistribution::right_endpoint() const {
    return std::visit(overloaded{
                          [](const Deterministic& d) { return d.value; },
                          [](const Uniform& u) { return u.hi; },
                          [](const BoundedPareto& b) { return b.cap; },
                          [](const auto&) { return kInf; },
                      },
                      kind_);
}

double ServiceDistribution::mean() const {
    return std::visit(overloaded{
                          [](const Deterministic& d) { return d.value; },
                          [](const Exponential& e) { return 1.0 / e.rate; },
                          [](const Pareto& p) { return p.shape * p.scale / (p.shape - 1.0); },
                          [](const Weibull& w) {
                              return std::pow(w.a, -1.0 / w.beta) * std::tgamma(1.0 + 1.0 / w.beta);
                          },
                          [](const Gamma& g) { return g.shape / g.rate; },
                          [](const Uniform& u) { return 0.5 * (u.lo + u.hi); },
                          [](const Hyperexponential& h) {
                              double m = 0.0;
                              for (std::size_t i = 0; i < h.rates.size(); ++i) m += h.weights[i] / h.rates[i];
                              return m;
                          },
                          [](const BoundedPareto& b) {
                              return b.shape * std::pow(b.scale, b.shape) / bp_norm(b) *
                                     power_integral(b.scale, b.cap, -b.shape);
                          },
                      },
                      kind_);
}

double ServiceDistribution::second_moment() const {
    return std::visit(overloaded{
                          [](const Deterministic& d) { return d.value * d.value; },
                          [](const Exponential& e) { return 2.0 / (e.rate * e.rate); },
                          [](const Pareto& p) {
                              return p.shape > 2.0 ? p.shape * p.scale * p.scale / (p.shape - 2.0) : kInf;
                          },
                          [](const Weibull& w) {
                              return std::pow(w.a, -2.0 / w.beta) * std::tgamma(1.0 + 2.0 / w.beta);
                          },
                          [](const Gamma& g) { return g.shape * (g.shape + 1.0) / (g.rate * g.rate); },
                          [](const Uniform& u) { return (u.lo * u.lo + u.lo * u.hi + u.hi * u.hi) / 3.0; },
                          [](const Hyperexponential& h) {
                              double m = 0.0;
                              for (std::size_t i = 0; i < h.rates.size(); ++i)
                                  m += 2.0 * h.weights[i] / (h.rates[i] * h.rates[i]);
                              return m;
                          },
                          [](const BoundedPareto& b) {
                              return b.shape * std::pow(b.scale, b.shape) / bp_norm(b) *
                                     power_integral(b.scale, b.cap, 1.0 - b.shape);
                          },
                      },
                      kind_);
}

double ServiceDistribution::truncated_moment(double x, int order) const {
    if (order != 1 && order != 2) throw DomainError("truncated_moment: order must be 1 or 2");
    if (!(x > 0.0)) return 0.0;
    if (x >= right_endpoint()) {
        if (order == 1) return mean();
        const double m2 = second_moment();
        if (std::isinf(m2)) throw InfiniteMomentError("truncated_moment: E B^2 is infinite for " + name());
        return m2;
    }
    return std::visit(
        overloaded{
            [&](const Deterministic& d) {
                const double m = std::min(d.value, x);
                return order == 1 ? m : m * m;
            },
            [&](const Exponential& e) { return exp_truncated(e.rate, x, order); },
            [&](const Pareto& p) {
                if (x <= p.scale) return order == 1 ? x : x * x;
                const double k = p.scale, a = p.shape;
                if (order == 1) return k - k / (a - 1.0) * std::expm1((1.0 - a) * std::log(x / k));
                return k * k + 2.0 * std::pow(k, a) * power_integral(k, x, 1.0 - a);
            },
            [&](const Weibull& w) {
                const double j = order;
                const double z = w.a * std::pow(x, w.beta);
                return std::pow(w.a, -j / w.beta) * std::tgamma(1.0 + j / w.beta) *
                           boost::math::gamma_p(1.0 + j / w.beta, z) +
                       std::pow(x, j) * std::exp(-z);
            },
            [&](const Gamma& g) {
                const double j = order;
                const double coeff = std::exp(std::lgamma(g.shape + j) - std::lgamma(g.shape)) / std::pow(g.rate, j);
                return coeff * boost::math::gamma_p(g.shape + j, g.rate * x) +
                       std::pow(x, j) * boost::math::gamma_q(g.shape, g.rate * x);
            },
            [&](const Uniform& u) {
                if (x <= u.lo) return order == 1 ? x : x * x;
                const double w = u.hi - u.lo;
                if (order == 1) return u.lo + (x - u.lo) * (2.0 * u.hi - u.lo - x) / (2.0 * w);
                return u.lo * u.lo +
                       2.0 / w * (u.hi * (x * x - u.lo * u.lo) / 2.0 - (x * x * x - u.lo * u.lo * u.lo) / 3.0);
            },
            [&](const Hyperexponential& h) {
                double m = 0.0;
                for (std::size_t i = 0; i < h.rates.size(); ++i) m += h.weights[i] * exp_truncated(h.rates[i], x, order);
                return m;
            },
            [&](const BoundedPareto& b) {
                if (x <= b.scale) return order == 1 ? x : x * x;
                const double k = b.scale, a = b.shape;
                const double c = std::pow(k / b.cap, a);
                const double ka = std::pow(k, a);
                if (order == 1) return k + (ka * power_integral(k, x, -a) - c * (x - k)) / (1.0 - c);
                return k * k + 2.0 * (ka * power_integral(k, x, 1.0 - a) - c * (x * x - k * k) / 2.0) / (1.0 - c);
            },
        },
        kind_);
}

double ServiceDistribution::tail_expectation(double x) const {
    if (x < lower_endpoint()) return mean();
    if (x >= right_endpoint()) return 0.0;
    return std::visit(
        overloaded{
            [&](const Deterministic& d) { return x < d.value ? d.value : 0.0; },
            [&](const Exponential& e) { return (x + 1.0 / e.rate) * std::exp(-e.rate * x); },
            [&](const Pareto& p) {
                return p.shape * std::pow(p.scale, p.shape) * std::pow(x, 1.0 - p.shape) / (p.shape - 1.0);
            },
            [&](const Weibull& w) {
                return std::pow(w.a, -1.0 / w.beta) * std::tgamma(1.0 + 1.0 / w.beta) *
                       boost::math::gamma_q(1.0 + 1.0 / w.beta, w.a * std::pow(x, w.beta));
            },
            [&](const Gamma& g) {
                return g.shape / g.rate * boost::math::gamma_q(g.shape + 1.0, g.rate * x);
            },
            [&](const Uniform& u) { return (u.hi * u.hi - x * x) / (2.0 * (u.hi - u.lo)); },
            [&](const Hyperexponential& h) {
                double m = 0.0;
                for (std::size_t i = 0; i < h.rates.size(); ++i)
                    m += h.weights[i] * (x + 1.0 / h.rates[i]) * std::exp(-h.rates[i] * x);
                return m;
            },
            [&](const BoundedPareto& b) {
                return b.shape * std::pow(b.scale, b.shape) / bp_norm(b) * power_integral(x, b.cap, -b.shape);
            },
        },
        kind_);
}

MgfDomain ServiceDistribution::mgf_domain() const {
    return std::visit(overloaded{
                          [](const Exponential& e) { return MgfDomain{e.rate, false}; },
                          [](const Pareto&) { return MgfDomain{0.0, true}; },
                          [](const Weibull& w) {
                              if (w.beta < 1.0) return MgfDomain{0.0, true};
                              if (w.beta == 1.0) return MgfDomain{w.a, false};
                              return MgfDomain{kInf, true};
                          },
                          [](const Gamma& g) { return MgfDomain{g.rate, false}; },
                          [](const Hyperexponential& h) {
                              return MgfDomain{*std::min_element(h.rates.begin(), h.rates.end()), false};
                          },
                          [](const auto&) { return MgfDomain{kInf, true}; },
                      },
                      kind_);
}

double ServiceDistribution::mgf(double s) const {
    if (s == 0.0) return 1.0;
    const MgfDomain dom = mgf_domain();
    if (!dom.contains(s)) {
        std::ostringstream os;
        os << "mgf of " << name() << " diverges at s=" << s << " (abscissa " << dom.abscissa
           << (dom.inclusive ? ", inclusive)" : ", exclusive)");
        throw DivergenceError(os.str(), dom.abscissa);
    }
    auto numeric = [&]() {
        double hi = right_endpoint();
        if (std::isinf(hi)) {
            hi = tail_quantile(1e-16);
            if (s < 0.0) {
                hi = std::min(hi, lower_endpoint() + 60.0 / -s);
            } else {
                for (int i = 0; i < 200 && std::exp(s * hi) * survival(hi) > 1e-18; ++i) hi *= 1.5;
            }
        }
        return 1.0 + s * survival_transform(hi, -s);
    };
    return std::visit(overloaded{
                          [&](const Deterministic& d) { return std::exp(s * d.value); },
                          [&](const Exponential& e) { return e.rate / (e.rate - s); },
                          [&](const Gamma& g) { return std::pow(g.rate / (g.rate - s), g.shape); },
                          [&](const Uniform& u) {
                              const double w = u.hi - u.lo;
                              return std::exp(s * u.lo) * std::expm1(s * w) / (s * w);
                          },
                          [&](const Hyperexponential& h) {
                              double m = 0.0;
                              for (std::size_t i = 0; i < h.rates.size(); ++i)
                                  m += h.weights[i] * h.rates[i] / (h.rates[i] - s);
                              return m;
                          },
                          [&](const Weibull& w) { return w.beta == 1.0 ? w.a / (w.a - s) : numeric(); },
                          [&](const auto&) { return numeric(); },
                      },
                      kind_);
}

double ServiceDistribution::survival_transform(double x, double u) const {
    if (!(x > 0.0)) return 0.0;
    x = std::min(x, right_endpoint());
    if (std::isinf(x)) throw DomainError("survival_transform: x must be finite");
    const num::QuadOptions opt{1e-13, 1e-14, 48, 16};
    auto tail_piece = [&](double from, double to, auto&& surv) {
        if (!(to > from)) return 0.0;
        return num::integrate([&](double t) { return std::exp(-u * t) * surv(t); }, from, to, opt);
    };
    return std::visit(
        overloaded{
            [&](const Deterministic& d) { return num::expm1_ratio(u, std::min(x, d.value)); },
            [&](const Exponential& e) { return num::expm1_ratio(u + e.rate, x); },
            [&](const Hyperexponential& h) {
                double m = 0.0;
                for (std::size_t i = 0; i < h.rates.size(); ++i) m += h.weights[i] * num::expm1_ratio(u + h.rates[i], x);
                return m;
            },
            [&](const Pareto& p) {
                const double head = num::expm1_ratio(u, std::min(x, p.scale));
                if (!(x > p.scale)) return head;
                if (u > 0.0) return head + pareto_tail_transform(p.scale, p.shape, x, u);
                return head + tail_piece(p.scale, x, [&](double t) { return std::pow(p.scale / t, p.shape); });
            },
            [&](const Uniform& un) {
                return num::expm1_ratio(u, std::min(x, un.lo)) +
                       tail_piece(un.lo, x, [&](double t) { return (un.hi - t) / (un.hi - un.lo); });
            },
            [&](const BoundedPareto& b) {
                const double head = num::expm1_ratio(u, std::min(x, b.scale));
                if (!(x > b.scale)) return head;
                if (u > 0.0) {
                    // S(t) = ((k/t)^alpha - c) / (1 - c) with c = (k/cap)^alpha.
                    const double c = std::pow(b.scale / b.cap, b.shape);
                    const double flat = std::exp(-u * b.scale) * num::expm1_ratio(u, x - b.scale);
                    return head + (pareto_tail_transform(b.scale, b.shape, x, u) - c * flat) / (1.0 - c);
                }
                return head + tail_piece(b.scale, x, [&](double t) { return survival(t); });
            },
            [&](const auto&) { return tail_piece(0.0, x, [&](double t) { return survival(t); }); },
        },
        kind_);
}

double ServiceDistribution::truncated_mgf(double x, double s) const {
    if (s == 0.0) return 1.0;
    if (std::isinf(x) || x >= right_endpoint()) return mgf(s);
    return 1.0 + s * survival_transform(x, -s);
}

double ServiceDistribution::integrate_density(const std::function<double(double)>& g, double rel_tol,
                                              const std::function<double(double)>& tail_bound,
                                              double abs_tail_tol) const {
    if (const auto* d = std::get_if<Deterministic>(&kind_)) return g(d->value);
    double a = lower_endpoint();
    if (a <= 0.0) a = quantile(1e-15);
    double b = right_endpoint();
    if (std::isinf(b)) {
        if (tail_bound) {
            double eps = 1e-10;
            b = tail_quantile(eps);
            while (tail_bound(b) > abs_tail_tol && eps > 1e-290) {
                eps *= 1e-4;
                b = tail_quantile(eps);
            }
        } else {
            b = tail_quantile(1e-10);
        }
    }
    const num::QuadOptions opt{rel_tol, 1e-14, 48, 64};
    return num::integrate(
        [&](double u) {
            const double x = std::exp(u);
            const double lf = log_pdf(x);
            if (!std::isfinite(lf)) return 0.0;
            return g(x) * std::exp(lf + u);
        },
        std::log(a), std::log(b), opt);
}

double ServiceDistribution::sample(RngStream& rng) const {
    return std::visit(overloaded{
                          [&](const Deterministic& d) { return d.value; },
                          [&](const Exponential& e) { return rng.exponential(e.rate); },
                          [&](const Pareto& p) { return p.scale * std::pow(rng.uniform(), -1.0 / p.shape); },
                          [&](const Weibull& w) { return std::pow(-std::log(rng.uniform()) / w.a, 1.0 / w.beta); },
                          [&](const Gamma& g) { return sample_gamma(g.shape, rng) / g.rate; },
                          [&](const Uniform& u) { return u.lo + (u.hi - u.lo) * rng.uniform(); },
                          [&](const Hyperexponential& h) {
                              const double u = rng.uniform();
                              double acc = 0.0;
                              std::size_t i = 0;
                              for (; i + 1 < h.weights.size(); ++i) {
                                  acc += h.weights[i];
                                  if (u < acc) break;
                              }
                              return rng.exponential(h.rates[i]);
                          },
                          [&](const BoundedPareto& b) {
                              const double c = std::pow(b.scale / b.cap, b.shape);
                              return b.scale * std::pow(c + rng.uniform() * (1.0 - c), -1.0 / b.shape);
                          },
                      },
                      kind_);
}

std::vector<double> ServiceDistribution::breakpoints() const {
    return std::visit(overloaded{
                          [](const Deterministic& d) { return std::vector<double>{d.value}; },
                          [](const Pareto& p) { return std::vector<double>{p.scale}; },
                          [](const Uniform& u) { return std::vector<double>{u.lo, u.hi}; },
                          [](const BoundedPareto& b) { return std::vector<double>{b.scale, b.cap}; },
                          [](const auto&) { return std::vector<double>{}; },
                      },
                      kind_);
}

HazardClass classify(const ServiceDistribution& d) {
    if (!d.has_density()) return HazardClass{HazardClassification::Neither, std::nullopt, true};

    constexpr int kPoints = 1000;
    double lo = d.lower_endpoint();
    if (lo <= 0.0) lo = d.quantile(1e-6);
    const double hi = d.quantile(0.9999);
    std::vector<double> xs(kPoints), haz(kPoints), lf(kPoints);
    const double ratio = std::log(hi / lo) / (kPoints - 1);
    for (int i = 0; i < kPoints; ++i) {
        xs[i] = (i == kPoints - 1) ? hi : lo * std::exp(ratio * i);
        haz[i] = d.hazard_rate(xs[i]);
        lf[i] = d.log_pdf(xs[i]);
    }

    constexpr double kRel = 1e-9;
    bool decreasing = true, increasing = true;
    std::optional<std::pair<double, double>> rise;
    for (int i = 0; i + 1 < kPoints; ++i) {
        const double tol = kRel * std::max(std::abs(haz[i]), std::abs(haz[i + 1]));
        if (haz[i + 1] > haz[i] + tol) {
            decreasing = false;
            if (!rise) rise = std::make_pair(xs[i], xs[i + 1]);
        }
        if (haz[i + 1] < haz[i] - tol) increasing = false;
    }

    constexpr double kSlopeRel = 1e-6;
    bool convex = true, concave = true, strictly_concave = false;
    for (int i = 0; i + 2 < kPoints; ++i) {
        const double s0 = (lf[i + 1] - lf[i]) / (xs[i + 1] - xs[i]);
        const double s1 = (lf[i + 2] - lf[i + 1]) / (xs[i + 2] - xs[i + 1]);
        const double tol = kSlopeRel * std::max({std::abs(s0), std::abs(s1), 1e-12});
        if (s1 < s0 - tol) {
            convex = false;
            strictly_concave = true;
        }
        if (s1 > s0 + tol) concave = false;
    }

    HazardClass out{HazardClassification::Neither, std::nullopt, false};
    if (decreasing) {
        out.classification = convex ? HazardClassification::LogConvexDensity : HazardClassification::DFR;
    } else if (increasing) {
        out.classification = (concave && strictly_concave) ? HazardClassification::LogConcaveDensity
                                                           : HazardClassification::IFR;
    }
    if (!decreasing) out.witness = rise;
    return out;
}

double coefficient_of_variation(const ServiceDistribution& d) {
    const double m1 = d.mean();
    const double m2 = d.second_moment();
    if (std::isinf(m2)) throw InfiniteMomentError("coefficient_of_variation: E B^2 is infinite for " + d.name());
    return std::sqrt(std::max(0.0, m2 - m1 * m1)) / m1;
}

std::string to_string(HazardClassification c) {
    switch (c) {
        case HazardClassification::DFR: return "DFR";
        case HazardClassification::IFR: return "IFR";
        case HazardClassification::LogConvexDensity: return "LogConvexDensity";
        case HazardClassification::LogConcaveDensity: return "LogConcaveDensity";
        case HazardClassification::Neither: return "Neither";
    }
    return "Neither";
}

}  // namespace fbq
