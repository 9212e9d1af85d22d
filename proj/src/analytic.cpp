#include "fbq/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fbq/engine.hpp"
#include "fbq/errors.hpp"
#include "fbq/numerics.hpp"

namespace fbq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_stable(const AnalyticModel& m, const char* what) {
    if (m.rho() >= 1.0) {
        std::ostringstream os;
        os << what << ": rho = " << m.rho() << " >= 1";
        throw OverloadError(os.str(), critical_size(m));
    }
}

/// ∫_0^X f(x) dx, split at the law's breakpoints; long stretches are
/// integrated in log x.
double integrate_size(const num::Fn& f, const ServiceDistribution& d, double X, double rel_tol) {
    std::vector<double> pts{0.0};
    for (double b : d.breakpoints())
        if (b > 0.0 && b < X) pts.push_back(b);
    pts.push_back(X);
    std::sort(pts.begin(), pts.end());
    const double scale = std::min(X, d.mean());
    const num::QuadOptions opt{rel_tol, 1e-15, 50, 32};
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double a = pts[i];
        const double b = pts[i + 1];
        if (!(b > a)) continue;
        if (a == 0.0) {
            const double c = std::min(b, scale);
            total += num::integrate(f, 0.0, c, opt);
            a = c;
        }
        if (b > a) {
            if (b / a > 8.0) {
                total += num::integrate([&](double u) {
                    const double x = std::exp(u);
                    return f(x) * x;
                }, std::log(a), std::log(b), opt);
            } else {
                total += num::integrate(f, a, b, opt);
            }
        }
    }
    return total;
}

/// E e^{-u (B ∧ x)} = 1 - u I(x, u).
double truncated_lst(const ServiceDistribution& d, double x, double u) {
    return 1.0 - u * d.survival_transform(x, u);
}

double ln_factorial(double n) { return std::lgamma(n + 1.0); }

/// Weights for the k-th derivative at 0 from samples at nodes (Fornberg).
std::vector<double> fd_weights(int k, const std::vector<double>& nodes) {
    const int n = static_cast<int>(nodes.size()) - 1;
    std::vector<std::vector<double>> c(n + 1, std::vector<double>(k + 1, 0.0));
    double c1 = 1.0;
    double c4 = nodes[0];
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        const int mn = std::min(i, k);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i];
        for (int j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int s = mn; s >= 1; --s) c[i][s] = c1 * (s * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int s = mn; s >= 1; --s) c[j][s] = (c4 * c[j][s] - s * c[j][s - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n + 1);
    for (int i = 0; i <= n; ++i) w[i] = c[i][k];
    return w;
}

/// Phi_A^{-1}(y) for y in (0, 1]: the theta <= 0 with E e^{theta A} = y.
double interarrival_inverse(const AnalyticModel& m, double y) {
    if (y == 1.0) return 0.0;
    if (!m.interarrival) return m.lambda * (1.0 - 1.0 / y);
    const auto& a = *m.interarrival;
    double lo = -1.0 / a.mean();
    for (int i = 0; i < 2000 && a.mgf(lo) > y; ++i) lo *= 2.0;
    return num::bisect([&](double th) { return a.mgf(th) - y; }, lo, 0.0);
}

DecayRateResult decay_core(const AnalyticModel& m, const std::function<double(double)>& phi_b, MgfDomain dom) {
    if (!(dom.abscissa > 0.0))
        throw DomainError("decay rate needs a service law with an exponential moment (E e^{kB} < inf for some k > 0)");
    auto objective = [&](double s) -> double {
        if (s == 0.0) return 0.0;
        const double pb = phi_b(s);
        if (!std::isfinite(pb)) return -kInf;
        return s + interarrival_inverse(m, 1.0 / pb);
    };
    double s_hi;
    bool closed_end = false;
    if (std::isfinite(dom.abscissa)) {
        s_hi = dom.abscissa;
        closed_end = dom.inclusive;
    } else {
        s_hi = std::max(1.0, m.lambda);
        int guard = 0;
        while (objective(s_hi) > 0.0 && guard++ < 200) s_hi *= 2.0;
        if (guard >= 200) throw NumericError("decay-rate objective is unbounded: gamma diverges");
        closed_end = true;
    }
    constexpr int kGrid = 64;
    DecayRateResult res{};
    std::vector<double> ss, vs;
    for (int i = 0; i <= kGrid; ++i) {
        double s = s_hi * static_cast<double>(i) / kGrid;
        if (i == kGrid && !closed_end) s = std::nextafter(s_hi, 0.0);
        const double v = objective(s);
        if (v == kInf || std::isnan(v)) throw NumericError("decay-rate objective is unbounded: gamma diverges");
        ss.push_back(s);
        vs.push_back(v);
        res.curve.emplace_back(s, v);
    }
    int local_max = 0;
    for (int i = 1; i < kGrid; ++i)
        if (vs[i] > vs[i - 1] && vs[i] >= vs[i + 1]) ++local_max;
    const auto best = static_cast<std::size_t>(std::max_element(vs.begin(), vs.end()) - vs.begin());
    double lo = ss[best == 0 ? 0 : best - 1];
    double hi = ss[std::min<std::size_t>(best + 1, kGrid)];
    if (local_max > 1) {
        // Dense rescan, then refine around the best dense point.
        res.multimodal = true;
        constexpr int kDense = 4096;
        double bs = 0.0, bv = 0.0;
        for (int i = 0; i <= kDense; ++i) {
            double s = s_hi * static_cast<double>(i) / kDense;
            if (i == kDense && !closed_end) s = std::nextafter(s_hi, 0.0);
            const double v = objective(s);
            if (v > bv) {
                bv = v;
                bs = s;
            }
        }
        lo = std::max(0.0, bs - s_hi / kDense);
        hi = std::min(ss.back(), bs + s_hi / kDense);
    }
    const auto [s_star, g] = num::golden_max(objective, lo, hi, 1e-13 * std::max(1.0, hi));
    if (g >= vs[best]) {
        res.s_star = s_star;
        res.gamma = g;
    } else {
        res.s_star = ss[best];
        res.gamma = vs[best];
    }
    if (res.gamma < 0.0) {
        res.gamma = 0.0;
        res.s_star = 0.0;
    }
    return res;
}

}  // namespace

AnalyticModel AnalyticModel::at_load(const ServiceDistribution& service, double rho) {
    return AnalyticModel{rho / service.mean(), service, std::nullopt};
}

AnalyticModel AnalyticModel::from(const QueueModel& q) {
    return AnalyticModel{q.arrival_rate, q.service, q.interarrival};
}

double rho_x(const AnalyticModel& m, double x) {
    if (!(x >= 0.0)) throw DomainError("rho_x: x must be >= 0");
    if (m.lambda == 0.0) return 0.0;
    return m.lambda * m.service.truncated_moment(x, 1);
}

double mean_cond_sojourn(const AnalyticModel& m, double x) {
    if (!(x >= 0.0)) throw DomainError("mean_cond_sojourn: x must be >= 0");
    if (m.lambda == 0.0) return x;
    const double r = rho_x(m, x);
    if (r >= 1.0) {
        std::ostringstream os;
        os << "rho(x) = " << r << " >= 1 at x = " << x << "; jobs of this size never complete";
        throw OverloadError(os.str(), critical_size(m));
    }
    const double m2 = m.service.truncated_moment(x, 2);
    const double g = 1.0 - r;
    return m.lambda * m2 / (2.0 * g * g) + x / g;
}

double mean_queue_length(const AnalyticModel& m) {
    if (m.interarrival) throw DomainError("mean_queue_length needs Poisson arrivals");
    if (m.lambda == 0.0) return 0.0;
    require_stable(m, "mean_queue_length");
    const double rho = m.rho();
    const auto ev = [&](double x) { return mean_cond_sojourn(m, x); };
    const double c = m.lambda * (2.0 - rho) / (2.0 * (1.0 - rho) * (1.0 - rho));
    const auto tail = [&](double X) { return c * m.service.tail_expectation(X); };
    const double floor = 1e-11 * -std::log1p(-rho);
    return m.lambda * m.service.integrate_density(ev, 1e-10, tail, floor / m.lambda);
}

double det_bound(double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("det_bound: need 0 <= rho < 1");
    return rho * (2.0 - rho) / (2.0 * (1.0 - rho) * (1.0 - rho));
}

double fifo_fb_md1_ratio(double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("fifo_fb_md1_ratio: need 0 <= rho < 1");
    return rho * (1.0 - rho) / (2.0 - rho);
}

double borel_pmf(double lambda, std::uint64_t n) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("borel_pmf: need 0 < lambda < 1");
    if (n == 0) return 0.0;
    const double nd = static_cast<double>(n);
    return std::exp((nd - 1.0) * std::log(lambda) - lambda * nd + (nd - 1.0) * std::log(nd) - ln_factorial(nd));
}

double borel_tail_asymptote(double lambda, std::uint64_t n) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("borel_tail_asymptote: need 0 < lambda < 1");
    const double nd = static_cast<double>(n);
    return std::exp(nd * (std::log(lambda) + 1.0 - lambda)) / (nd * std::sqrt(nd) * lambda * std::sqrt(2.0 * M_PI));
}

double maxq_geometric_bound(double rho, double n) {
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("maxq_geometric_bound: need 0 < rho < 1");
    return std::pow(rho, n);
}

double maxq_time_bound(double lambda, double rho, double t, double x) {
    if (!(rho > 0.0 && rho < 1.0) || !(lambda > 0.0)) throw DomainError("maxq_time_bound: need lambda > 0, 0 < rho < 1");
    const double lr = std::log(rho);
    const double a = -1.0 / lr;
    const double b = -(std::log(lambda) + std::log1p(-rho)) / lr + 1.0;
    return a * std::log(t) + b + x;
}

double v_fixed_point(const AnalyticModel& m, double t, double z) {
    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("v_fixed_point: need 0 <= z <= 1");
    if (!(t >= 0.0)) throw DomainError("v_fixed_point: need t >= 0");
    if (m.lambda == 0.0 || z == 1.0) return 0.0;
    require_stable(m, "v_fixed_point");
    const double lam = m.lambda;
    const double st = m.service.survival(t);
    const auto g = [&](double v) {
        return lam * (v * m.service.survival_transform(t, v) + (1.0 - z) * st * std::exp(-v * t)) - v;
    };
    if (g(0.0) == 0.0) return 0.0;
    const double hi_val = g(lam);
    if (hi_val > 0.0) throw NumericError("v_fixed_point: root not bracketed on [0, lambda]");
    return num::bisect(g, 0.0, lam, 0.0, 2000);
}

double v_residual(const AnalyticModel& m, double t, double z, double v) {
    const auto& d = m.service;
    double lst_part;  // ∫_0^t e^{-vx} dF(x)
    if (const auto* det = std::get_if<Deterministic>(&d.kind())) {
        lst_part = det->value <= t ? std::exp(-v * det->value) : 0.0;
    } else {
        const double lo = d.lower_endpoint();
        const double hi = std::min(t, d.right_endpoint());
        if (!(hi > lo)) {
            lst_part = 0.0;
        } else {
            std::vector<double> bps = d.breakpoints();
            const num::QuadOptions opt{1e-13, 1e-16, 50, 32};
            lst_part = num::integrate([&](double x) { return std::exp(-v * x) * d.pdf(x); }, lo, hi, bps, opt);
        }
    }
    return v - m.lambda * (1.0 - lst_part - z * d.survival(t) * std::exp(-v * t));
}

PgfSolution solve_queue_length_pgf(const AnalyticModel& m, double z) {
    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("queue_length_pgf: need 0 <= z <= 1");
    if (m.interarrival) throw DomainError("queue_length_pgf needs Poisson arrivals");
    require_stable(m, "queue_length_pgf");
    const double rho = m.rho();
    PgfSolution sol{z, 1.0 - rho, 0.0, {}, 0.0};
    double T = std::min(m.service.right_endpoint(), m.service.tail_quantile(1e-10));

    constexpr double h = 1e-5;
    auto dv_dz = [&](double t) {
        auto v = [&](double zz) { return v_fixed_point(m, t, zz); };
        if (z - h >= 0.0 && z + h <= 1.0) {
            const double d1 = (v(z + h) - v(z - h)) / (2.0 * h);
            const double d2 = (v(z + h / 2) - v(z - h / 2)) / h;
            return (4.0 * d2 - d1) / 3.0;
        }
        const double sgn = z - h >= 0.0 ? -1.0 : 1.0;  // backward near 1, forward near 0
        const double v0 = v(z);
        const double d1 = (v(z + sgn * h) - v0) / (sgn * h);
        const double d2 = (v(z + sgn * h / 2) - v0) / (sgn * h / 2);
        return 2.0 * d2 - d1;
    };

    auto record = [&](double t, double dv) {
        const double vv = v_fixed_point(m, t, z);
        const double res = v_residual(m, t, z, vv);
        sol.nodes.push_back(PgfNode{t, vv, dv, res});
        sol.max_residual = std::max(sol.max_residual, std::abs(res));
    };

    if (z == 0.0 || z == 1.0 || m.lambda == 0.0) {
        // Exact endpoints; keep a coarse node grid for diagnostics.
        for (int i = 0; i <= 32; ++i) {
            const double t = T * i / 32.0;
            record(t, dv_dz(t));
        }
        sol.value = (z == 1.0 || m.lambda == 0.0) ? 1.0 : 1.0 - rho;
        if (m.lambda == 0.0) sol.value = 1.0;
        return sol;
    }

    const auto integrand = [&](double t) {
        const double dv = dv_dz(t);
        record(t, dv);
        return z * dv;
    };
    sol.exponent = integrate_size(integrand, m.service, T, 1e-10);
    sol.value = (1.0 - rho) * std::exp(-sol.exponent);
    std::sort(sol.nodes.begin(), sol.nodes.end(), [](const PgfNode& a, const PgfNode& b) { return a.t < b.t; });
    return sol;
}

double queue_length_pgf(const AnalyticModel& m, double z) { return solve_queue_length_pgf(m, z).value; }

double cohort_intensity(const AnalyticModel& m, double x) {
    if (m.lambda == 0.0) return 0.0;
    const double r = rho_x(m, x);
    if (r >= 1.0) throw OverloadError("cohort_intensity: rho(x) >= 1", critical_size(m));
    return m.lambda * m.service.survival(x) / (1.0 - r);
}

double cohort_intensity_integral(const AnalyticModel& m) {
    if (m.lambda == 0.0) return 0.0;
    require_stable(m, "cohort_intensity_integral");
    const auto& d = m.service;
    double X = d.right_endpoint();
    if (std::isinf(X)) {
        // Remainder ∫_X^∞ mu <= lambda E(B - X)^+ / (1 - rho).
        const double c = m.lambda / (1.0 - m.rho());
        double eps = 1e-10;
        X = d.tail_quantile(eps);
        while (c * std::max(0.0, d.tail_expectation(X) - X * d.survival(X)) > 1e-13 && eps > 1e-290) {
            eps *= 1e-3;
            X = d.tail_quantile(eps);
        }
    }
    return integrate_size([&](double x) { return cohort_intensity(m, x); }, d, X, 1e-13);
}

double sojourn_lst(const AnalyticModel& m, double x, double s) {
    if (!(s >= 0.0)) throw DomainError("sojourn_lst: need s >= 0");
    if (!(x > 0.0)) throw DomainError("sojourn_lst: need x > 0");
    const double lam = m.lambda;
    if (lam == 0.0) return std::exp(-s * x);
    const double r = rho_x(m, x);
    if (r >= 1.0) throw OverloadError("sojourn_lst: rho(x) >= 1", critical_size(m));
    if (s == 0.0) return 1.0;
    const auto& d = m.service;
    // Busy period of the truncated queue: g = E e^{-w (B ∧ x)}, w = s + lambda (1 - g).
    double g = 0.0;
    int it = 0;
    for (; it < 10000; ++it) {
        const double w = s + lam * (1.0 - g);
        const double next = truncated_lst(d, x, w);
        const double diff = std::abs(next - g);
        g = next;
        if (diff <= 1e-14 * (1.0 - r)) break;
    }
    if (it >= 10000) {
        std::ostringstream os;
        os << "sojourn_lst: busy-period fixed point did not converge (x=" << x << ", s=" << s << ", g=" << g << ")";
        throw NumericError(os.str());
    }
    const double u = s + lam * (1.0 - g);
    const double work = (1.0 - r) / (1.0 - lam * d.survival_transform(x, u));
    return std::exp(-x * u) * work;
}

MomentEstimate cond_sojourn_moment(const AnalyticModel& m, double x, int n) {
    if (n < 1 || n > 3) throw DomainError("cond_sojourn_moment: n must be 1, 2 or 3");
    if (m.lambda == 0.0) return {std::pow(x, n), 0.0, false};
    const double scale = mean_cond_sojourn(m, x);
    constexpr int kOrder = 4;
    auto estimate = [&](double h) {
        std::vector<double> nodes;
        for (int k = 0; k < n + kOrder; ++k) nodes.push_back(k * h);
        const auto w = fd_weights(n, nodes);
        double d = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) d += w[k] * sojourn_lst(m, x, nodes[k] / scale);
        return d;
    };
    const double h = 0.04;
    const double coarse = estimate(h);
    const double fine = estimate(h / 2);
    const double rich = (std::pow(2.0, kOrder) * fine - coarse) / (std::pow(2.0, kOrder) - 1.0);
    const double sign = (n % 2 == 1) ? -1.0 : 1.0;
    const double value = sign * rich * std::pow(scale, n);
    const double dis = std::abs(rich - fine) / std::max(std::abs(rich), 1e-300);
    return {value, dis, dis > 1e-3};
}

double decay_objective(const AnalyticModel& m, double s) {
    if (s == 0.0) return 0.0;
    return s + interarrival_inverse(m, 1.0 / m.service.mgf(s));
}

DecayRateResult decay_rate(const AnalyticModel& m) {
    const auto dom = m.service.mgf_domain();
    return decay_core(m, [&](double s) {
        try {
            return m.service.mgf(s);
        } catch (const DivergenceError&) {
            return kInf;
        }
    }, dom);
}

DecayRateResult cond_decay_rate(const AnalyticModel& m, double x) {
    if (!(x > 0.0)) throw DomainError("cond_decay_rate: need x > 0");
    if (x >= m.service.right_endpoint()) return decay_rate(m);
    return decay_core(m, [&](double s) { return m.service.truncated_mgf(x, s); }, MgfDomain{kInf, true});
}

double reduced_load_tail(const AnalyticModel& m, double x) {
    require_stable(m, "reduced_load_tail");
    return m.service.survival((1.0 - m.rho()) * x);
}

double busy_tail_factor(double rho, double alpha) {
    if (!(rho >= 0.0 && rho < 1.0)) throw DomainError("busy_tail_factor: need 0 <= rho < 1");
    return std::pow(1.0 - rho, -alpha - 1.0);
}

double critical_size(const AnalyticModel& m) {
    if (m.rho() <= 1.0) return kInf;
    const auto& d = m.service;
    const auto f = [&](double x) { return m.lambda * d.truncated_moment(x, 1) - 1.0; };
    double hi = d.right_endpoint();
    if (std::isinf(hi)) {
        hi = std::max(1.0, d.mean());
        while (f(hi) <= 0.0) hi *= 2.0;
    }
    return num::bisect(f, 0.0, hi, 0.0, 2000);
}

SlowdownProfile slowdown_profile(const AnalyticModel& m, std::span<const double> xs) {
    SlowdownProfile p;
    const double rho = m.rho();
    require_stable(m, "slowdown_profile");
    for (double x : xs) {
        if (!(x > 0.0)) throw DomainError("slowdown_profile: sizes must be > 0");
        p.x.push_back(x);
        p.slowdown.push_back(mean_cond_sojourn(m, x) / x);
    }
    for (std::size_t i = 0; i + 1 < p.x.size(); ++i) {
        if (p.x[i] < p.x[i + 1] && p.slowdown[i] > p.slowdown[i + 1]) {
            p.non_monotone = std::make_pair(p.x[i], p.x[i + 1]);
            break;
        }
    }
    p.limit = 1.0 / (1.0 - rho);
    p.mean_bound = (2.0 - rho) / (2.0 * (1.0 - rho) * (1.0 - rho));
    if (m.lambda == 0.0) {
        p.mean_slowdown = 1.0;
    } else {
        const auto tail = [&](double X) { return p.mean_bound * m.service.survival(X); };
        p.mean_slowdown = m.service.integrate_density(
            [&](double x) { return mean_cond_sojourn(m, x) / x; }, 1e-10, tail, 1e-12);
    }
    return p;
}

std::vector<double> quantile_grid(const ServiceDistribution& d, double p_lo, double p_hi, std::size_t n) {
    const double a = d.quantile(p_lo);
    const double b = p_hi > 0.999 ? d.tail_quantile(1.0 - p_hi) : d.quantile(p_hi);
    std::vector<double> xs;
    if (n == 1 || !(b > a) || !(a > 0.0)) {
        xs.push_back(b);
        return xs;
    }
    for (std::size_t i = 0; i < n; ++i)
        xs.push_back(a * std::pow(b / a, static_cast<double>(i) / static_cast<double>(n - 1)));
    return xs;
}

double Compensator::apply(double eq, double rho) const {
    const double l = std::log(1.0 / (1.0 - rho));
    switch (kind) {
        case CompensatorKind::Power: return eq * std::pow(1.0 - rho, exponent);
        case CompensatorKind::Log: return eq / l;
        case CompensatorKind::LogSquared: return eq / (l * l);
    }
    return eq;
}

std::string Compensator::name() const {
    std::ostringstream os;
    switch (kind) {
        case CompensatorKind::Power: os << "power(" << exponent << ")"; break;
        case CompensatorKind::Log: os << "log"; break;
        case CompensatorKind::LogSquared: os << "log2"; break;
    }
    return os.str();
}

std::vector<double> default_heavy_traffic_grid() { return {0.9, 0.95, 0.98, 0.99, 0.995, 0.998, 0.999}; }

std::vector<HeavyTrafficRow> heavy_traffic_scan(const ServiceDistribution& service, const Compensator& c,
                                                std::span<const double> rhos) {
    std::vector<HeavyTrafficRow> rows;
    for (double rho : rhos) {
        HeavyTrafficRow r{rho, std::nan(""), std::nan(""), -std::log1p(-rho), std::nullopt};
        try {
            if (!(rho > 0.0 && rho < 1.0)) throw DomainError("rho must lie in (0, 1)");
            if (rho > 0.999) throw DomainError("rho above 0.999 is outside the supported grid");
            r.eq = mean_queue_length(AnalyticModel::at_load(service, rho));
            r.compensated = c.apply(r.eq, rho);
        } catch (const std::exception& e) {
            r.error = e.what();
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace fbq
