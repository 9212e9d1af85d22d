#include "fbq/validation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <tuple>

#include "fbq/analytic.hpp"
#include "fbq/engine.hpp"
#include "fbq/errors.hpp"
#include "fbq/rng.hpp"
#include "fbq/stats.hpp"

namespace fbq::validation {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

using json = nlohmann::json;

// Stable per-experiment seed so suites do not depend on each other's order.
std::uint64_t seed_for(const Options& o, const std::string& tag) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return RngStream::splitmix64(o.seed ^ h);
}

double scaled(double base, const Options& o, double floor = 1.0) {
    return std::max(floor, std::round(base * o.effort));
}

Verdict make(std::string name, double analytic, double empirical, double statistic, double tolerance, bool ok,
             std::vector<std::uint64_t> seeds = {}) {
    return Verdict{std::move(name), analytic, empirical, kNaN, kNaN, statistic, tolerance,
                   ok ? Outcome::Pass : Outcome::Fail, std::move(seeds), json::object()};
}

// Analytic value inside the 99% CI passes; a CI wider than 10% of the value
// means the run was too short to say anything.
Verdict ci_verdict(std::string name, double analytic, const stats::Estimate& e, std::uint64_t seed) {
    const auto [lo, hi] = e.ci(0.99);
    const double crit = stats::t_quantile(0.995, e.dof);
    const double z = std::abs(e.value - analytic) / e.std_error;
    Verdict v{std::move(name), analytic, e.value, lo, hi, z, crit, Outcome::Fail, {seed}, json::object()};
    if (!std::isfinite(z) || hi - lo > 0.1 * std::abs(analytic))
        v.outcome = Outcome::Inconclusive;
    else if (lo <= analytic && analytic <= hi)
        v.outcome = Outcome::Pass;
    v.details["std_error"] = e.std_error;
    v.details["dof"] = e.dof;
    v.details["observations"] = e.count;
    return v;
}

SimConfig stationary(const ServiceDistribution& d, double rho, double jobs, const Options& o, std::uint64_t seed) {
    SimConfig c;
    c.model.service = d;
    c.model.arrival_rate = rho / d.mean();
    c.horizon = {HorizonKind::Jobs, jobs};
    c.seed = seed;
    c.threads = o.threads;
    return c;
}

std::string label(const ServiceDistribution& d, double rho) {
    std::ostringstream s;
    s << d.name() << "@rho=" << rho;
    return s.str();
}

// E V(x) when a fraction f of arrivals are replaced by probes spread evenly
// over `probes`: Schrage's formula with the mixed law's truncated moments.
double mixture_cond_sojourn(const AnalyticModel& m, const std::vector<double>& probes, double f, double x) {
    const double k = static_cast<double>(probes.size());
    double m1 = (1.0 - f) * m.service.truncated_moment(x, 1);
    double m2 = (1.0 - f) * m.service.truncated_moment(x, 2);
    for (double p : probes) {
        const double y = std::min(p, x);
        m1 += f / k * y;
        m2 += f / k * y * y;
    }
    const double rx = m.lambda * m1;
    return m.lambda * m2 / (2.0 * (1.0 - rx) * (1.0 - rx)) + x / (1.0 - rx);
}

std::map<std::uint64_t, std::uint64_t> max_queue_histogram(const SimulationMetrics& m) {
    std::map<std::uint64_t, std::uint64_t> h;
    for (const auto& b : m.busy_periods) ++h[b.max_queue];
    return h;
}

// max over n of (P^(M > n) - rho^n) / sqrt(rho^n (1 - rho^n) / N).
std::pair<double, std::uint64_t> geometric_excess(const std::map<std::uint64_t, std::uint64_t>& h, double rho) {
    std::uint64_t total = 0, top = 0;
    for (const auto& [k, c] : h) {
        total += c;
        top = std::max(top, k);
    }
    const double N = static_cast<double>(total);
    double worst = -kInf;
    std::uint64_t at = 0;
    std::uint64_t above = total;  // # periods with M > n
    auto it = h.begin();
    for (std::uint64_t n = 1; n <= top; ++n) {
        while (it != h.end() && it->first <= n) {
            above -= it->second;
            ++it;
        }
        const double b = std::pow(rho, static_cast<double>(n));
        const double se = std::sqrt(b * (1.0 - b) / N);
        const double z = (static_cast<double>(above) / N - b) / se;
        if (z > worst) {
            worst = z;
            at = n;
        }
    }
    return {worst, at};
}

}  // namespace

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::Pass: return "pass";
        case Outcome::Fail: return "fail";
        case Outcome::Inconclusive: return "inconclusive";
        case Outcome::Informational: return "informational";
    }
    return "?";
}

std::vector<Verdict> check_mean_formulas(const Options& o) {
    std::vector<Verdict> out;
    const std::vector<std::pair<ServiceDistribution, double>> eq_cases = {
        {ServiceDistribution::exponential(1.0), 0.5},
        {ServiceDistribution::deterministic(1.0), 0.5},
        {ServiceDistribution::pareto(1.0, 2.5), 0.5},
    };
    for (const auto& [d, rho] : eq_cases) {
        const std::string name = label(d, rho);
        const auto seed = seed_for(o, "mean/eq/" + name);
        const auto c = stationary(d, rho, scaled(1e6, o), o, seed);
        const auto m = run(c);
        const double eq = mean_queue_length(AnalyticModel::from(c.model));
        out.push_back(ci_verdict("mean-formulas/EQ-time-average/" + name, eq, m.time_avg_queue_length, seed));
        out.push_back(ci_verdict("mean-formulas/EQ-little/" + name, eq, m.little_queue_length, seed));
        if (std::holds_alternative<Deterministic>(d.kind())) {
            std::uint64_t split = 0;
            for (const auto& b : m.busy_periods) split += b.departure_instants != 1;
            auto v = make("mean-formulas/batch-departures/" + name, 1.0,
                          static_cast<double>(m.busy_periods.size() - split) / static_cast<double>(m.busy_periods.size()),
                          static_cast<double>(split), 0.0, split == 0, {seed});
            v.details["busy_periods"] = m.busy_periods.size();
            v.details["work_conservation_error"] = m.work_conservation_error;
            out.push_back(std::move(v));
        }
    }

    const double fraction = 1e-3;
    for (const auto& d : {ServiceDistribution::exponential(1.0), ServiceDistribution::deterministic(1.0),
                          ServiceDistribution::pareto(1.0, 2.5)}) {
        for (double rho : {0.5, 0.7}) {
            const std::string name = label(d, rho);
            const auto seed = seed_for(o, "mean/probe/" + name);
            auto c = stationary(d, rho, scaled(4e7, o), o, seed);
            const double eb = d.mean();
            c.probe_sizes = {0.5 * eb, eb, 3.0 * eb};
            c.probe_fraction = fraction;
            const auto m = run(c);
            const auto am = AnalyticModel::from(c.model);
            for (const auto& p : m.probes) {
                const double ev = mixture_cond_sojourn(am, c.probe_sizes, fraction, p.size);
                std::ostringstream n;
                n << "mean-formulas/EV/" << name << "/x=" << p.size;
                auto v = ci_verdict(n.str(), ev, p.sojourn, seed);
                v.details["x"] = p.size;
                v.details["ev_unperturbed"] = mean_cond_sojourn(am, p.size);
                out.push_back(std::move(v));
            }
        }
    }
    return out;
}

std::vector<Verdict> check_stochastic_order(const Options& o) {
    enum class Expect { Equal, FbSmaller, FbLarger };
    const std::vector<std::pair<ServiceDistribution, Expect>> cases = {
        {ServiceDistribution::exponential(1.0), Expect::Equal},
        {ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 2.0 / 11.0}), Expect::FbSmaller},
        {ServiceDistribution::uniform(0.0, 1.0), Expect::FbLarger},
    };
    const double rho = 0.8;
    const auto reps = static_cast<std::uint64_t>(scaled(1e4, o, 100));
    std::vector<Verdict> out;
    for (const auto& [d, expect] : cases) {
        QueueModel q;
        q.service = d;
        q.arrival_rate = rho / d.mean();
        const double t = 10.0 / q.arrival_rate;
        const auto seed = seed_for(o, "order/" + d.name());
        const auto r = transient_queue_cdf(q, t, reps, seed, {discipline::FB{}, discipline::FIFO{}});

        // Paired differences of indicator CDFs; common random numbers make
        // most pairs agree, so this is much sharper than a two-sample test.
        const std::size_t K = std::max(r.counts[0].size(), r.counts[1].size());
        const double n = static_cast<double>(reps);
        double zmin = 0.0, zmax = 0.0;
        std::size_t cells = 0;
        std::vector<double> diff(K, 0.0), zs(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0, ss = 0.0;
            for (std::size_t i = 0; i < reps; ++i) {
                const double a = static_cast<double>(r.samples[0][i] <= k) - static_cast<double>(r.samples[1][i] <= k);
                s += a;
                ss += a * a;
            }
            const double mean = s / n;
            const double var = (ss - n * mean * mean) / (n - 1.0);
            diff[k] = mean;
            if (var <= 0.0) continue;
            const double z = mean / std::sqrt(var / n);
            zs[k] = z;
            ++cells;
            zmin = std::min(zmin, z);
            zmax = std::max(zmax, z);
        }
        const double crit = stats::normal_quantile(1.0 - 0.01 / (2.0 * static_cast<double>(std::max<std::size_t>(cells, 1))));

        double qfb = 0.0, qfifo = 0.0;
        std::vector<double> d_q(reps);
        for (std::size_t i = 0; i < reps; ++i) {
            qfb += r.samples[0][i];
            qfifo += r.samples[1][i];
            d_q[i] = static_cast<double>(r.samples[0][i]) - static_cast<double>(r.samples[1][i]);
        }
        const auto dq = stats::mean_estimate(d_q);

        bool ok = false;
        double statistic = kNaN;
        std::string claim;
        switch (expect) {
            case Expect::Equal:
                ok = std::max(-zmin, zmax) <= crit;
                statistic = std::max(-zmin, zmax);
                claim = "equal";
                break;
            case Expect::FbSmaller:
                ok = zmin >= -crit && zmax > crit;
                statistic = -zmin;
                claim = "fb-smaller";
                break;
            case Expect::FbLarger:
                ok = zmax <= crit && zmin < -crit;
                statistic = zmax;
                claim = "fb-larger";
                break;
        }
        Verdict v{"stochastic-order/" + claim + "/" + d.name(), 0.0, dq.value, dq.ci(0.99).first, dq.ci(0.99).second,
                  statistic, crit, ok ? Outcome::Pass : Outcome::Fail, {seed}, json::object()};
        v.details["t"] = t;
        v.details["rho"] = rho;
        v.details["replications"] = reps;
        v.details["z_min"] = zmin;
        v.details["z_max"] = zmax;
        v.details["cells"] = cells;
        v.details["mean_q_fb"] = qfb / n;
        v.details["mean_q_fifo"] = qfifo / n;
        v.details["cdf_difference"] = diff;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<Verdict> check_max_queue(const Options& o) {
    std::vector<Verdict> out;
    {
        const double lambda = 0.5;
        const auto seed = seed_for(o, "maxq/borel");
        const auto c = stationary(ServiceDistribution::deterministic(1.0), lambda, scaled(1e6, o, 1e3), o, seed);
        const auto m = run(c);
        const auto h = max_queue_histogram(m);
        const std::uint64_t top = h.empty() ? 1 : h.rbegin()->first;
        std::vector<double> observed(top, 0.0), probs(top, 0.0);
        for (const auto& [k, cnt] : h) observed[k - 1] = static_cast<double>(cnt);
        for (std::uint64_t n = 1; n <= top; ++n) probs[n - 1] = borel_pmf(lambda, n);
        const auto g = stats::chi_square_gof(observed, probs);
        const double N = static_cast<double>(m.busy_periods.size());
        Verdict v = make("max-queue/borel-fit", kNaN, kNaN, g.p_value, 0.01, g.p_value >= 0.01, {seed});
        if (N < 1e5 * std::min(1.0, o.effort)) v.outcome = Outcome::Inconclusive;
        v.details["busy_periods"] = m.busy_periods.size();
        v.details["chi_square"] = g.statistic;
        v.details["dof"] = g.dof;
        v.details["cells"] = g.cells;
        out.push_back(std::move(v));

        const double p1 = observed.empty() ? 0.0 : observed[0] / N;
        const double se = std::sqrt(p1 * (1.0 - p1) / N);
        const double exact = std::exp(-lambda);
        Verdict w{"max-queue/borel-p1", borel_pmf(lambda, 1), p1, p1 - 2.576 * se, p1 + 2.576 * se,
                  std::abs(borel_pmf(lambda, 1) - exact), 1e-15, Outcome::Fail, {seed}, json::object()};
        w.outcome = w.statistic <= w.tolerance && w.ci_lo <= exact && exact <= w.ci_hi ? Outcome::Pass : Outcome::Fail;
        out.push_back(std::move(w));
    }

    const std::vector<std::pair<ServiceDistribution, double>> geo = {
        {ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 2.0 / 11.0}), 0.7},
        {ServiceDistribution::weibull(1.0, 0.5), 0.7},
        {ServiceDistribution::pareto(1.0, 2.0), 0.7},
        {ServiceDistribution::weibull(1.0, 0.5), 0.3},
    };
    for (const auto& [d, rho] : geo) {
        const std::string name = label(d, rho);
        const auto seed = seed_for(o, "maxq/geo/" + name);
        auto c = stationary(d, rho, scaled(1e6, o, 1e3), o, seed);
        const bool time_bound = std::holds_alternative<Hyperexponential>(d.kind());
        if (time_bound) c.max_queue_times = {1e2, 1e3, 1e4, 1e5};
        const auto m = run(c);
        const auto [worst, at] = geometric_excess(max_queue_histogram(m), rho);
        Verdict v = make("max-queue/geometric-bound/" + name, kNaN, kNaN, worst, 3.0, worst <= 3.0, {seed});
        v.details["busy_periods"] = m.busy_periods.size();
        v.details["worst_n"] = at;
        if (m.busy_periods.size() < 1e5 * std::min(1.0, o.effort)) v.outcome = Outcome::Inconclusive;
        out.push_back(std::move(v));

        if (time_bound) {
            // The overflow-time theorem is asymptotic in t; reported only.
            json rows = json::array();
            for (const auto& [t, mt] : m.max_queue_at)
                rows.push_back({{"t", t}, {"M", mt}, {"threshold_x5", maxq_time_bound(c.model.arrival_rate, rho, t, 5.0)}});
            Verdict w = make("max-queue/time-bound/" + name, kNaN, kNaN, kNaN, kNaN, true, {seed});
            w.outcome = Outcome::Informational;
            w.details["samples"] = rows;
            out.push_back(std::move(w));
        }
    }
    return out;
}

std::vector<Verdict> check_tail_equivalence(const Options& o) {
    std::vector<Verdict> out;
    const double alpha = 2.5, rho = 0.5;
    const auto d = ServiceDistribution::pareto(1.0, alpha);
    const auto seed = seed_for(o, "tail");
    auto c = stationary(d, rho, scaled(1e7, o, 1e4), o, seed);
    c.keep_sojourns = true;
    const auto m = run(c);
    const auto am = AnalyticModel::from(c.model);

    std::vector<double> v = m.sojourns;
    std::sort(v.begin(), v.end());
    std::vector<double> L;
    L.reserve(m.busy_periods.size());
    for (const auto& b : m.busy_periods) L.push_back(b.length);
    std::sort(L.begin(), L.end());

    auto exceed = [](const std::vector<double>& s, double x) {
        return static_cast<double>(s.end() - std::upper_bound(s.begin(), s.end(), x));
    };

    struct Level {
        double p, x, nv, pv, pl, r_vb, r_vl, r_lb;
    };
    std::vector<Level> lv;
    for (double p : {0.99, 0.999}) {
        Level l{};
        l.p = p;
        l.x = v.empty() ? kNaN : v[static_cast<std::size_t>(p * static_cast<double>(v.size()))];
        l.nv = exceed(v, l.x);
        l.pv = l.nv / static_cast<double>(v.size());
        l.pl = exceed(L, l.x) / static_cast<double>(L.size());
        l.r_vb = l.pv / reduced_load_tail(am, l.x);
        l.r_vl = l.pv / ((1.0 - rho) * l.pl);
        l.r_lb = l.pl / (busy_tail_factor(rho, alpha) * d.survival(l.x));
        lv.push_back(l);
    }
    const bool enough = lv[1].nv >= 100.0 && exceed(L, lv[1].x) >= 100.0;

    auto envelope = [&](const char* name, double Level::*r) {
        const double a = lv[0].*r, b = lv[1].*r;
        const bool in = a >= 0.5 && a <= 2.0;
        const bool toward = std::abs(std::log(b)) < std::abs(std::log(a));
        Verdict w = make(std::string("tail-equivalence/") + name, 1.0, b, std::abs(std::log(b)), std::log(2.0),
                         in && toward, {seed});
        if (!enough) w.outcome = Outcome::Inconclusive;
        w.details["envelope"] = {0.5, 2.0};
        for (const auto& l : lv)
            w.details["levels"].push_back({{"quantile", l.p}, {"x", l.x}, {"ratio", l.*r}, {"exceedances", l.nv}});
        w.details["moves_toward_one"] = toward;
        out.push_back(std::move(w));
    };
    envelope("V-vs-reduced-load", &Level::r_vb);
    envelope("V-vs-busy-period", &Level::r_vl);
    envelope("busy-period-factor", &Level::r_lb);

    // With no competing load V = B and the reduced-load tail is the size tail.
    const auto idle = AnalyticModel{0.0, d, std::nullopt};
    const double x = 100.0;
    const double r0 = d.survival(x) / reduced_load_tail(idle, x);
    out.push_back(make("tail-equivalence/rho-zero", 1.0, r0, std::abs(r0 - 1.0), 1e-12, std::abs(r0 - 1.0) <= 1e-12));
    return out;
}

std::vector<Verdict> check_heavy_traffic(const Options&) {
    std::vector<Verdict> out;
    const auto grid = default_heavy_traffic_grid();
    struct Case {
        ServiceDistribution d;
        Compensator c;
        bool log_fit;
    };
    const std::vector<Case> cases = {
        {ServiceDistribution::pareto(1.0, 3.0), {CompensatorKind::Power, 0.5}, false},
        {ServiceDistribution::pareto(1.0, 1.5), {CompensatorKind::Log, 1.0}, true},
        {ServiceDistribution::pareto(1.0, 2.0), {CompensatorKind::LogSquared, 1.0}, false},
        {ServiceDistribution::uniform(0.0, 1.0), {CompensatorKind::Power, 1.5}, false},
    };
    for (const auto& cs : cases) {
        const auto rows = heavy_traffic_scan(cs.d, cs.c, grid);
        const std::string name = cs.d.name() + "/" + cs.c.name();
        double lo = kInf, hi = 0.0, worst_lb = kInf;
        bool errors = false;
        json table = json::array();
        std::vector<double> lx, ly;
        for (const auto& r : rows) {
            table.push_back({{"rho", r.rho}, {"EQ", r.eq}, {"compensated", r.compensated}, {"lower_bound", r.lower_bound}});
            if (r.error) {
                errors = true;
                continue;
            }
            lo = std::min(lo, r.compensated);
            hi = std::max(hi, r.compensated);
            worst_lb = std::min(worst_lb, r.eq - r.lower_bound);
            lx.push_back(std::log(r.lower_bound));
            ly.push_back(std::log(r.eq));
        }
        const double spread = hi / lo;
        Verdict v = make("heavy-traffic/bounded/" + name, kNaN, spread, spread, 10.0, !errors && spread <= 10.0);
        v.details["table"] = table;
        out.push_back(std::move(v));
        out.push_back(make("heavy-traffic/lower-bound/" + name, kNaN, worst_lb, worst_lb, 0.0, !errors && worst_lb >= 0.0));

        if (cs.log_fit && lx.size() >= 2) {
            const double n = static_cast<double>(lx.size());
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            for (std::size_t i = 0; i < lx.size(); ++i) {
                sx += lx[i];
                sy += ly[i];
                sxx += lx[i] * lx[i];
                sxy += lx[i] * ly[i];
            }
            const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
            Verdict w = make("heavy-traffic/log-fit-slope/" + name, 1.0, slope, slope, kNaN, slope >= 0.8 && slope <= 1.3);
            w.details["window"] = {0.8, 1.3};
            out.push_back(std::move(w));
        }
    }
    // M/D/1 waiting-room ratio against the mean-value formula for FIFO.
    for (double rho : {0.5, 0.9, 0.99}) {
        const double lq = rho * rho / (2.0 * (1.0 - rho));
        const double want = lq / det_bound(rho);
        const double got = fifo_fb_md1_ratio(rho);
        std::ostringstream n;
        n << "heavy-traffic/md1-fifo-ratio/rho=" << rho;
        Verdict v = make(n.str(), want, got, std::abs(got - want), 1e-12, std::abs(got - want) <= 1e-12);
        v.details["one_minus_rho"] = 1.0 - rho;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<Verdict> check_ht_exponential_limit(const Options& o) {
    std::vector<Verdict> out;
    const std::vector<std::tuple<ServiceDistribution, double, bool>> cases = {
        {ServiceDistribution::gamma(2.0, 1.0), 0.95, true},
        {ServiceDistribution::exponential(1.0), 0.95, true},
        {ServiceDistribution::gamma(2.0, 1.0), 0.5, false},
    };
    const double samples = scaled(1e4, o, 200);
    for (const auto& [d, rho, target] : cases) {
        const std::string name = label(d, rho);
        const auto seed = seed_for(o, "htexp/" + name);
        SimConfig c = stationary(d, rho, 1.0, o, seed);
        // Samples a few relaxation times apart.
        const double spacing = 10.0 * d.mean() / ((1.0 - rho) * (1.0 - rho));
        c.horizon = {HorizonKind::Time, spacing * (samples + 1.0) / (1.0 - c.warmup)};
        c.queue_sample_interval = spacing;
        c.keep_busy_periods = false;
        const auto m = run(c);
        const double eq = mean_queue_length(AnalyticModel::from(c.model));
        std::vector<double> cnt;
        for (const auto& [t, q] : m.queue_samples) {
            if (cnt.size() <= q) cnt.resize(q + 1, 0.0);
            cnt[q] += 1.0;
        }
        // Q is integer valued; compare P(Q <= j) with the limit law at j + 1/2.
        const double n = static_cast<double>(m.queue_samples.size());
        double acc = 0.0, ks = 0.0;
        for (std::size_t j = 0; j < cnt.size(); ++j) {
            acc += cnt[j];
            ks = std::max(ks, std::abs(acc / n - (1.0 - std::exp(-(static_cast<double>(j) + 0.5) / eq))));
        }
        Verdict v = make("ht-exponential-limit/" + name, eq, ks, ks, 0.05, ks < 0.05, {seed});
        if (!target) v.outcome = Outcome::Informational;
        v.details["samples"] = n;
        v.details["spacing"] = spacing;
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<Verdict> check_truncation_and_cohorts(const Options& o) {
    std::vector<Verdict> out;
    const std::vector<std::pair<ServiceDistribution, double>> models = {
        {ServiceDistribution::exponential(1.0), 0.5},
        {ServiceDistribution::pareto(1.0, 2.5), 0.8},
    };
    for (const auto& [d, rho] : models) {
        const std::string name = label(d, rho);
        QueueModel q;
        q.service = d;
        q.arrival_rate = rho / d.mean();
        const double x = d.quantile(0.9);
        double worst = 0.0;
        std::vector<std::uint64_t> seeds;
        const int traces = static_cast<int>(scaled(100, o, 10));
        for (int i = 0; i < traces; ++i) {
            const auto seed = seed_for(o, "trunc/" + name + "/" + std::to_string(i));
            seeds.push_back(seed);
            auto jobs = make_trace(q, 1000, seed);
            const std::size_t tagged = jobs.size() / 2;
            jobs[tagged].size = x;
            const auto r = coupled_truncation_run(jobs, tagged, x);
            worst = std::max(worst, std::abs(r.full - r.truncated));
        }
        Verdict v = make("truncation/coupled/" + name, 0.0, worst, worst, 1e-9, worst < 1e-9, seeds);
        v.details["traces"] = traces;
        v.details["x"] = x;
        out.push_back(std::move(v));
    }

    const std::vector<std::pair<ServiceDistribution, double>> census = {
        {ServiceDistribution::exponential(1.0), 0.5},
        {ServiceDistribution::exponential(1.0), 0.8},
        {ServiceDistribution::pareto(1.0, 2.5), 0.8},
    };
    for (const auto& [d, rho] : census) {
        const std::string name = label(d, rho);
        const auto seed = seed_for(o, "census/" + name);
        SimConfig c = stationary(d, rho, 1.0, o, seed);
        const double snaps = scaled(5000, o, 200);
        const double spacing = 5.0 * d.mean() / ((1.0 - rho) * (1.0 - rho));
        c.horizon = {HorizonKind::Time, spacing * (snaps + 1.0) / (1.0 - c.warmup)};
        c.census_interval = spacing;
        c.keep_busy_periods = false;
        const auto m = run(c);
        const double mu = -std::log1p(-rho);
        std::vector<double> observed;
        for (const auto& s : m.census) {
            if (observed.size() <= s.cohorts.size()) observed.resize(s.cohorts.size() + 1, 0.0);
            observed[s.cohorts.size()] += 1.0;
        }
        std::vector<double> probs(observed.size());
        for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = stats::poisson_pmf(k, mu);
        const auto g = stats::chi_square_gof(observed, probs);
        double mean = 0.0;
        for (std::size_t k = 0; k < observed.size(); ++k) mean += static_cast<double>(k) * observed[k];
        mean /= static_cast<double>(m.census.size());
        Verdict v = make("cohorts/census-poisson/" + name, mu, mean, g.p_value, 0.01, g.p_value >= 0.01, {seed});
        v.details["snapshots"] = m.census.size();
        v.details["chi_square"] = g.statistic;
        v.details["dof"] = g.dof;
        out.push_back(std::move(v));

        const double integral = cohort_intensity_integral(AnalyticModel::from(c.model));
        out.push_back(make("cohorts/intensity-integral/" + name, mu, integral, std::abs(integral - mu), 1e-8,
                           std::abs(integral - mu) <= 1e-8));
    }
    return out;
}

std::vector<Verdict> check_slowdown(const Options&) {
    std::vector<Verdict> out;
    const double rho = 0.5;
    const std::vector<std::pair<ServiceDistribution, bool>> models = {
        {ServiceDistribution::pareto(1.0, 2.5), true},
        {ServiceDistribution::exponential(1.0), false},
        {ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 2.0 / 11.0}), false},
        {ServiceDistribution::weibull(1.0, 0.5), false},
    };
    bool found_non_monotone = false;
    json witness;
    for (const auto& [d, target] : models) {
        const auto am = AnalyticModel::at_load(d, rho);
        const auto xs = quantile_grid(d, 1e-3, 0.9999, 400);
        const auto p = slowdown_profile(am, xs);
        const double tail = p.slowdown.back();
        const double excess = tail / p.limit - 1.0;
        const std::string name = label(d, rho);

        // Every law approaches from above; only the Pareto tail gets within 5%
        // by q0.9999 (the gap decays like 1/x).
        out.push_back(make("slowdown/above-limit/" + name, p.limit, tail, excess, 0.0, excess > 0.0));
        Verdict v = make("slowdown/within-5pct/" + name, p.limit, tail, excess, 0.05, excess > 0.0 && excess <= 0.05);
        if (!target) v.outcome = Outcome::Informational;
        v.details["x"] = xs.back();
        out.push_back(std::move(v));

        out.push_back(make("slowdown/mean-bound/" + name, p.mean_bound, p.mean_slowdown, p.mean_slowdown, p.mean_bound,
                           p.mean_slowdown <= p.mean_bound));
        if (p.non_monotone && !found_non_monotone) {
            found_non_monotone = true;
            witness = {{"model", name}, {"x1", p.non_monotone->first}, {"x2", p.non_monotone->second}};
        }
    }
    Verdict v = make("slowdown/non-monotone-instance", kNaN, kNaN, found_non_monotone ? 1.0 : 0.0, 1.0, found_non_monotone);
    v.details["witness"] = witness;
    out.push_back(std::move(v));
    return out;
}

std::vector<Verdict> check_overload(const Options& o) {
    std::vector<Verdict> out;
    const auto d = ServiceDistribution::exponential(1.0);
    const AnalyticModel am{2.0, d, std::nullopt};
    const double xs = critical_size(am);
    out.push_back(make("overload/critical-size", std::numbers::ln2, xs, std::abs(xs - std::numbers::ln2), 1e-12,
                       std::abs(xs - std::numbers::ln2) <= 1e-12));

    const auto seed = seed_for(o, "overload");
    SimConfig c;
    c.model.service = d;
    c.model.arrival_rate = 2.0;
    c.horizon = {HorizonKind::Time, scaled(1e5, o, 1e3)};
    c.seed = seed;
    const auto r = overload_run(c);
    const auto f = r.departure_fraction();
    double below = 1.0, above = 0.0;
    bool any_below = false, any_above = false;
    json buckets = json::array();
    for (std::size_t i = 0; i + 1 < r.bucket_edges.size(); ++i) {
        buckets.push_back({{"lo", r.bucket_edges[i]}, {"hi", r.bucket_edges[i + 1]}, {"arrived", r.arrived[i]},
                           {"departed", r.departed[i]}, {"fraction", f[i]}});
        if (r.bucket_edges[i + 1] <= xs + 1e-12) {
            below = std::min(below, f[i]);
            any_below = true;
        } else if (r.bucket_edges[i] >= xs - 1e-12) {
            above = std::max(above, f[i]);
            any_above = true;
        }
    }
    Verdict v = make("overload/small-jobs-depart", 1.0, below, below, 0.99, any_below && below >= 0.99, {seed});
    v.details["buckets"] = buckets;
    v.details["growth_rate"] = r.growth_rate;
    out.push_back(std::move(v));
    out.push_back(make("overload/large-jobs-stay", 0.0, above, above, 1.0, any_above && above < 1.0, {seed}));

    // Deterministic sizes with lambda d > 1. A job can still finish while the
    // system is nearly empty at the start, so only jobs arriving after the
    // first 1% of the horizon are judged: none of them may ever leave.
    SimConfig cd = c;
    cd.model.service = ServiceDistribution::deterministic(1.0);
    cd.horizon.value = scaled(1e4, o, 1e2);
    cd.allow_overload = true;
    cd.keep_jobs = true;
    cd.warmup = 0.0;
    cd.keep_busy_periods = false;
    const auto md = run(cd);
    std::uint64_t early = 0, late = 0;
    for (const auto& j : md.jobs) {
        if (!j.departure) continue;
        (j.arrival <= 0.01 * cd.horizon.value ? early : late) += 1;
    }
    Verdict vd = make("overload/deterministic-no-departures", 0.0, static_cast<double>(late),
                      static_cast<double>(late), 0.0, late == 0, {seed});
    vd.details["early_departures"] = early;
    out.push_back(std::move(vd));
    return out;
}

std::vector<Verdict> check_pgf(const Options& o) {
    std::vector<Verdict> out;
    const double rho = 0.5;
    const auto mm1 = AnalyticModel::at_load(ServiceDistribution::exponential(1.0), rho);
    double worst = 0.0, worst_res = 0.0;
    bool v_zero = true;
    json points = json::array();
    for (double z : {0.0, 0.2, 0.5, 0.8, 1.0}) {
        const auto s = solve_queue_length_pgf(mm1, z);
        const double want = (1.0 - rho) / (1.0 - rho * z);
        worst = std::max(worst, std::abs(s.value - want));
        worst_res = std::max(worst_res, s.max_residual);
        points.push_back({{"z", z}, {"pgf", s.value}, {"geometric", want}, {"max_residual", s.max_residual}});
        if (z == 1.0)
            for (const auto& nd : s.nodes) v_zero = v_zero && nd.v == 0.0;
    }
    for (double t : {0.1, 1.0, 10.0}) v_zero = v_zero && v_fixed_point(mm1, t, 1.0) == 0.0;
    Verdict v = make("pgf/mm1-geometric", kNaN, worst, worst, 1e-4, worst < 1e-4);
    v.details["points"] = points;
    out.push_back(std::move(v));
    out.push_back(make("pgf/v-at-z1-is-zero", 0.0, v_zero ? 0.0 : 1.0, v_zero ? 0.0 : 1.0, 0.0, v_zero));
    out.push_back(make("pgf/fixed-point-residual", 0.0, worst_res, worst_res, 1e-10, worst_res < 1e-10));

    // pgf'(1) = EQ, and shape checks, across laws with different hazard shapes.
    for (const auto& d : {ServiceDistribution::exponential(1.0),
                          ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 2.0 / 11.0}),
                          ServiceDistribution::uniform(0.0, 1.0)}) {
        const auto am = AnalyticModel::at_load(d, rho);
        const std::string name = label(d, rho);
        const double eq = mean_queue_length(am);
        // Backward differences at h, h/2, h/4 with two Richardson sweeps.
        const double h = 0.02;
        double D[3];
        for (int i = 0; i < 3; ++i) {
            const double hi = h / std::pow(2.0, i);
            D[i] = (1.0 - queue_length_pgf(am, 1.0 - hi)) / hi;
        }
        const double r1a = 2.0 * D[1] - D[0], r1b = 2.0 * D[2] - D[1];
        const double deriv = (4.0 * r1b - r1a) / 3.0;
        const double rel = std::abs(deriv - eq) / eq;
        out.push_back(make("pgf/derivative-at-1/" + name, eq, deriv, rel, 1e-4, rel <= 1e-4));

        std::vector<double> g;
        for (int i = 0; i <= 10; ++i) g.push_back(queue_length_pgf(am, i / 10.0));
        double worst_shape = 0.0;
        for (std::size_t i = 1; i < g.size(); ++i) worst_shape = std::max(worst_shape, g[i - 1] - g[i]);
        for (std::size_t i = 1; i + 1 < g.size(); ++i)
            worst_shape = std::max(worst_shape, -(g[i + 1] - 2.0 * g[i] + g[i - 1]));
        const bool ok = worst_shape <= 1e-9 && g.back() == 1.0 && std::abs(g.front() - (1.0 - rho)) < 1e-8;
        out.push_back(make("pgf/monotone-convex/" + name, 1.0 - rho, g.front(), worst_shape, 1e-9, ok));
    }

    // Empty fraction from a simulation against pgf(0) = 1 - rho.
    const auto seed = seed_for(o, "pgf/empty");
    auto c = stationary(ServiceDistribution::exponential(1.0), rho, scaled(2e5, o, 1e3), o, seed);
    const auto m = run(c);
    const double empty = m.queue_length_pmf.empty() ? kNaN : m.queue_length_pmf[0];
    Verdict w = make("pgf/empty-fraction", queue_length_pgf(mm1, 0.0), empty, std::abs(empty - (1.0 - rho)), kNaN, true,
                     {seed});
    w.outcome = Outcome::Informational;
    out.push_back(std::move(w));
    return out;
}

std::vector<Verdict> check_decay_rate(const Options& o) {
    std::vector<Verdict> out;
    for (const auto& [lambda, mu] : {std::pair{1.0, 4.0}, std::pair{1.0, 2.0}}) {
        const AnalyticModel am{lambda, ServiceDistribution::exponential(mu), std::nullopt};
        const auto r = decay_rate(am);
        const double want = std::pow(std::sqrt(mu) - std::sqrt(lambda), 2);
        std::ostringstream n;
        n << "decay-rate/mm1/lambda=" << lambda << ",mu=" << mu;
        Verdict v = make(n.str(), want, r.gamma, std::abs(r.gamma - want), 1e-6, std::abs(r.gamma - want) <= 1e-6);
        v.details["s_star"] = r.s_star;
        out.push_back(std::move(v));
        const double o0 = decay_objective(am, 0.0);
        out.push_back(make(n.str() + "/objective-at-0", 0.0, o0, std::abs(o0), 0.0, o0 == 0.0));
    }

    // Truncated rates increase to the full rate for light tails.
    {
        const AnalyticModel am{1.0, ServiceDistribution::exponential(2.0), std::nullopt};
        const double full = decay_rate(am).gamma;
        std::vector<double> gaps;
        for (double x : {1.0, 2.0, 4.0, 8.0, 16.0}) gaps.push_back(std::abs(cond_decay_rate(am, x).gamma - full));
        bool shrinking = true;
        for (std::size_t i = 1; i < gaps.size(); ++i) shrinking = shrinking && gaps[i] <= gaps[i - 1];
        Verdict v = make("decay-rate/truncated-converges", full, full - gaps.back(), gaps.back(), 1e-6,
                         shrinking && gaps.back() <= 1e-6);
        v.details["gaps"] = gaps;
        out.push_back(std::move(v));
    }
    {
        const AnalyticModel am{0.5, ServiceDistribution::deterministic(1.0), std::nullopt};
        const double full = decay_rate(am).gamma, cut = cond_decay_rate(am, 2.0).gamma;
        out.push_back(make("decay-rate/deterministic-truncation-identity", full, cut, std::abs(full - cut), 1e-9,
                           std::abs(full - cut) <= 1e-9));
    }
    {
        const auto am = AnalyticModel::at_load(ServiceDistribution::pareto(1.0, 2.5), 0.5);
        bool rejected = false;
        try {
            (void)decay_rate(am);
        } catch (const DomainError&) {
            rejected = true;
        }
        const double g = cond_decay_rate(am, 10.0).gamma;
        out.push_back(make("decay-rate/pareto-untruncated-rejected", kNaN, kNaN, rejected ? 1.0 : 0.0, 1.0, rejected));
        out.push_back(make("decay-rate/pareto-truncated-finite", kNaN, g, g, kNaN, std::isfinite(g) && g > 0.0));
    }

    // Empirical tail slope of FB sojourns in M/M/1; a large-deviation rate is
    // only approached slowly, so this is reported, not judged.
    {
        const auto seed = seed_for(o, "decay/sim");
        auto c = stationary(ServiceDistribution::exponential(2.0), 0.5, scaled(1e6, o, 1e3), o, seed);
        c.keep_sojourns = true;
        const auto m = run(c);
        auto v = m.sojourns;
        std::sort(v.begin(), v.end());
        const auto q = [&](double p) { return v[static_cast<std::size_t>(p * static_cast<double>(v.size() - 1))]; };
        const double x1 = q(0.99), x2 = q(0.9999);
        const double slope = (std::log(0.01) - std::log(1e-4)) / (x2 - x1);
        const double gamma = decay_rate(AnalyticModel::from(c.model)).gamma;
        Verdict w = make("decay-rate/empirical-sojourn-slope", gamma, slope, slope / gamma, kNaN, true, {seed});
        w.outcome = Outcome::Informational;
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<Verdict> check_analytic_bounds(const Options&) {
    std::vector<Verdict> out;
    enum class Hz { DFR, IFR, Det, Other };
    const std::vector<std::pair<ServiceDistribution, Hz>> laws = {
        {ServiceDistribution::exponential(1.0), Hz::Other},
        {ServiceDistribution::deterministic(1.0), Hz::Det},
        {ServiceDistribution::hyperexponential({0.9, 0.1}, {2.0, 2.0 / 11.0}), Hz::DFR},
        {ServiceDistribution::weibull(1.0, 0.5), Hz::DFR},
        // Zero hazard below the scale, so not DFR on [0, inf) despite a
        // log-convex density on its support.
        {ServiceDistribution::pareto(1.0, 2.5), Hz::Other},
        {ServiceDistribution::uniform(0.0, 1.0), Hz::IFR},
        {ServiceDistribution::gamma(2.0, 1.0), Hz::IFR},
    };
    for (const auto& [d, hz] : laws) {
        for (double rho : {0.3, 0.7, 0.9}) {
            const auto am = AnalyticModel::at_load(d, rho);
            const std::string name = label(d, rho);
            const double eq = mean_queue_length(am);
            const double lo = -std::log1p(-rho), hi = det_bound(rho), mm1 = rho / (1.0 - rho);
            const double slack = 1e-9 * hi;
            bool ok = eq >= lo - slack && eq <= hi + slack;
            if (hz == Hz::Det) ok = ok && std::abs(eq - hi) <= slack;
            if (hz == Hz::DFR) ok = ok && eq <= mm1 + slack;
            if (hz == Hz::IFR) ok = ok && eq >= mm1 - slack;
            Verdict v = make("analytic-bounds/EQ-sandwich/" + name, hi, eq, eq, hi, ok);
            v.details["lower"] = lo;
            v.details["exponential"] = mm1;
            out.push_back(std::move(v));
        }

        const double rho = 0.7;
        const auto am = AnalyticModel::at_load(d, rho);
        const std::string name = label(d, rho);
        const double cap = (2.0 - rho) / (2.0 * (1.0 - rho) * (1.0 - rho));
        double worst = -kInf;
        bool above_x = true;
        for (double x : quantile_grid(d, 0.01, 0.999, 50)) {
            const double ev = mean_cond_sojourn(am, x);
            above_x = above_x && ev >= x;
            worst = std::max(worst, ev / (cap * x) - 1.0);
        }
        const bool eq_case = hz == Hz::Det;
        const bool ok = above_x && (eq_case ? std::abs(worst) <= 1e-12 : worst < 0.0);
        out.push_back(make("analytic-bounds/EV-range/" + name, cap, worst, worst, 0.0, ok));

        // Slope of E V at q0.999 against its limit; judged at rho = 0.5, where
        // the check was calibrated, and only reported at 0.7.
        if (d.has_density()) {
            for (double r : {0.5, 0.7}) {
                const auto ar = AnalyticModel::at_load(d, r);
                const double x = d.quantile(0.999);
                const double h = 1e-4 * x;
                const double deriv = (mean_cond_sojourn(ar, x + h) - mean_cond_sojourn(ar, x - h)) / (2.0 * h);
                const double lim = 1.0 / (1.0 - r);
                const double rel = std::abs(deriv / lim - 1.0);
                Verdict v = make("analytic-bounds/EV-derivative/" + label(d, r), lim, deriv, rel, 0.05, rel <= 0.05);
                if (r != 0.5) v.outcome = Outcome::Informational;
                out.push_back(std::move(v));
            }
        }
    }

    // Transform moments.
    for (const auto& d : {ServiceDistribution::exponential(1.0), ServiceDistribution::pareto(1.0, 2.5)}) {
        const auto am = AnalyticModel::at_load(d, 0.5);
        const std::string name = label(d, 0.5);
        double worst = 0.0;
        for (double p : {0.1, 0.5, 0.9}) {
            const double x = d.quantile(p);
            const auto m1 = cond_sojourn_moment(am, x, 1);
            worst = std::max(worst, std::abs(m1.value / mean_cond_sojourn(am, x) - 1.0));
        }
        out.push_back(make("analytic-bounds/lst-first-moment/" + name, 0.0, worst, worst, 1e-6, worst <= 1e-6));
    }
    {
        const auto d = ServiceDistribution::pareto(1.0, 2.5);
        const auto am = AnalyticModel::at_load(d, 0.5);
        for (int n : {1, 2, 3}) {
            std::vector<double> ratios;
            for (double p : {0.9, 0.99, 0.999}) {
                const double x = d.quantile(p);
                const double lead = std::pow(x / (1.0 - rho_x(am, x)), n);
                ratios.push_back(cond_sojourn_moment(am, x, n).value / lead);
            }
            bool toward = true;
            for (std::size_t i = 1; i < ratios.size(); ++i)
                toward = toward && std::abs(ratios[i] - 1.0) < std::abs(ratios[i - 1] - 1.0);
            const double last = std::abs(ratios.back() - 1.0);
            // Only the first moment is close at q0.999; higher ones are a trend check.
            const bool ok = toward && (n == 1 ? last <= 0.15 : true);
            Verdict v = make("analytic-bounds/moment-asymptotics/n=" + std::to_string(n), 1.0, ratios.back(), last,
                             n == 1 ? 0.15 : kNaN, ok);
            v.details["ratios_q90_q99_q999"] = ratios;
            out.push_back(std::move(v));
        }
    }

    // Hazard classes of the laws used as DFR / IFR representatives.
    for (const auto& [d, hz] : laws) {
        if (hz != Hz::DFR && hz != Hz::IFR) continue;
        const auto c = classify(d);
        const bool dfr = c.classification == HazardClassification::DFR ||
                         c.classification == HazardClassification::LogConvexDensity;
        const bool ifr = c.classification == HazardClassification::IFR ||
                         c.classification == HazardClassification::LogConcaveDensity;
        Verdict v = make("analytic-bounds/hazard-class/" + d.name(), kNaN, kNaN, kNaN, kNaN, hz == Hz::DFR ? dfr : ifr);
        v.details["class"] = to_string(c.classification);
        out.push_back(std::move(v));
    }
    return out;
}

const std::map<std::string, Suite>& suites() {
    static const std::map<std::string, Suite> s = {
        {"mean-formulas", check_mean_formulas},
        {"stochastic-order", check_stochastic_order},
        {"max-queue", check_max_queue},
        {"tail-equivalence", check_tail_equivalence},
        {"heavy-traffic", check_heavy_traffic},
        {"ht-exponential-limit", check_ht_exponential_limit},
        {"truncation-cohorts", check_truncation_and_cohorts},
        {"slowdown", check_slowdown},
        {"overload", check_overload},
        {"pgf", check_pgf},
        {"decay-rate", check_decay_rate},
        {"analytic-bounds", check_analytic_bounds},
    };
    return s;
}

std::vector<Verdict> run_suite(const std::string& name, const Options& o) {
    if (name == "all") {
        std::vector<Verdict> all;
        for (const auto& [n, f] : suites()) {
            auto v = f(o);
            all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
        }
        return all;
    }
    const auto it = suites().find(name);
    if (it == suites().end()) throw ConfigError("unknown validation suite '" + name + "'");
    return it->second(o);
}

namespace {
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
}  // namespace

json to_json(const Verdict& v) {
    return {{"experiment", v.experiment},
            {"analytic", number(v.analytic)},
            {"empirical", number(v.empirical)},
            {"ci_lo", number(v.ci_lo)},
            {"ci_hi", number(v.ci_hi)},
            {"statistic", number(v.statistic)},
            {"tolerance", number(v.tolerance)},
            {"outcome", to_string(v.outcome)},
            {"pass", v.passed()},
            {"seeds", v.seeds},
            {"details", v.details}};
}

json to_json(const std::vector<Verdict>& vs) {
    json a = json::array();
    for (const auto& v : vs) a.push_back(to_json(v));
    return a;
}

std::string to_csv(const std::vector<Verdict>& vs) {
    std::ostringstream s;
    s << std::setprecision(12);
    auto cell = [&](double x) {
        if (std::isfinite(x)) s << x;
    };
    s << "experiment,value,ci_lo,ci_hi,analytic,pass\n";
    for (const auto& v : vs) {
        if (v.experiment.find_first_of(",\"") != std::string::npos) {
            s << '"';
            for (char ch : v.experiment) s << (ch == '"' ? "\"\"" : std::string(1, ch));
            s << "\",";
        } else {
            s << v.experiment << ',';
        }
        cell(v.empirical);
        s << ',';
        cell(v.ci_lo);
        s << ',';
        cell(v.ci_hi);
        s << ',';
        cell(v.analytic);
        s << ',' << (v.passed() ? "true" : "false") << '\n';
    }
    return s.str();
}

bool all_passed(const std::vector<Verdict>& vs) {
    return std::all_of(vs.begin(), vs.end(), [](const Verdict& v) { return v.passed(); });
}

}  // namespace fbq::validation
