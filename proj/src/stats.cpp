#include "fbq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "fbq/errors.hpp"

namespace fbq::stats {

double t_quantile(double p, double dof) {
    if (!(dof > 0.0) || !std::isfinite(dof)) return normal_quantile(p);
    return boost::math::quantile(boost::math::students_t(dof), p);
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double chi_square_sf(double statistic, double dof) {
    if (!(dof > 0.0)) return 1.0;
    if (statistic <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

double Estimate::half_width(double level) const {
    if (std_error == 0.0) return 0.0;
    return t_quantile(0.5 + 0.5 * level, dof) * std_error;
}

std::pair<double, double> Estimate::ci(double level) const {
    const double h = half_width(level);
    return {value - h, value + h};
}

bool Estimate::covers(double x, double level) const {
    const auto [lo, hi] = ci(level);
    return lo <= x && x <= hi;
}

Estimate ratio_estimate(std::span<const double> sums, std::span<const double> counts) {
    Estimate e;
    const std::size_t b = std::min(sums.size(), counts.size());
    double sy = 0.0, sn = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        sy += sums[i];
        sn += counts[i];
    }
    e.count = static_cast<std::uint64_t>(std::llround(sn));
    if (!(sn > 0.0)) {
        e.value = std::numeric_limits<double>::quiet_NaN();
        e.std_error = std::numeric_limits<double>::infinity();
        return e;
    }
    e.value = sy / sn;
    if (b < 2) {
        e.std_error = std::numeric_limits<double>::infinity();
        return e;
    }
    const double nbar = sn / static_cast<double>(b);
    double ss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double r = sums[i] - e.value * counts[i];
        ss += r * r;
    }
    const double bd = static_cast<double>(b);
    e.std_error = std::sqrt(ss / (bd * (bd - 1.0))) / nbar;
    e.dof = bd - 1.0;
    return e;
}

Estimate mean_estimate(std::span<const double> values) {
    Estimate e;
    const std::size_t n = values.size();
    e.count = n;
    if (n == 0) {
        e.value = std::numeric_limits<double>::quiet_NaN();
        e.std_error = std::numeric_limits<double>::infinity();
        return e;
    }
    double s = 0.0;
    for (double v : values) s += v;
    e.value = s / static_cast<double>(n);
    if (n < 2) {
        e.std_error = std::numeric_limits<double>::infinity();
        return e;
    }
    double ss = 0.0;
    for (double v : values) ss += (v - e.value) * (v - e.value);
    e.std_error = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    e.dof = static_cast<double>(n - 1);
    return e;
}

ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected_probs,
                               double min_expected, int fitted_params) {
    if (observed.size() != expected_probs.size()) throw DomainError("chi_square_gof: size mismatch");
    double total = 0.0;
    for (double o : observed) total += o;
    ChiSquareResult r;
    if (!(total > 0.0)) return r;

    std::vector<double> obs, expd;
    double acc_o = 0.0, acc_e = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        acc_o += observed[i];
        acc_e += expected_probs[i] * total;
        if (acc_e >= min_expected) {
            obs.push_back(acc_o);
            expd.push_back(acc_e);
            acc_o = acc_e = 0.0;
        }
    }
    // Remainder (including mass beyond the listed cells) joins the last cell.
    double listed = 0.0;
    for (double e : expd) listed += e;
    const double rest_e = total - listed;
    const double rest_o = acc_o;
    if (expd.empty()) {
        obs.push_back(rest_o);
        expd.push_back(std::max(rest_e, 0.0));
    } else if (rest_e >= min_expected) {
        obs.push_back(rest_o);
        expd.push_back(rest_e);
    } else {
        obs.back() += rest_o;
        expd.back() += std::max(rest_e, 0.0);
    }
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (expd[i] > 0.0) r.statistic += (obs[i] - expd[i]) * (obs[i] - expd[i]) / expd[i];
    }
    r.cells = obs.size();
    r.dof = static_cast<double>(static_cast<int>(obs.size()) - 1 - fitted_params);
    r.p_value = chi_square_sf(r.statistic, r.dof);
    return r;
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::max(static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n));
    }
    return d;
}

double poisson_pmf(std::uint64_t k, double mean) {
    if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
    const double kd = static_cast<double>(k);
    return std::exp(kd * std::log(mean) - mean - std::lgamma(kd + 1.0));
}

}  // namespace fbq::stats
