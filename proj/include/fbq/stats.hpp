#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace fbq::stats {

/// Point estimate with a standard error on `dof` degrees of freedom
/// (batch means: dof = batches - 1).
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
    double dof = 0.0;
    std::uint64_t count = 0;  // underlying observations

    double half_width(double level = 0.95) const;
    std::pair<double, double> ci(double level = 0.95) const;
    bool covers(double x, double level = 0.95) const;
};

/// Ratio estimator sum(y)/sum(n) over batches, SE by the delta method.
Estimate ratio_estimate(std::span<const double> sums, std::span<const double> counts);

/// Plain mean of iid values with t-based SE.
Estimate mean_estimate(std::span<const double> values);

double t_quantile(double p, double dof);
double normal_quantile(double p);
double chi_square_sf(double statistic, double dof);

struct ChiSquareResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    std::size_t cells = 0;
};

/// Pearson chi-square goodness of fit. Adjacent cells (in order) are pooled
/// until each expected count is at least `min_expected`; the last pooled
/// cell absorbs the remainder of the expected mass.
ChiSquareResult chi_square_gof(std::span<const double> observed, std::span<const double> expected_probs,
                               double min_expected = 5.0, int fitted_params = 0);

/// sup |F_n - F| for a sample against a continuous CDF.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);

double poisson_pmf(std::uint64_t k, double mean);

}  // namespace fbq::stats
