#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace fbq::validation {

enum class Outcome { Pass, Fail, Inconclusive, Informational };

std::string to_string(Outcome o);

/// One analytic-vs-empirical comparison. `statistic` is compared against
/// `tolerance` in the direction documented by the experiment; NaN fields mean
/// "not applicable" (e.g. purely analytic checks have no CI).
struct Verdict {
    std::string experiment;
    double analytic;
    double empirical;
    double ci_lo;
    double ci_hi;
    double statistic;
    double tolerance;
    Outcome outcome;
    std::vector<std::uint64_t> seeds;
    nlohmann::json details = nlohmann::json::object();

    bool passed() const { return outcome == Outcome::Pass || outcome == Outcome::Informational; }
};

struct Options {
    std::uint64_t seed = 20240611;
    /// Scales every simulation budget. Values below 1 fall under the sizes the
    /// experiments are calibrated for and are meant for smoke runs only.
    double effort = 1.0;
    unsigned threads = 1;
};

// Simulation-backed experiments.
std::vector<Verdict> check_mean_formulas(const Options& o);
std::vector<Verdict> check_stochastic_order(const Options& o);
std::vector<Verdict> check_max_queue(const Options& o);
std::vector<Verdict> check_tail_equivalence(const Options& o);
std::vector<Verdict> check_ht_exponential_limit(const Options& o);
std::vector<Verdict> check_truncation_and_cohorts(const Options& o);
std::vector<Verdict> check_overload(const Options& o);

// Analytic-only experiments (Options only supply seeds for small side runs).
std::vector<Verdict> check_heavy_traffic(const Options& o);
std::vector<Verdict> check_slowdown(const Options& o);
std::vector<Verdict> check_pgf(const Options& o);
std::vector<Verdict> check_decay_rate(const Options& o);
std::vector<Verdict> check_analytic_bounds(const Options& o);

using Suite = std::function<std::vector<Verdict>(const Options&)>;

/// Suite name -> experiment runner, in a fixed order.
const std::map<std::string, Suite>& suites();
/// Runs one suite or, for "all", every suite. Throws ConfigError for unknown names.
std::vector<Verdict> run_suite(const std::string& name, const Options& o);

nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const std::vector<Verdict>& vs);
/// experiment,value,ci_lo,ci_hi,analytic,pass
std::string to_csv(const std::vector<Verdict>& vs);

bool all_passed(const std::vector<Verdict>& vs);

}  // namespace fbq::validation
