#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fbq/analytic.hpp"
#include "fbq/dists.hpp"
#include "fbq/engine.hpp"
#include "fbq/schedulers.hpp"

namespace fbq::io {

inline constexpr const char* kToolVersion = "0.3.0";

/// Parameters for `analytic` quantities that take arguments.
struct AnalyticParams {
    std::vector<double> x;              // sizes; default: service quantiles 0.5, 0.9, 0.99
    std::vector<double> z = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> s = {0.5, 1.0};  // transform arguments
    std::uint64_t n_max = 10;            // Borel / geometric bound terms
    double t = 1e6;                      // time for the overflow-time bound
};

struct ScanParams {
    std::vector<double> rhos;  // default: heavy-traffic grid
    Compensator compensator;
    std::size_t points = 200;
    double p_lo = 1e-3;
    double p_hi = 0.9999;
};

struct OutputPaths {
    std::string metrics = "metrics.json";
    std::string trace = "trace.csv";
    std::string analytic = "analytic.json";
    std::string scan = "scan.csv";
};

struct RunConfig {
    SimConfig sim;
    AnalyticParams analytic;
    ScanParams scan;
    OutputPaths outputs;
    nlohmann::json effective;  // the parsed document after CLI overrides; hashed into outputs
};

/// Parses and schema-checks a run config. Every object rejects unknown keys.
/// Errors are ConfigError with a "source:line: path: message" prefix.
RunConfig parse_run_config(std::string_view text, const std::string& source,
                           const nlohmann::json& overrides = nlohmann::json::object());

/// 1-based line of the value at `pointer` in `text`; 0 when absent.
std::size_t locate(std::string_view text, const nlohmann::json::json_pointer& pointer);

/// {"kind": ..., "params": {...}}; throws ConfigError without location.
ServiceDistribution parse_distribution(const nlohmann::json& j);
Discipline parse_discipline(const nlohmann::json& j);
nlohmann::json to_json(const ServiceDistribution& d);
nlohmann::json to_json(const Discipline& d);

/// FNV-1a 64 of the compact dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& effective);

nlohmann::json to_json(const stats::Estimate& e);
nlohmann::json metrics_to_json(const SimulationMetrics& m);

const std::vector<std::string>& analytic_quantity_names();

/// One entry per requested quantity. A quantity that cannot be evaluated for
/// this model is reported as {"error": ..., "error_kind": ...}; its name is
/// appended to `failed` when given.
nlohmann::json analytic_report(const AnalyticModel& m, const AnalyticParams& p,
                               const std::vector<std::string>& quantities,
                               std::vector<std::string>* failed = nullptr);

/// Adds tool_version, config_hash and (unless suppressed) generated_at.
void stamp(nlohmann::json& doc, const std::string& hash, bool timestamp);
/// Footer line for CSV outputs.
std::string csv_footer(const std::string& hash);

}  // namespace fbq::io
