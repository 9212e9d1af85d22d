#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fbq/dists.hpp"
#include "fbq/schedulers.hpp"
#include "fbq/stats.hpp"

namespace fbq {

/// Arrival process, service law and discipline of a single-server queue.
/// Arrivals are Poisson(arrival_rate) unless `interarrival` is set, in which
/// case they form a renewal process and arrival_rate must equal 1/E[A].
struct QueueModel {
    double arrival_rate = 0.0;
    ServiceDistribution service = ServiceDistribution::exponential(1.0);
    std::optional<ServiceDistribution> interarrival;
    Discipline discipline = discipline::FB{};

    double load() const { return arrival_rate * service.mean(); }
    bool poisson() const { return !interarrival.has_value(); }
};

enum class HorizonKind { Jobs, Time };

struct Horizon {
    HorizonKind kind = HorizonKind::Jobs;
    double value = 1e5;
};

struct InitialJob {
    double size;
    double age = 0.0;
};

struct TraceRecord {
    double time;
    const char* event_kind;  // arrival, departure, merge, quantum
    std::uint64_t job_id;
    std::size_t queue_length_after;
    double youngest_age;  // NaN when the system is empty
};

using TraceSink = std::function<void(const TraceRecord&)>;

struct SimConfig {
    QueueModel model;
    Horizon horizon;
    double warmup = 0.1;  // fraction of the horizon discarded
    std::uint64_t seed = 1;
    std::uint32_t replications = 1;
    std::uint32_t threads = 1;
    std::uint32_t batches = 20;  // batch-means batches per replication

    std::vector<double> probe_sizes;
    double probe_fraction = 1e-3;  // total thinning probability over all probe sizes

    bool allow_overload = false;
    bool keep_jobs = false;
    bool keep_sojourns = false;
    bool keep_busy_periods = true;
    double census_interval = 0.0;        // 0 disables cohort census
    double queue_sample_interval = 0.0;  // 0 disables (time, Q) sampling
    std::vector<double> max_queue_times;
    std::vector<InitialJob> initial_jobs;

    TraceSink trace;  // only honoured for replication 0
};

struct JobRecord {
    std::uint64_t id;
    double arrival;
    double size;
    double initial_age;
    std::optional<double> departure;
    double attained;
    bool probe;
};

struct BusyPeriod {
    double start;
    double length;
    std::uint64_t max_queue;
    std::uint64_t jobs;
    std::uint64_t departure_instants;
};

struct CensusSnapshot {
    double time;
    std::size_t queue_length;
    std::vector<std::pair<double, std::uint32_t>> cohorts;  // (age, multiplicity), oldest first
};

struct ProbeEstimate {
    double size;
    stats::Estimate sojourn;
};

struct SimulationMetrics {
    std::uint32_t replications = 0;
    bool overload = false;  // stationary estimators suppressed

    double measured_time = 0.0;
    std::uint64_t measured_jobs = 0;
    std::uint64_t measured_departures = 0;

    stats::Estimate time_avg_queue_length;
    stats::Estimate mean_sojourn;       // ordinary (non-probe) jobs
    stats::Estimate throughput;         // lambda_eff, all measured arrivals
    stats::Estimate little_residual;    // E Q - lambda_eff E V over all measured jobs
    stats::Estimate little_queue_length;  // lambda_eff E V over all measured jobs
    std::vector<double> queue_length_pmf;  // time-weighted over the window
    std::vector<ProbeEstimate> probes;

    std::vector<BusyPeriod> busy_periods;  // complete periods starting in the window
    std::vector<std::pair<double, std::uint64_t>> max_queue_at;  // (t, M(t)) of replication 0
    std::vector<CensusSnapshot> census;
    std::vector<std::pair<double, std::size_t>> queue_samples;
    double work_conservation_error = 0.0;  // max relative error over busy periods

    std::vector<JobRecord> jobs;   // replication 0, when keep_jobs
    std::vector<double> sojourns;  // measured ordinary jobs, when keep_sojourns
    std::size_t final_queue_length = 0;
    double end_time = 0.0;
};

/// Simulate the configured queue; replications are merged in index order.
SimulationMetrics run(const SimConfig& config);

/// Jobs with arrival times and sizes for a fixed-input experiment.
std::vector<Job> make_trace(const QueueModel& model, std::size_t jobs, std::uint64_t seed);

/// Departure time of every job (indexed like `jobs`, which must be sorted by
/// arrival). Jobs still present at `until` get NaN.
std::vector<double> simulate_trace(const std::vector<Job>& jobs, const Discipline& d,
                                   const TraceSink& trace = {},
                                   double until = std::numeric_limits<double>::infinity());

/// Number of jobs present at time t (state after all events at t).
std::size_t queue_length_at(const std::vector<Job>& jobs, const Discipline& d, double t);

struct CoupledSojourns {
    double full;
    double truncated;
};

/// Sojourn of jobs[tagged] under FB, in the original system and in the system
/// where every size y is replaced by min(y, x). jobs[tagged].size must be x.
CoupledSojourns coupled_truncation_run(const std::vector<Job>& jobs, std::size_t tagged, double x);

/// Probe estimate of E V(x). Requires Poisson arrivals and rho(x) < 1.
ProbeEstimate probe_conditional_sojourn(const SimConfig& config, double x);

struct TransientResult {
    double t;
    std::uint64_t replications;
    std::vector<Discipline> disciplines;
    std::vector<std::vector<std::uint64_t>> counts;   // [discipline][queue length]
    std::vector<std::vector<std::uint32_t>> samples;  // [discipline][replication]

    std::vector<double> pmf(std::size_t discipline) const;
    std::vector<double> cdf(std::size_t discipline) const;
};

/// Empirical law of Q(t) from independent replications started empty. All
/// disciplines see the same arrival epochs and sizes in each replication.
TransientResult transient_queue_cdf(const QueueModel& model, double t, std::uint64_t replications,
                                    std::uint64_t seed, const std::vector<Discipline>& disciplines);

struct OverloadResult {
    std::vector<double> bucket_edges;  // size deciles, 11 entries (0 and x_F/inf)
    std::vector<std::uint64_t> arrived;
    std::vector<std::uint64_t> departed;
    double growth_rate;  // least-squares slope of Q(t) over the second half
    double horizon;

    std::vector<double> departure_fraction() const;
};

/// Overloaded run over a time horizon. Jobs arriving in the first half are
/// bucketed by size decile.
OverloadResult overload_run(const SimConfig& config);

}  // namespace fbq
