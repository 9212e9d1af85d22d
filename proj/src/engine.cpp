#include "fbq/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <limits>

#include "fbq/analytic.hpp"
#include "fbq/errors.hpp"

namespace fbq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Internal events this close after an arrival are still processed first.
constexpr double kTieWindow = 1e-12;

const char* event_name(InternalEventKind k) {
    switch (k) {
        case InternalEventKind::Departure: return "departure";
        case InternalEventKind::Merge: return "merge";
        case InternalEventKind::QuantumExpiry: return "quantum";
        default: return "none";
    }
}

/// Arrival epochs and sizes. Per arrival the stream is consumed as:
/// interarrival, size, then one uniform for probe thinning when probes exist.
class ArrivalSource {
public:
    ArrivalSource(const QueueModel& m, RngStream& rng, const std::vector<double>& probes, double fraction)
        : m_(m), rng_(rng), probes_(probes), fraction_(fraction) {}

    Job next(std::uint64_t id) {
        double gap;
        if (m_.interarrival) {
            gap = m_.interarrival->sample(rng_);
        } else if (m_.arrival_rate > 0.0) {
            gap = rng_.exponential(m_.arrival_rate);
        } else {
            gap = kInf;
        }
        t_ += gap;
        Job j;
        j.id = id;
        j.arrival = t_;
        j.size = m_.service.sample(rng_);
        if (!probes_.empty()) {
            const double u = rng_.uniform();
            if (u < fraction_) {
                const auto k = probes_.size();
                const auto idx = std::min<std::size_t>(k - 1, static_cast<std::size_t>(u / fraction_ * k));
                j.size = probes_[idx];
                j.probe = static_cast<std::int32_t>(idx);
            }
        }
        if (!(j.size > 0.0)) throw DomainError("service distribution produced a nonpositive size");
        return j;
    }

private:
    const QueueModel& m_;
    RngStream& rng_;
    const std::vector<double>& probes_;
    double fraction_;
    double t_ = 0.0;
};

std::vector<std::pair<double, std::uint32_t>> census_of(const Scheduler& s) {
    std::vector<std::pair<double, std::uint32_t>> out;
    if (const auto* fb = dynamic_cast<const FbScheduler*>(&s)) {
        for (const auto& c : fb->cohorts())
            out.emplace_back(c.age, static_cast<std::uint32_t>(c.members.size()));
        return out;
    }
    auto ages = s.attained();
    std::sort(ages.begin(), ages.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (const auto& [id, age] : ages) {
        if (!out.empty() && std::abs(out.back().first - age) <= kAgeTolerance * std::max(1.0, age)) {
            ++out.back().second;
        } else {
            out.emplace_back(age, 1u);
        }
    }
    return out;
}

struct RepResult {
    std::vector<double> area, duration, arrivals;
    std::vector<double> soj_sum, soj_n, all_sum, all_n;
    std::vector<std::vector<double>> probe_sum, probe_n;
    std::vector<double> pmf;
    std::vector<BusyPeriod> busy;
    std::vector<std::pair<double, std::uint64_t>> max_queue_at;
    std::vector<CensusSnapshot> census;
    std::vector<std::pair<double, std::size_t>> samples;
    std::vector<JobRecord> jobs;
    std::vector<double> sojourns;
    double wc_error = 0.0;
    double measured_time = 0.0;
    std::uint64_t measured_jobs = 0;
    std::uint64_t measured_departures = 0;
    std::size_t final_queue = 0;
    double end_time = 0.0;
};

class Replication {
public:
    Replication(const SimConfig& cfg, std::uint32_t index, bool overload)
        : cfg_(cfg),
          rng_(RngStream::derive(cfg.seed, index)),
          source_(cfg.model, rng_, cfg.probe_sizes, cfg.probe_fraction),
          sched_(make_scheduler(cfg.model.discipline)),
          overload_(overload),
          trace_(index == 0 ? cfg.trace : TraceSink{}),
          first_(index == 0) {
        const std::size_t b = std::max<std::uint32_t>(1, cfg.batches);
        r_.area.assign(b, 0.0);
        r_.duration.assign(b, 0.0);
        r_.arrivals.assign(b, 0.0);
        r_.soj_sum.assign(b, 0.0);
        r_.soj_n.assign(b, 0.0);
        r_.all_sum.assign(b, 0.0);
        r_.all_n.assign(b, 0.0);
        r_.probe_sum.assign(cfg.probe_sizes.size(), std::vector<double>(b, 0.0));
        r_.probe_n.assign(cfg.probe_sizes.size(), std::vector<double>(b, 0.0));
        maxq_times_ = cfg.max_queue_times;
        std::sort(maxq_times_.begin(), maxq_times_.end());
    }

    RepResult run() {
        setup_horizon();
        for (const auto& ij : cfg_.initial_jobs) {
            Job j;
            j.id = next_id_++;
            j.arrival = 0.0;
            j.size = ij.size;
            j.initial_age = ij.age;
            if (!(j.size > ij.age) || ij.age < 0.0) throw DomainError("initial job needs 0 <= age < size");
            arrive(j, /*horizon_job=*/false);
        }
        pull_arrival();

        for (;;) {
            const InternalEvent ev = sched_->next_event();
            const double t_int = ev.kind == InternalEventKind::None ? kInf : now_ + ev.wall_time;
            const double t_arr = pending_ ? pending_->arrival : kInf;
            const double t_obs = next_observation();
            const bool internal_first = ev.kind != InternalEventKind::None && ev.wall_time <= (t_arr - now_) + kTieWindow;
            const double t_evt = internal_first ? t_int : t_arr;

            if (t_obs <= t_evt && std::isfinite(t_obs)) {
                advance_to(t_obs);
                observe();
                if (stop_) break;
                continue;
            }
            if (!std::isfinite(t_evt)) break;

            if (internal_first) {
                advance_by(ev.wall_time);
                fire(ev.kind);
            } else {
                advance_to(std::max(now_, t_arr));
                Job j = *pending_;
                pending_.reset();
                arrive(j, true);
                pull_arrival();
            }
            if (done()) break;
        }
        finish();
        return std::move(r_);
    }

private:
    void setup_horizon() {
        const double w = cfg_.warmup;
        if (cfg_.horizon.kind == HorizonKind::Time) {
            const double T = cfg_.horizon.value;
            t_warm_ = w * T;
            t_end_ = T;
            const std::size_t b = r_.area.size();
            for (std::size_t i = 0; i <= b; ++i)
                boundaries_.push_back(t_warm_ + (t_end_ - t_warm_) * static_cast<double>(i) / static_cast<double>(b));
        } else {
            const auto n = static_cast<std::uint64_t>(cfg_.horizon.value);
            const auto first = static_cast<std::uint64_t>(std::ceil(w * static_cast<double>(n)));
            const std::size_t b = r_.area.size();
            for (std::size_t i = 0; i <= b; ++i)
                boundary_jobs_.push_back(first + (n - first) * i / b);
            if (first == 0) {
                t_warm_ = 0.0;
                boundaries_.push_back(0.0);
                boundary_jobs_.pop_front();
            }
        }
    }

    void pull_arrival() {
        if (overload_ && window_closed_) return;
        Job j = source_.next(next_id_++);
        if (!std::isfinite(j.arrival)) return;
        const std::uint64_t horizon_index = horizon_counter_++;
        while (!boundary_jobs_.empty() && boundary_jobs_.front() == horizon_index) {
            boundaries_.push_back(j.arrival);
            boundary_jobs_.pop_front();
        }
        pending_ = j;
    }

    double next_observation() const {
        double t = kInf;
        if (!boundaries_.empty()) t = boundaries_.front();
        if (in_window_) {
            t = std::min(t, next_census_);
            t = std::min(t, next_sample_);
        }
        if (maxq_index_ < maxq_times_.size() && first_) t = std::min(t, maxq_times_[maxq_index_]);
        return t;
    }

    void observe() {
        if (!boundaries_.empty() && boundaries_.front() <= now_) {
            boundaries_.pop_front();
            ++boundaries_seen_;
            const std::size_t b = r_.area.size();
            if (boundaries_seen_ == 1) {
                in_window_ = true;
                t_warm_ = now_;
                batch_ = 0;
                if (cfg_.census_interval > 0.0) next_census_ = now_ + cfg_.census_interval;
                if (cfg_.queue_sample_interval > 0.0) next_sample_ = now_;
            } else if (boundaries_seen_ <= b) {
                batch_ = boundaries_seen_ - 1;
            } else {
                in_window_ = false;
                window_closed_ = true;
                t_end_ = now_;
                if (overload_) stop_ = true;
                next_census_ = next_sample_ = kInf;
            }
            return;
        }
        if (first_ && maxq_index_ < maxq_times_.size() && maxq_times_[maxq_index_] <= now_) {
            r_.max_queue_at.emplace_back(maxq_times_[maxq_index_], running_max_);
            ++maxq_index_;
            return;
        }
        if (in_window_ && next_census_ <= now_) {
            r_.census.push_back(CensusSnapshot{now_, sched_->size(), census_of(*sched_)});
            next_census_ += cfg_.census_interval;
            return;
        }
        if (in_window_ && next_sample_ <= now_) {
            r_.samples.emplace_back(now_, sched_->size());
            next_sample_ += cfg_.queue_sample_interval;
        }
    }

    void advance_to(double t) { advance_by(t - now_, t); }

    void advance_by(double dt, double target = kNaN) {
        if (dt > 0.0) {
            if (in_window_) {
                const std::size_t q = sched_->size();
                r_.area[batch_] += static_cast<double>(q) * dt;
                r_.duration[batch_] += dt;
                if (r_.pmf.size() <= q) r_.pmf.resize(q + 1, 0.0);
                r_.pmf[q] += dt;
            }
            if (sched_->size() > 0) bp_served_ += dt;
            sched_->advance(dt);
            now_ = std::isnan(target) ? now_ + dt : target;
        }
    }

    void arrive(const Job& in, bool horizon_job) {
        Job j = in;
        j.measured = horizon_job && in_window_;
        j.batch = static_cast<std::uint32_t>(batch_);
        if (j.measured) {
            ++r_.measured_jobs;
            ++outstanding_;
            r_.arrivals[batch_] += 1.0;
        }
        if (cfg_.keep_jobs && first_) {
            if (r_.jobs.size() <= j.id) r_.jobs.resize(j.id + 1);
            r_.jobs[j.id] = JobRecord{j.id, j.arrival, j.size, j.initial_age, std::nullopt, j.initial_age, j.probe >= 0};
        }
        const bool was_empty = sched_->size() == 0;
        sched_->admit(j);
        const std::uint64_t q = sched_->size();
        running_max_ = std::max(running_max_, q);
        if (was_empty) {
            bp_start_ = now_;
            bp_max_ = q;
            bp_jobs_ = 0;
            bp_work_ = 0.0;
            bp_deps_ = 0;
            bp_served_ = 0.0;
            bp_measured_ = in_window_;
        }
        ++bp_jobs_;
        bp_max_ = std::max(bp_max_, q);
        bp_work_ += j.size - j.initial_age;
        emit("arrival", j.id);
    }

    void fire(InternalEventKind kind) {
        departed_.clear();
        sched_->fire(departed_);
        if (departed_.empty()) {
            emit(event_name(kind), 0);
            return;
        }
        ++bp_deps_;
        for (const Job& j : departed_) {
            const double v = now_ - j.arrival;
            if (j.measured) {
                --outstanding_;
                ++r_.measured_departures;
                r_.all_sum[j.batch] += v;
                r_.all_n[j.batch] += 1.0;
                if (j.probe >= 0) {
                    r_.probe_sum[static_cast<std::size_t>(j.probe)][j.batch] += v;
                    r_.probe_n[static_cast<std::size_t>(j.probe)][j.batch] += 1.0;
                } else {
                    r_.soj_sum[j.batch] += v;
                    r_.soj_n[j.batch] += 1.0;
                    if (cfg_.keep_sojourns) r_.sojourns.push_back(v);
                }
            }
            if (cfg_.keep_jobs && first_ && j.id < r_.jobs.size()) {
                r_.jobs[j.id].departure = now_;
                r_.jobs[j.id].attained = j.size;
            }
            emit("departure", j.id);
        }
        if (sched_->size() == 0) close_busy_period();
    }

    void close_busy_period() {
        const double length = now_ - bp_start_;
        // Server time integrated over the period, so the check is not swamped
        // by the resolution of absolute clock values.
        if (bp_work_ > 0.0) r_.wc_error = std::max(r_.wc_error, std::abs(bp_served_ - bp_work_) / bp_work_);
        if (bp_measured_ && cfg_.keep_busy_periods)
            r_.busy.push_back(BusyPeriod{bp_start_, length, bp_max_, bp_jobs_, bp_deps_});
    }

    bool done() const {
        if (!window_closed_) return false;
        if (overload_) return true;
        if (outstanding_ > 0) return false;
        return sched_->size() == 0 || bp_start_ > t_end_;
    }

    void emit(const char* kind, std::uint64_t id) {
        if (trace_) trace_(TraceRecord{now_, kind, id, sched_->size(), sched_->youngest_age()});
    }

    void finish() {
        while (first_ && maxq_index_ < maxq_times_.size()) {
            r_.max_queue_at.emplace_back(maxq_times_[maxq_index_], running_max_);
            ++maxq_index_;
        }
        if (cfg_.keep_jobs && first_) {
            for (const auto& [id, age] : sched_->attained())
                if (id < r_.jobs.size()) r_.jobs[id].attained = age;
        }
        double mt = 0.0;
        for (double d : r_.duration) mt += d;
        r_.measured_time = mt;
        r_.final_queue = sched_->size();
        r_.end_time = now_;
    }

    const SimConfig& cfg_;
    RngStream rng_;
    ArrivalSource source_;
    std::unique_ptr<Scheduler> sched_;
    bool overload_;
    TraceSink trace_;
    bool first_;
    RepResult r_;

    double now_ = 0.0;
    std::uint64_t next_id_ = 0;
    std::uint64_t horizon_counter_ = 0;
    std::optional<Job> pending_;
    std::vector<Job> departed_;

    std::deque<double> boundaries_;
    std::deque<std::uint64_t> boundary_jobs_;
    std::size_t boundaries_seen_ = 0;
    std::size_t batch_ = 0;
    bool in_window_ = false;
    bool window_closed_ = false;
    bool stop_ = false;
    double t_warm_ = 0.0;
    double t_end_ = kInf;
    double next_census_ = kInf;
    double next_sample_ = kInf;
    std::vector<double> maxq_times_;
    std::size_t maxq_index_ = 0;
    std::uint64_t running_max_ = 0;
    std::uint64_t outstanding_ = 0;

    double bp_start_ = 0.0;
    std::uint64_t bp_max_ = 0;
    std::uint64_t bp_jobs_ = 0;
    double bp_work_ = 0.0;
    double bp_served_ = 0.0;
    std::uint64_t bp_deps_ = 0;
    bool bp_measured_ = false;
};

void validate(const SimConfig& c) {
    if (!(c.horizon.value > 0.0)) throw ConfigError("horizon must be > 0");
    if (!(c.warmup >= 0.0 && c.warmup <= 0.5)) throw ConfigError("warmup must lie in [0, 0.5]");
    if (c.replications == 0) throw ConfigError("replications must be >= 1");
    if (c.batches < 2) throw ConfigError("batches must be >= 2");
    if (c.model.arrival_rate < 0.0) throw ConfigError("arrival rate must be >= 0");
    if (c.horizon.kind == HorizonKind::Jobs && c.horizon.value < c.batches)
        throw ConfigError("job horizon must be at least the number of batches");
    if (!(c.probe_fraction > 0.0 && c.probe_fraction <= 1e-3)) throw ConfigError("probe_fraction must lie in (0, 1e-3]");
    for (double x : c.probe_sizes)
        if (!(x > 0.0)) throw ConfigError("probe sizes must be > 0");
    if (c.model.interarrival) {
        const double m = c.model.interarrival->mean();
        if (std::abs(m * c.model.arrival_rate - 1.0) > 1e-9)
            throw ConfigError("arrival rate must equal 1 / mean interarrival time");
    }
}

template <class T>
void append(std::vector<T>& dst, std::vector<T>&& src) {
    dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
}

stats::Estimate nan_estimate() {
    stats::Estimate e;
    e.value = kNaN;
    e.std_error = kInf;
    return e;
}

}  // namespace

SimulationMetrics run(const SimConfig& config) {
    validate(config);
    const double rho = config.model.load();
    const bool overload = rho >= 1.0;
    if (overload && !config.allow_overload) {
        double xs = std::numeric_limits<double>::quiet_NaN();
        if (config.model.poisson()) xs = critical_size(AnalyticModel::from(config.model));
        throw OverloadError("offered load " + std::to_string(rho) + " >= 1; stationary estimators do not exist", xs);
    }

    std::vector<RepResult> reps(config.replications);
    const std::uint32_t threads = std::max<std::uint32_t>(1, config.threads);
    for (std::uint32_t start = 0; start < config.replications; start += threads) {
        const std::uint32_t stop = std::min(config.replications, start + threads);
        if (stop - start == 1) {
            reps[start] = Replication(config, start, overload).run();
            continue;
        }
        std::vector<std::future<RepResult>> fut;
        for (std::uint32_t i = start; i < stop; ++i)
            fut.push_back(std::async(std::launch::async, [&config, i, overload] {
                return Replication(config, i, overload).run();
            }));
        for (std::uint32_t i = start; i < stop; ++i) reps[i] = fut[i - start].get();
    }

    SimulationMetrics m;
    m.replications = config.replications;
    m.overload = overload;
    std::vector<double> area, dur, arr, ss, sn, as, an;
    std::vector<std::vector<double>> ps(config.probe_sizes.size()), pn(config.probe_sizes.size());
    std::vector<double> pmf;
    for (auto& r : reps) {
        append(area, std::move(r.area));
        append(dur, std::move(r.duration));
        append(arr, std::move(r.arrivals));
        append(ss, std::move(r.soj_sum));
        append(sn, std::move(r.soj_n));
        append(as, std::move(r.all_sum));
        append(an, std::move(r.all_n));
        for (std::size_t p = 0; p < ps.size(); ++p) {
            append(ps[p], std::move(r.probe_sum[p]));
            append(pn[p], std::move(r.probe_n[p]));
        }
        if (pmf.size() < r.pmf.size()) pmf.resize(r.pmf.size(), 0.0);
        for (std::size_t q = 0; q < r.pmf.size(); ++q) pmf[q] += r.pmf[q];
        append(m.busy_periods, std::move(r.busy));
        append(m.census, std::move(r.census));
        append(m.sojourns, std::move(r.sojourns));
        m.work_conservation_error = std::max(m.work_conservation_error, r.wc_error);
        m.measured_time += r.measured_time;
        m.measured_jobs += r.measured_jobs;
        m.measured_departures += r.measured_departures;
    }
    m.max_queue_at = std::move(reps[0].max_queue_at);
    m.queue_samples = std::move(reps[0].samples);
    m.jobs = std::move(reps[0].jobs);
    m.final_queue_length = reps[0].final_queue;
    m.end_time = reps[0].end_time;

    double total = 0.0;
    for (double w : pmf) total += w;
    if (total > 0.0)
        for (double& w : pmf) w /= total;
    m.queue_length_pmf = std::move(pmf);

    if (overload) {
        m.time_avg_queue_length = m.mean_sojourn = m.throughput = m.little_residual = m.little_queue_length =
            nan_estimate();
        for (double x : config.probe_sizes) m.probes.push_back(ProbeEstimate{x, nan_estimate()});
        return m;
    }

    m.time_avg_queue_length = stats::ratio_estimate(area, dur);
    m.mean_sojourn = stats::ratio_estimate(ss, sn);
    m.throughput = stats::ratio_estimate(arr, dur);
    std::vector<double> diff(area.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = area[i] - as[i];
    m.little_residual = stats::ratio_estimate(diff, dur);
    m.little_queue_length = stats::ratio_estimate(as, dur);
    m.time_avg_queue_length.count = m.throughput.count = m.little_residual.count = m.little_queue_length.count =
        m.measured_jobs;
    for (std::size_t p = 0; p < ps.size(); ++p)
        m.probes.push_back(ProbeEstimate{config.probe_sizes[p], stats::ratio_estimate(ps[p], pn[p])});
    return m;
}

std::vector<Job> make_trace(const QueueModel& model, std::size_t jobs, std::uint64_t seed) {
    RngStream rng = RngStream::derive(seed, 0);
    const std::vector<double> none;
    ArrivalSource src(model, rng, none, 1e-3);
    std::vector<Job> out;
    out.reserve(jobs);
    for (std::size_t i = 0; i < jobs; ++i) out.push_back(src.next(i));
    return out;
}

std::vector<double> simulate_trace(const std::vector<Job>& jobs, const Discipline& d, const TraceSink& trace,
                                   double until) {
    auto sched = make_scheduler(d);
    std::vector<double> dep(jobs.size(), kNaN);
    std::vector<Job> out;
    double now = 0.0;
    std::size_t i = 0;
    auto emit = [&](const char* kind, std::uint64_t id) {
        if (trace) trace(TraceRecord{now, kind, id, sched->size(), sched->youngest_age()});
    };
    for (;;) {
        const InternalEvent ev = sched->next_event();
        const double t_arr = i < jobs.size() ? jobs[i].arrival : kInf;
        const bool internal_first = ev.kind != InternalEventKind::None && ev.wall_time <= (t_arr - now) + kTieWindow;
        if (internal_first) {
            if (now + ev.wall_time > until) break;
            sched->advance(ev.wall_time);
            now += ev.wall_time;
            out.clear();
            sched->fire(out);
            if (out.empty()) emit(event_name(ev.kind), 0);
            for (const Job& j : out) {
                dep[j.id] = now;
                emit("departure", jobs[j.id].id);
            }
        } else {
            if (!std::isfinite(t_arr) || t_arr > until) break;
            if (t_arr > now) sched->advance(t_arr - now);
            now = std::max(now, t_arr);
            if (i > 0 && jobs[i].arrival < jobs[i - 1].arrival) throw DomainError("trace must be sorted by arrival");
            Job j = jobs[i];
            j.id = i;  // index doubles as id so departures map back
            sched->admit(j);
            emit("arrival", jobs[i].id);
            ++i;
        }
    }
    return dep;
}

std::size_t queue_length_at(const std::vector<Job>& jobs, const Discipline& d, double t) {
    const auto dep = simulate_trace(jobs, d, {}, t);
    std::size_t n = 0;
    for (std::size_t i = 0; i < jobs.size(); ++i)
        if (jobs[i].arrival <= t && !(dep[i] <= t)) ++n;
    return n;
}

CoupledSojourns coupled_truncation_run(const std::vector<Job>& jobs, std::size_t tagged, double x) {
    if (tagged >= jobs.size()) throw DomainError("tagged index out of range");
    if (jobs[tagged].size != x) throw DomainError("tagged job must have size x");
    std::vector<Job> cut = jobs;
    for (auto& j : cut) j.size = std::min(j.size, x);
    const auto full = simulate_trace(jobs, discipline::FB{});
    const auto trunc = simulate_trace(cut, discipline::FB{});
    return {full[tagged] - jobs[tagged].arrival, trunc[tagged] - jobs[tagged].arrival};
}

ProbeEstimate probe_conditional_sojourn(const SimConfig& config, double x) {
    if (!config.model.poisson()) throw DomainError("probe estimation requires Poisson arrivals");
    const double lambda = config.model.arrival_rate;
    if (lambda * config.model.service.truncated_moment(x, 1) >= 1.0)
        throw OverloadError("rho(x) >= 1: a job of this size never completes");
    if (lambda == 0.0) {
        stats::Estimate e;
        e.value = x;
        e.count = 1;
        return ProbeEstimate{x, e};
    }
    SimConfig c = config;
    c.probe_sizes = {x};
    c.keep_busy_periods = false;
    auto m = run(c);
    return m.probes.at(0);
}

std::vector<double> TransientResult::pmf(std::size_t d) const {
    std::vector<double> p(counts.at(d).size());
    for (std::size_t k = 0; k < p.size(); ++k)
        p[k] = static_cast<double>(counts[d][k]) / static_cast<double>(replications);
    return p;
}

std::vector<double> TransientResult::cdf(std::size_t d) const {
    auto p = pmf(d);
    for (std::size_t k = 1; k < p.size(); ++k) p[k] += p[k - 1];
    return p;
}

TransientResult transient_queue_cdf(const QueueModel& model, double t, std::uint64_t replications,
                                    std::uint64_t seed, const std::vector<Discipline>& disciplines) {
    TransientResult res{t, replications, disciplines, std::vector<std::vector<std::uint64_t>>(disciplines.size()),
                        std::vector<std::vector<std::uint32_t>>(disciplines.size())};
    const std::vector<double> none;
    std::vector<Job> jobs;
    for (std::uint64_t r = 0; r < replications; ++r) {
        RngStream rng = RngStream::derive(seed, r);
        ArrivalSource src(model, rng, none, 1e-3);
        jobs.clear();
        for (std::uint64_t id = 0;; ++id) {
            Job j = src.next(id);
            if (!(j.arrival <= t)) break;
            jobs.push_back(j);
        }
        for (std::size_t d = 0; d < disciplines.size(); ++d) {
            const std::size_t q = queue_length_at(jobs, disciplines[d], t);
            auto& c = res.counts[d];
            if (c.size() <= q) c.resize(q + 1, 0);
            ++c[q];
            res.samples[d].push_back(static_cast<std::uint32_t>(q));
        }
    }
    return res;
}

std::vector<double> OverloadResult::departure_fraction() const {
    std::vector<double> f(arrived.size(), kNaN);
    for (std::size_t i = 0; i < f.size(); ++i)
        if (arrived[i] > 0) f[i] = static_cast<double>(departed[i]) / static_cast<double>(arrived[i]);
    return f;
}

OverloadResult overload_run(const SimConfig& config) {
    if (config.horizon.kind != HorizonKind::Time) throw ConfigError("overload runs need a time horizon");
    SimConfig c = config;
    c.allow_overload = true;
    c.keep_jobs = true;
    c.replications = 1;
    c.warmup = 0.0;
    c.keep_busy_periods = false;
    c.probe_sizes.clear();
    const double T = c.horizon.value;
    c.queue_sample_interval = T / 400.0;
    const auto m = run(c);

    OverloadResult res;
    res.horizon = T;
    res.bucket_edges.push_back(0.0);
    for (int k = 1; k < 10; ++k) res.bucket_edges.push_back(c.model.service.quantile(k / 10.0));
    res.bucket_edges.push_back(c.model.service.right_endpoint());
    res.arrived.assign(10, 0);
    res.departed.assign(10, 0);
    for (const auto& j : m.jobs) {
        if (j.arrival > 0.5 * T) continue;
        const auto it = std::upper_bound(res.bucket_edges.begin() + 1, res.bucket_edges.begin() + 10, j.size);
        const auto b = static_cast<std::size_t>(it - (res.bucket_edges.begin() + 1));
        ++res.arrived[b];
        if (j.departure) ++res.departed[b];
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
    for (const auto& [t, q] : m.queue_samples) {
        if (t < 0.5 * T) continue;
        sx += t;
        sy += static_cast<double>(q);
        sxx += t * t;
        sxy += t * static_cast<double>(q);
        n += 1.0;
    }
    res.growth_rate = n >= 2 ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : kNaN;
    return res;
}

}  // namespace fbq
