#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fbq {

/// Absolute tolerance for coalescing ages and detecting completions.
inline constexpr double kAgeTolerance = 1e-12;

struct Job {
    std::uint64_t id = 0;
    double arrival = 0.0;
    double size = 0.0;
    double initial_age = 0.0;
    std::int32_t probe = -1;  // index into probe sizes, -1 for ordinary jobs
    std::uint32_t batch = 0;
    bool measured = false;
};

namespace discipline {
struct FB {};
struct FBn {
    std::uint64_t levels;
    double quantum;
};
struct PS {};
struct SRPT {};
struct FIFO {};
struct LIFO {};
}  // namespace discipline

using Discipline = std::variant<discipline::FB, discipline::FBn, discipline::PS, discipline::SRPT,
                                discipline::FIFO, discipline::LIFO>;

std::string to_string(const Discipline& d);

enum class InternalEventKind { None, Departure, Merge, QuantumExpiry };

struct InternalEvent {
    InternalEventKind kind = InternalEventKind::None;
    double wall_time = std::numeric_limits<double>::infinity();  // from now
};

/// Server state of a single-server queue. The engine drives it with
/// admit / advance / fire; the scheduler decides who gets the unit rate.
class Scheduler {
public:
    virtual ~Scheduler() = default;

    virtual void admit(const Job& job) = 0;
    /// Earliest internal event assuming no further arrivals.
    virtual InternalEvent next_event() const = 0;
    /// Serve for `dt` wall time; dt must not pass next_event().
    virtual void advance(double dt) = 0;
    /// Apply the internal event that is due now. Completed jobs are appended to `out`.
    virtual void fire(std::vector<Job>& out) = 0;

    virtual std::size_t size() const = 0;
    /// Least attained service among present jobs (NaN when empty).
    virtual double youngest_age() const = 0;
    /// Attained service of every present job, for invariant checks.
    virtual std::vector<std::pair<std::uint64_t, double>> attained() const = 0;
    /// Ids of the jobs currently receiving service.
    virtual std::vector<std::uint64_t> served() const = 0;
};

/// Foreground-background: jobs of minimal age share the server equally.
class FbScheduler final : public Scheduler {
public:
    struct Cohort {
        double age;
        std::vector<Job> members;  // sorted by size, largest first
    };

    void admit(const Job& job) override;
    InternalEvent next_event() const override;
    void advance(double dt) override;
    void fire(std::vector<Job>& out) override;
    std::size_t size() const override { return jobs_; }
    double youngest_age() const override;
    std::vector<std::pair<std::uint64_t, double>> attained() const override;
    std::vector<std::uint64_t> served() const override;

    /// Cohorts, oldest first (youngest at the back).
    const std::vector<Cohort>& cohorts() const { return cohorts_; }

private:
    std::vector<Cohort> cohorts_;
    std::size_t jobs_ = 0;
};

/// FB_n with quantum q: n priority levels, each job served uninterruptedly for
/// at most q per visit; the last level serves jobs to completion.
class FbnScheduler final : public Scheduler {
public:
    FbnScheduler(std::uint64_t levels, double quantum);

    void admit(const Job& job) override;
    InternalEvent next_event() const override;
    void advance(double dt) override;
    void fire(std::vector<Job>& out) override;
    std::size_t size() const override;
    double youngest_age() const override;
    std::vector<std::pair<std::uint64_t, double>> attained() const override;
    std::vector<std::uint64_t> served() const override;

private:
    struct Entry {
        Job job;
        double age;
    };
    void start_next();

    std::uint64_t levels_;
    double quantum_;
    std::map<std::uint64_t, std::deque<Entry>> queues_;
    std::optional<Entry> current_;
    std::uint64_t current_level_ = 0;
    double slice_left_ = 0.0;
    std::size_t waiting_ = 0;
};

class PsScheduler final : public Scheduler {
public:
    void admit(const Job& job) override;
    InternalEvent next_event() const override;
    void advance(double dt) override;
    void fire(std::vector<Job>& out) override;
    std::size_t size() const override { return heap_.size(); }
    double youngest_age() const override;
    std::vector<std::pair<std::uint64_t, double>> attained() const override;
    std::vector<std::uint64_t> served() const override;

private:
    struct Entry {
        double finish;  // virtual time at which the job completes
        double start;   // virtual time at admission
        Job job;
    };
    std::vector<Entry> heap_;
    double virtual_time_ = 0.0;
};

class SrptScheduler final : public Scheduler {
public:
    void admit(const Job& job) override;
    InternalEvent next_event() const override;
    void advance(double dt) override;
    void fire(std::vector<Job>& out) override;
    std::size_t size() const override { return heap_.size(); }
    double youngest_age() const override;
    std::vector<std::pair<std::uint64_t, double>> attained() const override;
    std::vector<std::uint64_t> served() const override;

private:
    struct Entry {
        double remaining;
        Job job;
    };
    std::vector<Entry> heap_;
};

/// Non-preemptive FIFO (lifo = false) or LIFO (lifo = true).
class NonPreemptiveScheduler final : public Scheduler {
public:
    explicit NonPreemptiveScheduler(bool lifo) : lifo_(lifo) {}

    void admit(const Job& job) override;
    InternalEvent next_event() const override;
    void advance(double dt) override;
    void fire(std::vector<Job>& out) override;
    std::size_t size() const override { return waiting_.size() + (current_ ? 1 : 0); }
    double youngest_age() const override;
    std::vector<std::pair<std::uint64_t, double>> attained() const override;
    std::vector<std::uint64_t> served() const override;

private:
    bool lifo_;
    std::optional<std::pair<Job, double>> current_;  // job, remaining work
    std::deque<Job> waiting_;
};

std::unique_ptr<Scheduler> make_scheduler(const Discipline& d);

}  // namespace fbq
