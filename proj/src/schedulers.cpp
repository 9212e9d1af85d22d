#include "fbq/schedulers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fbq/errors.hpp"

namespace fbq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double snap_tolerance(double magnitude) { return kAgeTolerance * std::max(1.0, std::abs(magnitude)); }

bool larger_first(const Job& a, const Job& b) {
    return a.size > b.size || (a.size == b.size && a.id > b.id);
}

void append_by_id(std::vector<Job>& out, std::vector<Job>::iterator first, std::vector<Job>::iterator last) {
    const auto start = out.size();
    out.insert(out.end(), first, last);
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(start), out.end(),
              [](const Job& a, const Job& b) { return a.id < b.id; });
}

}  // namespace

std::string to_string(const Discipline& d) {
    struct V {
        std::string operator()(const discipline::FB&) const { return "FB"; }
        std::string operator()(const discipline::FBn& f) const {
            std::ostringstream os;
            os << "FBn(n=" << f.levels << ", q=" << f.quantum << ")";
            return os.str();
        }
        std::string operator()(const discipline::PS&) const { return "PS"; }
        std::string operator()(const discipline::SRPT&) const { return "SRPT"; }
        std::string operator()(const discipline::FIFO&) const { return "FIFO"; }
        std::string operator()(const discipline::LIFO&) const { return "LIFO"; }
    };
    return std::visit(V{}, d);
}

// ---------------------------------------------------------------- FB

void FbScheduler::admit(const Job& job) {
    const double age = job.initial_age;
    ++jobs_;
    if (cohorts_.empty() || age < cohorts_.back().age - snap_tolerance(age)) {
        cohorts_.push_back(Cohort{age, {job}});
        return;
    }
    // Positive initial age: join an equal-age cohort or open one in age order.
    auto it = std::find_if(cohorts_.begin(), cohorts_.end(),
                           [&](const Cohort& c) { return std::abs(c.age - age) <= snap_tolerance(age); });
    if (it != cohorts_.end()) {
        auto pos = std::upper_bound(it->members.begin(), it->members.end(), job, larger_first);
        it->members.insert(pos, job);
        return;
    }
    auto pos = std::find_if(cohorts_.begin(), cohorts_.end(), [&](const Cohort& c) { return c.age < age; });
    cohorts_.insert(pos, Cohort{age, {job}});
}

InternalEvent FbScheduler::next_event() const {
    if (cohorts_.empty()) return {};
    const Cohort& y = cohorts_.back();
    const double m = static_cast<double>(y.members.size());
    const double dep = std::max(0.0, m * (y.members.back().size - y.age));
    if (cohorts_.size() >= 2) {
        const double merge = std::max(0.0, m * (cohorts_[cohorts_.size() - 2].age - y.age));
        if (merge < dep) return {InternalEventKind::Merge, merge};
    }
    return {InternalEventKind::Departure, dep};
}

void FbScheduler::advance(double dt) {
    if (cohorts_.empty() || dt <= 0.0) return;
    Cohort& y = cohorts_.back();
    y.age += dt / static_cast<double>(y.members.size());
}

void FbScheduler::fire(std::vector<Job>& out) {
    if (cohorts_.empty()) return;
    Cohort& y = cohorts_.back();
    const double dep_target = y.members.back().size;
    const bool has_older = cohorts_.size() >= 2;
    const double merge_target = has_older ? cohorts_[cohorts_.size() - 2].age : 0.0;
    // The due event is the nearer target (departure wins ties); snap onto it.
    if (!has_older || dep_target <= merge_target) {
        y.age = dep_target;
    } else {
        y.age = merge_target;
    }
    const double tol = snap_tolerance(y.age);
    auto first_done = std::find_if(y.members.begin(), y.members.end(),
                                   [&](const Job& j) { return j.size <= y.age + tol; });
    if (first_done != y.members.end()) {
        jobs_ -= static_cast<std::size_t>(y.members.end() - first_done);
        append_by_id(out, first_done, y.members.end());
        y.members.erase(first_done, y.members.end());
    }
    if (y.members.empty()) {
        cohorts_.pop_back();
        return;
    }
    if (has_older && std::abs(y.age - merge_target) <= tol) {
        Cohort& older = cohorts_[cohorts_.size() - 2];
        std::vector<Job> merged;
        merged.reserve(older.members.size() + y.members.size());
        std::merge(older.members.begin(), older.members.end(), y.members.begin(), y.members.end(),
                   std::back_inserter(merged), larger_first);
        older.members = std::move(merged);
        cohorts_.pop_back();
    }
}

double FbScheduler::youngest_age() const { return cohorts_.empty() ? kNaN : cohorts_.back().age; }

std::vector<std::pair<std::uint64_t, double>> FbScheduler::attained() const {
    std::vector<std::pair<std::uint64_t, double>> out;
    for (const auto& c : cohorts_)
        for (const auto& j : c.members) out.emplace_back(j.id, c.age);
    return out;
}

std::vector<std::uint64_t> FbScheduler::served() const {
    std::vector<std::uint64_t> out;
    if (!cohorts_.empty())
        for (const auto& j : cohorts_.back().members) out.push_back(j.id);
    return out;
}

// ---------------------------------------------------------------- FB_n

FbnScheduler::FbnScheduler(std::uint64_t levels, double quantum) : levels_(levels), quantum_(quantum) {
    if (levels_ == 0) throw DomainError("FBn: levels must be >= 1");
    if (!(quantum_ > 0.0)) throw DomainError("FBn: quantum must be > 0");
}

void FbnScheduler::admit(const Job& job) {
    const double lvl = std::floor(job.initial_age / quantum_);
    const std::uint64_t level =
        std::min<std::uint64_t>(levels_ - 1, lvl >= 1.8e19 ? levels_ - 1 : static_cast<std::uint64_t>(lvl));
    queues_[level].push_back(Entry{job, job.initial_age});
    ++waiting_;
    if (!current_) start_next();
}

void FbnScheduler::start_next() {
    current_.reset();
    while (!queues_.empty() && queues_.begin()->second.empty()) queues_.erase(queues_.begin());
    if (queues_.empty()) return;
    auto& [level, q] = *queues_.begin();
    current_ = q.front();
    q.pop_front();
    --waiting_;
    current_level_ = level;
    slice_left_ = (level + 1 >= levels_) ? std::numeric_limits<double>::infinity() : quantum_;
    if (q.empty()) queues_.erase(queues_.begin());
}

InternalEvent FbnScheduler::next_event() const {
    if (!current_) return {};
    const double remaining = std::max(0.0, current_->job.size - current_->age);
    if (remaining <= slice_left_) return {InternalEventKind::Departure, remaining};
    return {InternalEventKind::QuantumExpiry, std::max(0.0, slice_left_)};
}

void FbnScheduler::advance(double dt) {
    if (!current_ || dt <= 0.0) return;
    current_->age += dt;
    slice_left_ -= dt;
}

void FbnScheduler::fire(std::vector<Job>& out) {
    if (!current_) return;
    const double remaining = current_->job.size - current_->age;
    if (remaining <= slice_left_ + snap_tolerance(current_->job.size)) {
        out.push_back(current_->job);
    } else {
        const std::uint64_t next = std::min(levels_ - 1, current_level_ + 1);
        queues_[next].push_back(*current_);
        ++waiting_;
    }
    start_next();
}

std::size_t FbnScheduler::size() const { return waiting_ + (current_ ? 1 : 0); }

double FbnScheduler::youngest_age() const {
    double best = current_ ? current_->age : kNaN;
    for (const auto& [lvl, q] : queues_)
        for (const auto& e : q) best = std::isnan(best) ? e.age : std::min(best, e.age);
    return best;
}

std::vector<std::pair<std::uint64_t, double>> FbnScheduler::attained() const {
    std::vector<std::pair<std::uint64_t, double>> out;
    if (current_) out.emplace_back(current_->job.id, current_->age);
    for (const auto& [lvl, q] : queues_)
        for (const auto& e : q) out.emplace_back(e.job.id, e.age);
    return out;
}

std::vector<std::uint64_t> FbnScheduler::served() const {
    if (!current_) return {};
    return {current_->job.id};
}

// ---------------------------------------------------------------- PS

namespace {
struct PsLater {
    template <class E>
    bool operator()(const E& a, const E& b) const {
        return a.finish > b.finish || (a.finish == b.finish && a.job.id > b.job.id);
    }
};
struct SrptLater {
    template <class E>
    bool operator()(const E& a, const E& b) const {
        return a.remaining > b.remaining || (a.remaining == b.remaining && a.job.id > b.job.id);
    }
};
}  // namespace

void PsScheduler::admit(const Job& job) {
    heap_.push_back(Entry{virtual_time_ + (job.size - job.initial_age), virtual_time_, job});
    std::push_heap(heap_.begin(), heap_.end(), PsLater{});
}

InternalEvent PsScheduler::next_event() const {
    if (heap_.empty()) return {};
    const double n = static_cast<double>(heap_.size());
    return {InternalEventKind::Departure, std::max(0.0, n * (heap_.front().finish - virtual_time_))};
}

void PsScheduler::advance(double dt) {
    if (heap_.empty() || dt <= 0.0) return;
    virtual_time_ += dt / static_cast<double>(heap_.size());
}

void PsScheduler::fire(std::vector<Job>& out) {
    if (heap_.empty()) return;
    virtual_time_ = heap_.front().finish;
    const double tol = snap_tolerance(virtual_time_);
    std::vector<Job> done;
    while (!heap_.empty() && heap_.front().finish <= virtual_time_ + tol) {
        std::pop_heap(heap_.begin(), heap_.end(), PsLater{});
        done.push_back(heap_.back().job);
        heap_.pop_back();
    }
    append_by_id(out, done.begin(), done.end());
    if (heap_.empty()) virtual_time_ = 0.0;
}

double PsScheduler::youngest_age() const {
    double best = kNaN;
    for (const auto& e : heap_) {
        const double a = e.job.initial_age + (virtual_time_ - e.start);
        best = std::isnan(best) ? a : std::min(best, a);
    }
    return best;
}

std::vector<std::pair<std::uint64_t, double>> PsScheduler::attained() const {
    std::vector<std::pair<std::uint64_t, double>> out;
    for (const auto& e : heap_) out.emplace_back(e.job.id, e.job.initial_age + (virtual_time_ - e.start));
    return out;
}

std::vector<std::uint64_t> PsScheduler::served() const {
    std::vector<std::uint64_t> out;
    for (const auto& e : heap_) out.push_back(e.job.id);
    return out;
}

// ---------------------------------------------------------------- SRPT

void SrptScheduler::admit(const Job& job) {
    heap_.push_back(Entry{job.size - job.initial_age, job});
    std::push_heap(heap_.begin(), heap_.end(), SrptLater{});
}

InternalEvent SrptScheduler::next_event() const {
    if (heap_.empty()) return {};
    return {InternalEventKind::Departure, std::max(0.0, heap_.front().remaining)};
}

void SrptScheduler::advance(double dt) {
    if (heap_.empty() || dt <= 0.0) return;
    heap_.front().remaining -= dt;  // decreasing the minimum keeps the heap valid
}

void SrptScheduler::fire(std::vector<Job>& out) {
    if (heap_.empty()) return;
    heap_.front().remaining = 0.0;
    std::vector<Job> done;
    while (!heap_.empty() && heap_.front().remaining <= snap_tolerance(heap_.front().job.size)) {
        std::pop_heap(heap_.begin(), heap_.end(), SrptLater{});
        done.push_back(heap_.back().job);
        heap_.pop_back();
    }
    append_by_id(out, done.begin(), done.end());
}

double SrptScheduler::youngest_age() const {
    double best = kNaN;
    for (const auto& e : heap_) {
        const double a = e.job.size - e.remaining;
        best = std::isnan(best) ? a : std::min(best, a);
    }
    return best;
}

std::vector<std::pair<std::uint64_t, double>> SrptScheduler::attained() const {
    std::vector<std::pair<std::uint64_t, double>> out;
    for (const auto& e : heap_) out.emplace_back(e.job.id, e.job.size - e.remaining);
    return out;
}

std::vector<std::uint64_t> SrptScheduler::served() const {
    if (heap_.empty()) return {};
    return {heap_.front().job.id};
}

// ---------------------------------------------------------------- FIFO / LIFO

void NonPreemptiveScheduler::admit(const Job& job) {
    if (!current_) {
        current_.emplace(job, job.size - job.initial_age);
    } else {
        waiting_.push_back(job);
    }
}

InternalEvent NonPreemptiveScheduler::next_event() const {
    if (!current_) return {};
    return {InternalEventKind::Departure, std::max(0.0, current_->second)};
}

void NonPreemptiveScheduler::advance(double dt) {
    if (current_ && dt > 0.0) current_->second -= dt;
}

void NonPreemptiveScheduler::fire(std::vector<Job>& out) {
    if (!current_) return;
    out.push_back(current_->first);
    current_.reset();
    if (waiting_.empty()) return;
    Job next;
    if (lifo_) {
        next = waiting_.back();
        waiting_.pop_back();
    } else {
        next = waiting_.front();
        waiting_.pop_front();
    }
    current_.emplace(next, next.size - next.initial_age);
}

double NonPreemptiveScheduler::youngest_age() const {
    double best = current_ ? current_->first.size - current_->second : kNaN;
    for (const auto& j : waiting_) best = std::isnan(best) ? j.initial_age : std::min(best, j.initial_age);
    return best;
}

std::vector<std::pair<std::uint64_t, double>> NonPreemptiveScheduler::attained() const {
    std::vector<std::pair<std::uint64_t, double>> out;
    if (current_) out.emplace_back(current_->first.id, current_->first.size - current_->second);
    for (const auto& j : waiting_) out.emplace_back(j.id, j.initial_age);
    return out;
}

std::vector<std::uint64_t> NonPreemptiveScheduler::served() const {
    if (!current_) return {};
    return {current_->first.id};
}

std::unique_ptr<Scheduler> make_scheduler(const Discipline& d) {
    struct V {
        std::unique_ptr<Scheduler> operator()(const discipline::FB&) const { return std::make_unique<FbScheduler>(); }
        std::unique_ptr<Scheduler> operator()(const discipline::FBn& f) const {
            return std::make_unique<FbnScheduler>(f.levels, f.quantum);
        }
        std::unique_ptr<Scheduler> operator()(const discipline::PS&) const { return std::make_unique<PsScheduler>(); }
        std::unique_ptr<Scheduler> operator()(const discipline::SRPT&) const {
            return std::make_unique<SrptScheduler>();
        }
        std::unique_ptr<Scheduler> operator()(const discipline::FIFO&) const {
            return std::make_unique<NonPreemptiveScheduler>(false);
        }
        std::unique_ptr<Scheduler> operator()(const discipline::LIFO&) const {
            return std::make_unique<NonPreemptiveScheduler>(true);
        }
    };
    return std::visit(V{}, d);
}

}  // namespace fbq
