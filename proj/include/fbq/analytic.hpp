#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbq/dists.hpp"

namespace fbq {

struct QueueModel;

/// Arrival rate, service law and optional renewal interarrival law
/// (exponential(lambda) when absent).
struct AnalyticModel {
    double lambda = 0.0;
    ServiceDistribution service = ServiceDistribution::exponential(1.0);
    std::optional<ServiceDistribution> interarrival;

    double rho() const { return lambda * service.mean(); }

    /// Poisson model with lambda chosen so that lambda * EB = rho.
    static AnalyticModel at_load(const ServiceDistribution& service, double rho);
    static AnalyticModel from(const QueueModel& q);
};

/// lambda * E(B ∧ x).
double rho_x(const AnalyticModel& m, double x);

/// E V(x) under FB. Throws OverloadError (carrying x*) when rho(x) >= 1.
double mean_cond_sojourn(const AnalyticModel& m, double x);

/// E Q = lambda ∫ E V(x) dF(x) for the M/G/1 FB queue.
double mean_queue_length(const AnalyticModel& m);

/// rho (2 - rho) / (2 (1 - rho)^2): E Q for deterministic service, an upper
/// bound otherwise.
double det_bound(double rho);
/// M/D/1: mean FIFO waiting-room length (jobs not in service) over E Q_FB.
/// Counting the job in service too, the ratio is exactly 1 - rho.
double fifo_fb_md1_ratio(double rho);

/// P(M = n) for the maximal queue length in an M/D/1 FB busy period (unit
/// service, rate lambda < 1).
double borel_pmf(double lambda, std::uint64_t n);
double borel_tail_asymptote(double lambda, std::uint64_t n);

double maxq_geometric_bound(double rho, double n);
/// a log t + b + x with a = -1/log rho and b = -(log lambda + log(1-rho))/log rho + 1.
double maxq_time_bound(double lambda, double rho, double t, double x);

/// Non-negative root v of v = lambda (v I(t,v) + (1-z) S(t) e^{-vt}) with
/// I(t,v) = ∫_0^t e^{-v u} S(u) du, by bisection on [0, lambda].
double v_fixed_point(const AnalyticModel& m, double t, double z);
/// Residual of the same equation, written as
/// v - lambda (1 - ∫_0^t e^{-vx} dF(x) - z S(t) e^{-vt}).
double v_residual(const AnalyticModel& m, double t, double z, double v);

struct PgfNode {
    double t;
    double v;
    double dv_dz;
    double residual;
};

struct PgfSolution {
    double z;
    double value;     // E z^Q
    double exponent;  // ∫ z dv/dz dt
    std::vector<PgfNode> nodes;  // sorted by t
    double max_residual;
};

PgfSolution solve_queue_length_pgf(const AnalyticModel& m, double z);
double queue_length_pgf(const AnalyticModel& m, double z);

/// lambda (1 - F(x)) / (1 - rho(x)).
double cohort_intensity(const AnalyticModel& m, double x);
/// ∫_0^{x_F} cohort_intensity; equals -log(1 - rho).
double cohort_intensity_integral(const AnalyticModel& m);

/// E e^{-s V(x)}, s >= 0.
double sojourn_lst(const AnalyticModel& m, double x, double s);

struct MomentEstimate {
    double value;
    double rel_disagreement;  // between the two Richardson levels
    bool unstable;
};

/// E V(x)^n for n in {1,2,3} by numerical differentiation of sojourn_lst.
MomentEstimate cond_sojourn_moment(const AnalyticModel& m, double x, int n);

struct DecayRateResult {
    double gamma;
    double s_star;
    std::vector<std::pair<double, double>> curve;  // (s, objective) grid samples
    bool multimodal = false;
};

/// s + Phi_A^{-1}(1 / Phi_B(s)).
double decay_objective(const AnalyticModel& m, double s);
DecayRateResult decay_rate(const AnalyticModel& m);
/// Decay rate with service B ∧ x.
DecayRateResult cond_decay_rate(const AnalyticModel& m, double x);

/// P(B > (1 - rho) x).
double reduced_load_tail(const AnalyticModel& m, double x);
/// (1 - rho)^{-alpha-1}, with alpha the Pareto tail index.
double busy_tail_factor(double rho, double alpha);

/// x* = sup{x : lambda E(B ∧ x) < 1}; +inf when rho <= 1.
double critical_size(const AnalyticModel& m);

struct SlowdownProfile {
    std::vector<double> x;
    std::vector<double> slowdown;  // E V(x) / x
    double limit;                  // 1 / (1 - rho)
    double mean_slowdown;          // ∫ E S(x) dF(x)
    double mean_bound;             // (2 - rho) / (2 (1 - rho)^2)
    std::optional<std::pair<double, double>> non_monotone;  // x1 < x2 with ES(x1) > ES(x2)
};

SlowdownProfile slowdown_profile(const AnalyticModel& m, std::span<const double> xs);
/// Log-spaced grid of n points from quantile p_lo to quantile p_hi.
std::vector<double> quantile_grid(const ServiceDistribution& d, double p_lo, double p_hi, std::size_t n);

enum class CompensatorKind { Power, Log, LogSquared };

struct Compensator {
    CompensatorKind kind = CompensatorKind::Power;
    double exponent = 1.0;  // for Power: multiply by (1 - rho)^exponent

    double apply(double eq, double rho) const;
    std::string name() const;
};

struct HeavyTrafficRow {
    double rho;
    double eq;
    double compensated;
    double lower_bound;  // -log(1 - rho)
    std::optional<std::string> error;
};

std::vector<double> default_heavy_traffic_grid();
std::vector<HeavyTrafficRow> heavy_traffic_scan(const ServiceDistribution& service, const Compensator& c,
                                                std::span<const double> rhos);

}  // namespace fbq
