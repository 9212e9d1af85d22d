#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <utility>

namespace fbq::num {

using Fn = std::function<double(double)>;

struct QuadOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14;
    int max_depth = 48;
    int initial_panels = 16;
};

/// Adaptive Simpson quadrature on [a, b] with Richardson-corrected panels.
double integrate(const Fn& f, double a, double b, const QuadOptions& opt = {});

/// Same, but the interval is first split at the given interior breakpoints
/// (kinks or jumps of the integrand). Points outside (a, b) are ignored.
double integrate(const Fn& f, double a, double b, std::span<const double> breakpoints,
                 const QuadOptions& opt = {});

/// Bisection for a sign change of f on [lo, hi]. Stops when the bracket is
/// narrower than tol or cannot shrink any further in floating point.
/// Throws NumericError if f(lo) and f(hi) have the same strict sign.
double bisect(const Fn& f, double lo, double hi, double tol = 0.0, int max_iter = 400);

/// Golden-section search for the maximum of a unimodal f on [lo, hi].
/// Returns (argmax, max).
std::pair<double, double> golden_max(const Fn& f, double lo, double hi, double tol = 1e-12);

/// 1 - e^{-u m}, divided by u, evaluated stably (limit m at u = 0).
double expm1_ratio(double u, double m);

}  // namespace fbq::num
