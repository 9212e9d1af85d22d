#include "fbq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fbq/errors.hpp"

namespace fbq::num {

namespace {

struct Simpson {
    const Fn& f;
    int max_depth;
    double abs_floor;

    double recurse(double a, double b, double fa, double fm, double fb, double whole, double eps,
                   int depth) const {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = f(lm);
        const double frm = f(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double delta = left + right - whole;
        if (depth >= max_depth || std::abs(delta) <= 15.0 * eps || !(m > a && b > m)) {
            return left + right + delta / 15.0;
        }
        const double half = std::max(0.5 * eps, abs_floor);
        return recurse(a, m, fa, flm, fm, left, half, depth + 1) +
               recurse(m, b, fm, frm, fb, right, half, depth + 1);
    }
};

double integrate_piece(const Fn& f, double a, double b, const QuadOptions& opt, double scale_hint) {
    if (!(b > a)) return 0.0;
    const int panels = std::max(1, opt.initial_panels);
    const double h = (b - a) / panels;
    std::vector<double> xs(2 * panels + 1);
    std::vector<double> fs(2 * panels + 1);
    for (int i = 0; i <= 2 * panels; ++i) {
        xs[i] = (i == 2 * panels) ? b : a + 0.5 * h * i;
        fs[i] = f(xs[i]);
    }
    double coarse = 0.0;
    std::vector<double> wholes(panels);
    for (int p = 0; p < panels; ++p) {
        const double w = (xs[2 * p + 2] - xs[2 * p]) / 6.0 * (fs[2 * p] + 4.0 * fs[2 * p + 1] + fs[2 * p + 2]);
        wholes[p] = w;
        coarse += std::abs(w);
    }
    const double scale = std::max(coarse, scale_hint);
    const double eps_total = std::max(opt.rel_tol * scale, opt.abs_tol);
    Simpson s{f, opt.max_depth, opt.abs_tol};
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        total += s.recurse(xs[2 * p], xs[2 * p + 2], fs[2 * p], fs[2 * p + 1], fs[2 * p + 2], wholes[p],
                           eps_total / panels, 0);
    }
    return total;
}

}  // namespace

double integrate(const Fn& f, double a, double b, const QuadOptions& opt) {
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, opt);
    return integrate_piece(f, a, b, opt, 0.0);
}

double integrate(const Fn& f, double a, double b, std::span<const double> breakpoints,
                 const QuadOptions& opt) {
    if (a == b) return 0.0;
    if (a > b) return -integrate(f, b, a, breakpoints, opt);
    std::vector<double> cuts{a};
    for (double p : breakpoints) {
        if (p > a && p < b) cuts.push_back(p);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        total += integrate_piece(f, cuts[i], cuts[i + 1], opt, 0.0);
    }
    return total;
}

double bisect(const Fn& f, double lo, double hi, double tol, int max_iter) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) {
        throw NumericError("bisect: no sign change on bracket");
    }
    for (int i = 0; i < max_iter; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi) || hi - lo <= tol) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::pair<double, double> golden_max(const Fn& f, double lo, double hi, double tol) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 500 && (b - a) > tol * std::max(1.0, std::abs(a) + std::abs(b)); ++i) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    const double fx = f(x);
    if (fc >= fx && fc >= fd) return {c, fc};
    if (fd >= fx) return {d, fd};
    return {x, fx};
}

double expm1_ratio(double u, double m) {
    if (u == 0.0) return m;
    return -std::expm1(-u * m) / u;
}

}  // namespace fbq::num
