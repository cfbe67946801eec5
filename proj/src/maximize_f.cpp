#include "gradstab/quadform.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace gradstab {

namespace {

using Point3 = std::array<double, 3>;

struct NelderMeadResult {
    Point3 x;
    double value;
    int iterations;
};

// Plain Nelder-Mead minimiser with the standard coefficients.
NelderMeadResult nelder_mead(const std::function<double(const Point3&)>& fn, const Point3& start, double step,
                             int max_iter, double ftol) {
    std::array<Point3, 4> simplex;
    std::array<double, 4> val;
    simplex[0] = start;
    for (int i = 0; i < 3; ++i) {
        simplex[i + 1] = start;
        simplex[i + 1][i] += step;
    }
    for (int i = 0; i < 4; ++i) val[i] = fn(simplex[i]);

    auto blend = [](const Point3& p, const Point3& q, double t) {
        Point3 r;
        for (int i = 0; i < 3; ++i) r[i] = p[i] + t * (q[i] - p[i]);
        return r;
    };

    int it = 0;
    for (; it < max_iter; ++it) {
        std::array<int, 4> order{0, 1, 2, 3};
        std::sort(order.begin(), order.end(), [&](int l, int r) { return val[l] < val[r]; });
        auto sorted_s = simplex;
        auto sorted_v = val;
        for (int i = 0; i < 4; ++i) {
            simplex[i] = sorted_s[order[i]];
            val[i] = sorted_v[order[i]];
        }
        if (std::abs(val[3] - val[0]) <= ftol * (std::abs(val[0]) + ftol)) break;

        Point3 centroid{0, 0, 0};
        for (int i = 0; i < 3; ++i)
            for (int d = 0; d < 3; ++d) centroid[d] += simplex[i][d] / 3.0;

        const Point3 xr = blend(centroid, simplex[3], -1.0);
        const double fr = fn(xr);
        if (fr < val[0]) {
            const Point3 xe = blend(centroid, simplex[3], -2.0);
            const double fe = fn(xe);
            if (fe < fr) {
                simplex[3] = xe;
                val[3] = fe;
            } else {
                simplex[3] = xr;
                val[3] = fr;
            }
        } else if (fr < val[2]) {
            simplex[3] = xr;
            val[3] = fr;
        } else {
            const bool outside = fr < val[3];
            const Point3 xc = outside ? blend(centroid, xr, 0.5) : blend(centroid, simplex[3], 0.5);
            const double fc = fn(xc);
            if (fc < std::min(fr, val[3])) {
                simplex[3] = xc;
                val[3] = fc;
            } else {
                for (int i = 1; i < 4; ++i) {
                    simplex[i] = blend(simplex[0], simplex[i], 0.5);
                    val[i] = fn(simplex[i]);
                }
            }
        }
    }
    const auto best = std::min_element(val.begin(), val.end()) - val.begin();
    return {simplex[best], val[best], it};
}

// Omega is mapped onto R^3 by a = exp(u), b = a + exp(v), c = w; f tends to
// -infinity at b -> a+ unless delta -> 0, which keeps the search inside.
CholeskyParam from_unconstrained(const Point3& x) {
    const double a = std::exp(x[0]);
    return {a, a + std::exp(x[1]), x[2]};
}

}  // namespace

MaximizeResult maximize_f(const MaximizeOptions& opts) {
    MaximizeResult res;
    auto& trace = res.trace;

    // Any near-maximising sequence satisfies 1/(36a^2) < 11/6 and a^2 < b^2 < 11/6.
    double lo = 1.0 / std::sqrt(66.0);
    double hi = std::sqrt(11.0 / 6.0);
    trace.push_back(fmt::format("golden-section on g over [{:.17g}, {:.17g}]", lo, hi));

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double g1 = g_eval(x1);
    double g2 = g_eval(x2);
    int it = 0;
    for (; it < opts.max_iterations && hi - lo > 1e-10; ++it) {
        if (g1 > g2) {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g_eval(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g_eval(x2);
        }
    }
    trace.push_back(fmt::format("golden-section: {} iterations, bracket [{:.17g}, {:.17g}]", it, lo, hi));
    if (hi - lo > 1e-10)
        throw ConvergenceError(fmt::format("maximize_f: golden-section did not converge; best a = {:.17g}, g = {:.17g}",
                                           0.5 * (lo + hi), g_eval(0.5 * (lo + hi))));

    // Polish on the sign change of g'.
    lo = std::max(lo - 1e-8, 1.0 / std::sqrt(66.0));
    hi = hi + 1e-8;
    if (!(g_prime(lo) > 0.0 && g_prime(hi) < 0.0))
        throw ConvergenceError(fmt::format("maximize_f: g' does not change sign on [{:.17g}, {:.17g}]; best a = {:.17g}",
                                           lo, hi, 0.5 * (lo + hi)));
    int bis = 0;
    while (true) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (g_prime(mid) > 0.0 ? lo : hi) = mid;
        ++bis;
    }
    const double a_star = g_prime(hi) == 0.0 ? hi : lo;
    res.argmax = {a_star, a_star, constrained_c(a_star)};
    res.beta_star = g_eval(a_star);
    trace.push_back(fmt::format("bisection on g': {} halvings, a* = {:.17g}, g(a*) = {:.17g}", bis, a_star,
                                res.beta_star));

    // Cross-check: multi-start Nelder-Mead on f over the open set.
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> du(std::log(1.0 / std::sqrt(66.0)), std::log(std::sqrt(11.0 / 6.0)));
    std::uniform_real_distribution<double> dv(-6.0, 0.0);
    std::uniform_real_distribution<double> dw(-1.3, 1.3);
    auto neg_f = [](const Point3& x) {
        const auto p = from_unconstrained(x);
        if (!(p.b > p.a) || !std::isfinite(p.b)) return std::numeric_limits<double>::infinity();
        const double v = f_eval(p);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::infinity();
    };
    res.cross_check = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < opts.starts; ++s) {
        Point3 x{du(rng), dv(rng), dw(rng)};
        double best = neg_f(x);
        double step = 0.5;
        int total = 0;
        // Restarts let the simplex keep sliding toward b = a.
        for (int restart = 0; restart < 60 && total < opts.max_iterations; ++restart) {
            const auto r = nelder_mead(neg_f, x, step, opts.max_iterations - total, 1e-15);
            total += r.iterations + 1;
            const bool improved = r.value < best - 1e-16;
            x = r.x;
            best = std::min(best, r.value);
            step = improved ? 0.5 : step * 0.5;
            if (!improved && step < 1e-6) break;
        }
        trace.push_back(fmt::format("nelder-mead start {}: f = {:.17g} at (a, b-a, c) = ({:.6g}, {:.3e}, {:.6g})", s,
                                    -best, std::exp(x[0]), std::exp(x[1]), x[2]));
        if (-best > res.cross_check) {
            res.cross_check = -best;
            res.cross_check_point = from_unconstrained(x);
        }
    }

    if (res.cross_check > res.beta_star + 1e-12)
        throw ConvergenceError(fmt::format(
            "maximize_f: interior search found f = {:.17g} above the boundary maximum {:.17g}; best point "
            "({:.17g}, {:.17g}, {:.17g})",
            res.cross_check, res.beta_star, res.cross_check_point.a, res.cross_check_point.b,
            res.cross_check_point.c));
    if (res.beta_star - res.cross_check > opts.cross_check_tol)
        throw ConvergenceError(fmt::format(
            "maximize_f: interior search stalled at f = {:.17g}, {:.3e} below the boundary maximum {:.17g}",
            res.cross_check, res.beta_star - res.cross_check, res.beta_star));
    trace.push_back(fmt::format("cross-check gap {:.3e}", res.beta_star - res.cross_check));
    return res;
}

}  // namespace gradstab
