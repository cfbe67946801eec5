#include "gradstab/quadform.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gradstab {

namespace {

CholeskyParam on_segment(double t) {
    const auto p0 = classical_witness();
    const auto p1 = optimal_point();
    return {p0.a + t * (p1.a - p0.a), p0.b + t * (p1.b - p0.b), p0.c + t * (p1.c - p0.c)};
}

// f along the segment; the endpoint t = 1 takes the boundary limit 95/96.
double f_on_segment(double t) { return t >= 1.0 ? beta3() : f_eval(on_segment(t)); }

}  // namespace

double default_beta(double cf_dt) {
    const double half = 0.5 * cf_dt;
    const double beta = std::max(half, 0.5 * (half + beta3()));
    return std::min(beta, beta3() - 1e-6);
}

Decomposition decompose(double beta) {
    if (!(beta >= 0.0)) throw DomainError(fmt::format("decompose: beta = {:.17g} must be nonnegative", beta));
    const double b3 = beta3();
    const double eps = 4.0 * std::numeric_limits<double>::epsilon();
    if (beta > b3 + eps)
        throw InfeasibleError(
            fmt::format("decompose: beta = {:.17g} exceeds the optimal constant beta3 = 95/96 = {:.17g}", beta, b3));

    Decomposition d;
    if (beta >= b3 - eps) {
        const auto exact = optimal_decomposition_exact();
        d.q = exact.q.to_double_form();
        d.r_tilde = exact.r_tilde.to_double_form();
        d.beta = b3;
        d.param = optimal_point();
        d.segment_t = 1.0;
        return d;
    }

    // Aim halfway between beta and beta3 so both forms keep a definiteness margin.
    const double target = beta + 0.5 * (b3 - beta);
    double t = 0.0;
    if (f_on_segment(0.0) < target) {
        double lo = 0.0;
        double hi = 1.0;
        while (true) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            (f_on_segment(mid) >= target ? hi : lo) = mid;
        }
        if (hi >= 1.0)
            throw ConvergenceError(fmt::format("decompose: no segment point reaches f >= {:.17g}", target));
        t = hi;
    }

    d.param = on_segment(t);
    d.segment_t = t;
    d.beta = beta;
    d.q = d.param.form();
    const auto red = gauss_reduce_r3(d.param);
    d.r_tilde = QuadraticForm3();
    d.r_tilde.add_square(red.squares[0].weight, red.squares[0].linear);
    d.r_tilde.add_square(red.squares[1].weight, red.squares[1].linear);
    d.r_tilde.add_square(red.beta_term - beta, {1.0, 0.0, 0.0});

    const auto rq = classify(d.q);
    if (!rq.positive_definite())
        throw DefinitenessError(fmt::format("decompose: q is not positive definite (minor {})", rq.failing_minor));
    const auto rr = classify(d.r_tilde, 0.0);
    if (!rr.positive_definite())
        throw DefinitenessError(fmt::format("decompose: r~ lost definiteness at beta = {:.17g} (min eigenvalue {:.3e})",
                                            beta, d.r_tilde.min_eigenvalue()));
    return d;
}

}  // namespace gradstab
