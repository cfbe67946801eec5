#include "gradstab/lyapunov.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gradstab {

LyapunovState LyapunovState::at(const Trajectory& t, std::size_t m) {
    if (m < 2 || m >= t.size()) throw DomainError(fmt::format("LyapunovState: index {} out of range", m));
    return {t.states[m], t.states[m] - t.states[m - 1], t.states[m - 1] - t.states[m - 2]};
}

double hatF(const Decomposition& dec, const SemiconvexFunction& f, double dt, const LyapunovState& s) {
    if (!(dt > 0.0)) throw DomainError("hatF: dt must be positive");
    const double fu = f.value(s.u);
    if (!std::isfinite(fu)) return std::numeric_limits<double>::infinity();
    const Vector pair[2] = {s.du1, s.du2};
    return fu + lift(dec.q, std::span<const Vector>(pair, 2)) / dt;
}

std::optional<std::pair<double, double>> admissible_beta_range(double cf_dt) {
    const double lo = 0.5 * cf_dt;
    if (!(lo < beta3())) return std::nullopt;
    return std::make_pair(lo, beta3());
}

DescentAudit descent_audit(const Trajectory& traj, const Decomposition& dec, const SemiconvexFunction& f,
                           AuditOptions opts) {
    if (traj.k != 3) throw PreconditionError(fmt::format("descent audit needs a BDF3 trajectory, got BDF{}", traj.k));
    if (traj.size() < 3) throw PreconditionError("descent audit needs at least three states");

    DescentAudit a;
    a.dt = traj.dt;
    a.beta = dec.beta;
    a.cf_dt = f.semiconvexity() * traj.dt;
    a.regime = classify_regime(3, a.cf_dt);

    const auto range = admissible_beta_range(a.cf_dt);
    if (!range) {
        a.note = fmt::format("beta range empty: c_F dt / 2 = {:.17g} >= beta_3 = 95/96", 0.5 * a.cf_dt);
        a.certified = false;
    } else if (dec.beta < range->first) {
        a.note = fmt::format("beta = {:.17g} is below c_F dt / 2 = {:.17g}", dec.beta, range->first);
        a.certified = false;
    } else if (!(dec.beta < range->second)) {
        a.note = fmt::format("beta = {:.17g} is not below beta_3 = 95/96", dec.beta);
        a.certified = false;
    }
    if (!a.certified && !opts.force) throw PreconditionError("descent audit: " + a.note);

    const double dt = traj.dt;
    const double cf = f.semiconvexity();
    auto rtilde = [&](std::size_t m) {
        const Vector d[3] = {traj.states[m] - traj.states[m - 1], traj.states[m - 1] - traj.states[m - 2],
                             traj.states[m - 2] - traj.states[m - 3]};
        return lift(dec.r_tilde, std::span<const Vector>(d, 3)) / dt;
    };

    a.initial_lyapunov = hatF(dec, f, dt, LyapunovState::at(traj, 2));
    double prev = a.initial_lyapunov;
    double cumulative = 0.0;
    double sum_margin = 0.0;
    a.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t m = 3; m < traj.size(); ++m) {
        AuditRow row;
        row.step = m;
        row.lyapunov = hatF(dec, f, dt, LyapunovState::at(traj, m));
        row.r_term = rtilde(m);
        row.margin = prev - row.lyapunov - row.r_term;
        cumulative += row.r_term;
        sum_margin += row.margin;
        row.cumulative_r = cumulative;

        const Vector du = traj.states[m] - traj.states[m - 1];
        const Vector& w = traj.w[m];
        if (w.size() == du.size()) {
            row.w_norm = w.norm();
            row.slope_gap = f.value(traj.states[m - 1]) - f.value(traj.states[m]) + w.dot(du) + 0.5 * cf * du.squaredNorm();
        } else {
            row.w_norm = std::numeric_limits<double>::quiet_NaN();
            row.slope_gap = std::numeric_limits<double>::quiet_NaN();
        }

        const double tol = opts.tolerance * (1.0 + std::abs(row.lyapunov));
        a.min_margin = std::min(a.min_margin, row.margin);
        if (row.margin < -tol) a.descent_ok = false;
        if (row.lyapunov > prev + tol) a.monotone = false;
        const double ftol = opts.tolerance * (1.0 + std::abs(f.value(traj.states[m])));
        if (!std::isnan(row.slope_gap) && row.slope_gap < -ftol) a.slope_ok = false;
        prev = row.lyapunov;
        a.rows.push_back(row);
    }
    if (a.rows.empty()) a.min_margin = 0.0;

    const double lhs = a.initial_lyapunov - prev;
    const double rhs = sum_margin + cumulative;
    a.telescoping_defect = std::abs(lhs - rhs) / (1.0 + std::abs(a.initial_lyapunov) + std::abs(prev));
    return a;
}

BudgetCheck budget_check(const DescentAudit& audit, double lower_bound) {
    BudgetCheck b;
    const double start = audit.rows.empty() ? audit.initial_lyapunov : audit.rows.front().lyapunov;
    b.budget = start - lower_bound;
    for (std::size_t i = 1; i < audit.rows.size(); ++i) b.sum_r += audit.rows[i].r_term;
    b.ok = b.sum_r <= b.budget + 1e-8 * (1.0 + std::abs(b.budget));
    return b;
}

namespace {

double diameter(const StateList& s, std::size_t from) {
    double d = 0.0;
    for (std::size_t i = from; i < s.size(); ++i)
        for (std::size_t j = i + 1; j < s.size(); ++j) d = std::max(d, (s[i] - s[j]).norm());
    return d;
}

bool is_polynomial(const SemiconvexFunction& f) {
    return dynamic_cast<const QuadraticEnergy*>(&f) || dynamic_cast<const AllenCahn1D*>(&f) ||
           dynamic_cast<const PolynomialEnergy*>(&f);
}

}  // namespace

OmegaReport omega_diagnostics(const Trajectory& traj, const SemiconvexFunction& f) {
    OmegaReport r;
    r.single_limit_applicable = is_polynomial(f);
    const std::size_t n = traj.size();
    if (n < 2) return r;
    const std::size_t steps = n - 1;
    const std::size_t w = std::min<std::size_t>(std::max<std::size_t>(50, steps / 20), steps);
    r.window = w;
    const std::size_t from = n - 1 - w;
    for (std::size_t i = from + 1; i < n; ++i) r.max_diff_tail = std::max(r.max_diff_tail, traj.diff_norm(i));
    r.final_diff = traj.diff_norm(n - 1);
    r.tail_diameter = diameter(traj.states, from);
    r.tail_diameter_half = diameter(traj.states, n - 1 - std::max<std::size_t>(1, w / 2));
    r.tail_diameter_double = diameter(traj.states, n - 1 - std::min(steps, 2 * w));

    auto wnorm = [&](std::size_t i) {
        return traj.w[i].size() ? traj.w[i].norm() : std::numeric_limits<double>::quiet_NaN();
    };
    r.w_norm_first = wnorm(from);
    r.w_norm_last = wnorm(n - 1);
    return r;
}

BoundednessReport coercive_boundedness_check(const Trajectory& traj, const SemiconvexFunction& f,
                                             const Decomposition& dec) {
    if (!f.coercive()) throw PreconditionError(fmt::format("{} is not flagged coercive", f.name()));
    if (traj.k != 3) throw PreconditionError("boundedness check needs a BDF3 trajectory");
    if (traj.size() < 3) throw PreconditionError("boundedness check needs at least three states");
    BoundednessReport r;
    r.bound = hatF(dec, f, traj.dt, LyapunovState::at(traj, 2));
    r.sup_f = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        r.sup_norm = std::max(r.sup_norm, traj.states[i].norm());
        if (i >= 2) r.sup_f = std::max(r.sup_f, f.value(traj.states[i]));
    }
    r.bounded = std::isfinite(r.sup_f) && r.sup_f <= r.bound + 1e-10 * (1.0 + std::abs(r.bound));
    return r;
}

BarrierRecursion barrier_recursion(int k, int steps, const Trajectory& traj, const SemiconvexFunction& f) {
    const auto coef = bdf_coefficients(k);
    const Rational lambda = barrier_lambda(k);
    BarrierRecursion r;
    auto u = [](int n) { return Rational(n % 2 ? -1 : 1); };
    for (int n = k; n <= steps; ++n) {
        Rational lhs(0);
        for (int i = 0; i <= k; ++i) lhs += coef[i] * u(n - i);
        if (lhs != lambda * u(n)) r.exact = false;
    }

    const double dt = traj.dt;
    const double alpha = to_double(scheme_constants(k).alpha);
    r.min_diff = std::numeric_limits<double>::infinity();
    for (std::size_t m = 1; m < traj.size(); ++m) {
        const double d = traj.diff_norm(m);
        r.min_diff = std::min(r.min_diff, d);
        r.max_diff = std::max(r.max_diff, d);
    }
    for (std::size_t m = static_cast<std::size_t>(k); m < traj.size(); ++m) {
        const Vector b = bdf_rhs(k, std::span<const Vector>(traj.states.data() + m - k, k));
        const double res = (alpha * traj.states[m] - b + dt * f.gradient(traj.states[m])).norm();
        r.max_residual = std::max(r.max_residual, res);
    }
    if (traj.size() < 2) r.min_diff = 0.0;
    return r;
}

}  // namespace gradstab
