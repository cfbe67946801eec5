#include "gradstab/integrator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace gradstab {

namespace {

void push_distinct(std::vector<Vector>& out, const Vector& u, double sep) {
    for (const auto& v : out)
        if ((v - u).norm() <= sep) return;
    out.push_back(u);
}

StepSolutions scalar_roots(const SemiconvexFunction& f, const SchemeConfig& cfg, double b) {
    const double alpha = cfg.alpha_value();
    auto res = [&](double x) { return alpha * x + cfg.dt * f.gradient(Vector::Constant(1, x))[0] - b; };
    auto slope = [&](double x) { return alpha + cfg.dt * f.hessian(Vector::Constant(1, x))(0, 0); };

    const double center = b / alpha;
    const double radius = std::max(10.0, 2.0 * std::abs(b) / alpha);
    const int cells = cfg.grid_cells;
    std::vector<double> x(cells + 1), r(cells + 1);
    std::vector<bool> flat(cells + 1);
    for (int i = 0; i <= cells; ++i) {
        x[i] = center - radius + 2.0 * radius * i / cells;
        r[i] = res(x[i]);
        flat[i] = std::abs(r[i]) <= 1e-12 * (1.0 + std::abs(b) + alpha * std::abs(x[i]));
    }

    StepSolutions out;
    std::vector<Vector> roots;
    const double sep = 10.0 * cfg.solver_tol;

    // Runs of at least three flat nodes: the equation vanishes on an interval.
    std::vector<bool> in_run(cells + 1, false);
    for (int i = 0; i <= cells;) {
        if (!flat[i]) {
            ++i;
            continue;
        }
        int j = i;
        while (j + 1 <= cells && flat[j + 1]) ++j;
        if (j - i >= 2) {
            out.degenerate_intervals.emplace_back(x[i], x[j]);
            for (int m = i; m <= j; ++m) in_run[m] = true;
            const int reps = std::min(9, j - i + 1);
            for (int q = 0; q < reps; ++q) {
                const int m = i + static_cast<int>(std::lround(static_cast<double>(q) * (j - i) / (reps - 1)));
                push_distinct(roots, Vector::Constant(1, x[m]), sep);
            }
        }
        i = j + 1;
    }

    for (int i = 0; i <= cells; ++i)
        if (!in_run[i] && r[i] == 0.0) push_distinct(roots, Vector::Constant(1, x[i]), sep);

    for (int i = 0; i < cells; ++i) {
        if (in_run[i] && in_run[i + 1]) continue;
        if (!(r[i] * r[i + 1] < 0.0)) continue;
        double lo = x[i], hi = x[i + 1];
        const bool rising = r[i] < 0.0;
        while (true) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const double rm = res(mid);
            if (rm == 0.0) {
                lo = hi = mid;
                break;
            }
            ((rm < 0.0) == rising ? lo : hi) = mid;
        }
        double root = std::abs(res(lo)) <= std::abs(res(hi)) ? lo : hi;
        // One Newton polish; kept only if it does not increase the residual.
        const double s = slope(root);
        if (s != 0.0) {
            const double polished = root - res(root) / s;
            if (polished >= x[i] && polished <= x[i + 1] && std::abs(res(polished)) <= std::abs(res(root)))
                root = polished;
        }
        push_distinct(roots, Vector::Constant(1, root), sep);
    }

    std::sort(roots.begin(), roots.end(), [](const Vector& a, const Vector& c) { return a[0] < c[0]; });
    out.roots = std::move(roots);
    return out;
}

StepSolutions newton_roots(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& b) {
    const double alpha = cfg.alpha_value();
    const int m = f.dim();
    auto residual = [&](const Vector& u) -> Vector { return alpha * u - b + cfg.dt * f.gradient(u); };

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    const Vector center = b / alpha;
    const double spread = std::max(1.0, center.norm()) / std::sqrt(static_cast<double>(m));

    // Minimisers of alpha/2 |U|^2 - <b, U> + dt F(U) always solve the step.
    std::vector<Vector> roots;
    ProxOptions popts;
    popts.seed = cfg.seed;
    popts.starts = cfg.newton_starts;
    for (const auto& p : f.prox(cfg.dt / alpha, center, popts))
        if (residual(p).norm() <= cfg.solver_tol) push_distinct(roots, p, 10.0 * cfg.solver_tol);

    for (int s = 0; s <= cfg.newton_starts; ++s) {
        Vector u = center;
        if (s > 0)
            for (int i = 0; i < m; ++i) u[i] += spread * nd(rng);
        Vector r = residual(u);
        double merit = 0.5 * r.squaredNorm();
        bool converged = false;
        for (int it = 0; it < 200; ++it) {
            if (r.norm() <= 0.1 * cfg.solver_tol) {
                converged = true;
                break;
            }
            Matrix jac = cfg.dt * f.hessian(u);
            jac.diagonal().array() += alpha;
            const Vector d = -jac.fullPivLu().solve(r);
            if (!d.allFinite()) break;
            // Armijo on 1/2 |R|^2; the Newton direction has slope -|R|^2.
            double step = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 50; ++ls, step *= 0.5) {
                const Vector trial = u + step * d;
                const Vector rt = residual(trial);
                const double mt = 0.5 * rt.squaredNorm();
                if (mt <= (1.0 - 2e-4 * step) * merit) {
                    u = trial;
                    r = rt;
                    merit = mt;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                // Near a singular Jacobian the merit stalls; a full step escapes.
                u += d;
                r = residual(u);
                merit = 0.5 * r.squaredNorm();
            }
        }
        if (converged || r.norm() <= cfg.solver_tol) push_distinct(roots, u, 10.0 * cfg.solver_tol);
    }
    StepSolutions out;
    out.roots = std::move(roots);
    return out;
}

}  // namespace

StepSolutions solve_step_multivalued(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& b) {
    cfg.validate();
    if (b.size() != f.dim()) throw ShapeError("solve_step_multivalued: b has the wrong length");
    auto sols = f.dim() == 1 ? scalar_roots(f, cfg, b[0]) : newton_roots(f, cfg, b);
    if (sols.roots.empty())
        throw ConvergenceError(fmt::format(
            "solve_step_multivalued: no solution found for BDF{} with dt = {:.17g}; a solution always exists, so the "
            "solver failed",
            cfg.k, cfg.dt));
    return sols;
}

}  // namespace gradstab
