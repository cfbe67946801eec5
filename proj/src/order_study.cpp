#include "gradstab/integrator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <memory>

namespace gradstab {

std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("loglog_slope: x and y differ in length");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    if (lx.size() < 2) return std::nullopt;
    const double n = static_cast<double>(lx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (sxx == 0.0) return std::nullopt;
    return sxy / sxx;
}

OrderStudy order_study(const SemiconvexFunction& f, int k, const Vector& u0, double horizon,
                       const std::vector<double>& dts, const Reference& reference, bool exact_start) {
    if (!reference) throw ConfigError("order_study: no reference solution");
    if (!(horizon > 0.0)) throw DomainError("order_study: horizon must be positive");
    if (dts.empty()) throw ConfigError("order_study: empty dt list");

    OrderStudy study;
    study.k = k;
    for (double dt : dts) {
        SchemeConfig cfg;
        cfg.k = k;
        cfg.dt = dt;
        cfg.stop_tol = 0.0;
        cfg.solver_tol = 1e-10;
        cfg.validate();
        const double n_real = horizon / dt;
        const int steps = static_cast<int>(std::lround(n_real));
        if (std::abs(n_real - steps) > 1e-9 * n_real)
            study.warnings.push_back(fmt::format("dt = {} does not divide the horizon {}; using {} steps", dt, horizon, steps));
        if (steps < k) throw ConfigError(fmt::format("order_study: dt = {} leaves fewer than {} steps", dt, k));

        StateList init;
        if (exact_start) {
            for (int j = 0; j < k; ++j) init.push_back(reference(j * dt));
        } else {
            init = bootstrap(f, cfg, u0, BootstrapMode::ramp_up);
        }
        cfg.max_steps = steps - (k - 1);
        const auto traj = run(f, cfg, init);
        study.rows.push_back({dt, steps, (traj.states.back() - reference(steps * dt)).norm()});
    }

    auto sorted = study.rows;
    std::sort(sorted.begin(), sorted.end(), [](const OrderRow& a, const OrderRow& b) { return a.dt > b.dt; });
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].error > sorted[i - 1].error) study.monotone = false;
    if (!study.monotone) study.warnings.push_back("errors do not decrease monotonically with dt");

    std::vector<double> x, y;
    for (const auto& r : study.rows) {
        x.push_back(r.dt);
        y.push_back(r.error);
    }
    study.slope = loglog_slope(x, y);
    return study;
}

Reference fine_run_reference(const SemiconvexFunction& f, const Vector& u0, double dt_ref) {
    if (!(dt_ref > 0.0)) throw DomainError("fine_run_reference: dt_ref must be positive");
    struct Cache {
        SchemeConfig cfg;
        StateList states;
    };
    auto cache = std::make_shared<Cache>();
    cache->cfg.k = 3;
    cache->cfg.dt = dt_ref;
    cache->cfg.stop_tol = 0.0;
    cache->states = bootstrap(f, cache->cfg, u0, BootstrapMode::ramp_up);
    const SemiconvexFunction* fp = &f;
    return [cache, fp](double t) -> Vector {
        if (t < 0.0) throw DomainError("reference: negative time");
        const double pos = t / cache->cfg.dt;
        const auto need = static_cast<std::size_t>(std::ceil(pos)) + 1;
        if (cache->states.size() < need) {
            SchemeConfig cfg = cache->cfg;
            cfg.max_steps = static_cast<int>(need - cache->states.size());
            const auto tr = run(*fp, cfg, StateList(cache->states.end() - 3, cache->states.end()));
            cache->states.insert(cache->states.end(), tr.states.begin() + 3, tr.states.end());
        }
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double w = pos - static_cast<double>(i);
        if (w == 0.0) return cache->states[i];
        return (1.0 - w) * cache->states[i] + w * cache->states[i + 1];
    };
}

}  // namespace gradstab
