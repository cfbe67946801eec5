#include "gradstab/integrator.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace gradstab {

std::string to_string(Regime r) {
    switch (r) {
    case Regime::unique: return "unique";
    case Regime::multivalued_stable: return "multivalued-stable";
    case Regime::barrier: return "barrier";
    }
    return "?";
}

std::string to_string(BranchSelection::Rule r) {
    switch (r) {
    case BranchSelection::Rule::lowest_lyapunov: return "lowest-lyapunov";
    case BranchSelection::Rule::nearest_to_previous: return "nearest-to-previous";
    case BranchSelection::Rule::index: return "index";
    }
    return "?";
}

SchemeConstants scheme_constants(int k) {
    switch (k) {
    case 1: return {Rational(1), Rational(2), barrier_lambda(1)};
    case 2: return {Rational(3, 2), Rational(2), barrier_lambda(2)};
    case 3: return {Rational(11, 6), Rational(2) * beta3_exact(), barrier_lambda(3)};
    default: throw UnsupportedOrder(fmt::format("BDF order {} is not supported (expected 1, 2 or 3)", k));
    }
}

namespace {

// x < p/q decided exactly: a double times a small integer is exact in long double.
bool below(double x, const Rational& r) {
    return static_cast<long double>(x) * r.denominator() < static_cast<long double>(r.numerator());
}

}  // namespace

Regime classify_regime(int k, double cf_dt) {
    const auto c = scheme_constants(k);
    if (below(cf_dt, c.alpha)) return Regime::unique;
    if (below(cf_dt, c.two_beta)) return Regime::multivalued_stable;
    return Regime::barrier;
}

void SchemeConfig::validate() const {
    scheme_constants(k);
    if (!(dt > 0.0)) throw DomainError(fmt::format("scheme: dt = {} must be positive", dt));
    if (max_steps < 0) throw DomainError("scheme: max_steps must be nonnegative");
    if (!(solver_tol > 0.0)) throw DomainError("scheme: solver_tol must be positive");
    if (stop_window < 1) throw DomainError("scheme: stop_window must be at least 1");
    if (grid_cells < 2) throw DomainError("scheme: grid_cells must be at least 2");
}

std::vector<Rational> bdf_coefficients(int k) {
    scheme_constants(k);
    std::vector<Rational> coef(k + 1, Rational(0));
    for (int j = 1; j <= k; ++j) {
        std::int64_t binom = 1;
        for (int i = 0; i <= j; ++i) {
            coef[i] += Rational((i % 2 ? -1 : 1) * binom, j);
            binom = binom * (j - i) / (i + 1);
        }
    }
    return coef;
}

Vector bdf_rhs(int k, std::span<const Vector> history) {
    const auto coef = bdf_coefficients(k);
    if (history.size() != static_cast<std::size_t>(k))
        throw ShapeError(fmt::format("bdf_rhs: BDF{} needs {} history states, got {}", k, k, history.size()));
    Vector b = Vector::Zero(history.front().size());
    for (int i = 1; i <= k; ++i) {
        const auto& u = history[k - i];
        if (u.size() != b.size()) throw ShapeError("bdf_rhs: history states of different lengths");
        b -= to_double(coef[i]) * u;
    }
    return b;
}

double step_residual(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& b, const Vector& u) {
    return (cfg.alpha_value() * u - b + cfg.dt * f.gradient(u)).norm();
}

Vector solve_step_unique(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& b) {
    const double alpha = cfg.alpha_value();
    if (!(f.semiconvexity() * cfg.dt < alpha))
        throw PreconditionError(fmt::format("solve_step_unique: c_F dt = {:.17g} is not below alpha_{} = {}",
                                      f.semiconvexity() * cfg.dt, cfg.k, to_string(cfg.alpha())));
    const double tau = cfg.dt / alpha;
    Vector u;
    try {
        u = f.prox_unique(tau, b / alpha);
    } catch (const ConvergenceError& e) {
        throw ConvergenceError(fmt::format("implicit step failed: {}", e.what()));
    }
    const double res = step_residual(f, cfg, b, u);
    if (!(res <= cfg.solver_tol))
        throw ConvergenceError(fmt::format("implicit step residual {:.3e} exceeds solver_tol {:.3e}", res, cfg.solver_tol));
    return u;
}

// ---------------------------------------------------------------------------

BranchSelection BranchSelection::lowest_lyapunov(std::optional<QuadraticForm2> q) {
    BranchSelection s;
    s.rule_ = Rule::lowest_lyapunov;
    s.q_ = std::move(q);
    return s;
}

BranchSelection BranchSelection::nearest_to_previous() {
    BranchSelection s;
    s.rule_ = Rule::nearest_to_previous;
    return s;
}

BranchSelection BranchSelection::index(std::size_t i) {
    BranchSelection s;
    s.rule_ = Rule::index;
    s.index_ = i;
    return s;
}

std::size_t BranchSelection::select(const SemiconvexFunction& f, double dt, std::span<const Vector> candidates,
                                    std::span<const Vector> history) const {
    if (candidates.empty()) throw DomainError("select: no candidates");
    if (rule_ == Rule::index) return std::min(index_, candidates.size() - 1);

    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const Vector& u = candidates[i];
        double score;
        if (rule_ == Rule::nearest_to_previous) {
            score = (u - history.back()).norm();
        } else {
            score = f.value(u);
            if (q_ && history.size() >= 2) {
                const Vector d1 = u - history.back();
                const Vector d2 = history.back() - history[history.size() - 2];
                const Vector pair[2] = {d1, d2};
                score += lift(*q_, std::span<const Vector>(pair, 2)) / dt;
            }
        }
        if (score < best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

StateList bootstrap(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& u0, BootstrapMode mode,
                    const StateList& provided) {
    cfg.validate();
    if (u0.size() != f.dim()) throw ShapeError("bootstrap: U0 has the wrong length");
    if (f.subgradient(u0).empty()) throw DomainError("bootstrap: U0 is outside dom(dF)");
    if (mode == BootstrapMode::exact_list) {
        if (provided.size() != static_cast<std::size_t>(cfg.k))
            throw ConfigError(fmt::format("bootstrap: exact-list mode needs {} states, got {}", cfg.k, provided.size()));
        for (const auto& u : provided)
            if (u.size() != f.dim()) throw ShapeError("bootstrap: provided state has the wrong length");
        return provided;
    }
    StateList states{u0};
    for (int order = 1; order < cfg.k; ++order) {
        SchemeConfig lower = cfg;
        lower.k = order;
        lower.max_steps = 1;
        lower.stop_tol = 0.0;
        const auto t = run(f, lower, StateList(states.end() - order, states.end()), BranchSelection::nearest_to_previous());
        states.push_back(t.states.back());
    }
    return states;
}

Trajectory run(const SemiconvexFunction& f, const SchemeConfig& cfg, const StateList& init,
               const BranchSelection& selection) {
    cfg.validate();
    if (init.size() != static_cast<std::size_t>(cfg.k))
        throw ShapeError(fmt::format("run: BDF{} needs {} initial states, got {}", cfg.k, cfg.k, init.size()));
    for (const auto& u : init)
        if (u.size() != f.dim()) throw ShapeError("run: initial state has the wrong length");

    Trajectory t;
    t.k = cfg.k;
    t.dt = cfg.dt;
    t.states = init;
    t.residuals.assign(init.size(), std::numeric_limits<double>::quiet_NaN());
    t.w.assign(init.size(), Vector());
    t.branch_count.assign(init.size(), 0);
    t.branch_chosen.assign(init.size(), -1);

    const double cf_dt = f.semiconvexity() * cfg.dt;
    const bool unique = cfg.regime(f.semiconvexity()) == Regime::unique;
    BranchSelection sel = selection;
    if (sel.rule() == BranchSelection::Rule::lowest_lyapunov && !sel.form() && cfg.k == 3)
        sel = BranchSelection::lowest_lyapunov(decompose(default_beta(cf_dt)).q);

    int quiet = 0;
    for (int s = 0; s < cfg.max_steps; ++s) {
        const std::size_t n = t.states.size();
        const std::span<const Vector> history(t.states.data() + n - cfg.k, cfg.k);
        const Vector b = bdf_rhs(cfg.k, history);
        Vector u;
        int count = 1;
        int chosen = 0;
        try {
            if (unique) {
                u = solve_step_unique(f, cfg, b);
            } else {
                const auto sols = solve_step_multivalued(f, cfg, b);
                count = static_cast<int>(sols.roots.size());
                chosen = static_cast<int>(sel.select(f, cfg.dt, sols.roots, history));
                u = sols.roots[chosen];
            }
        } catch (const Error& e) {
            throw ConvergenceError(fmt::format("step {}: {}", n, e.what()));
        }
        const Vector w = f.gradient(u);
        const double res = (cfg.alpha_value() * u - b + cfg.dt * w).norm();
        if (!(res <= cfg.solver_tol))
            throw ConvergenceError(
                fmt::format("step {}: inclusion residual {:.3e} exceeds solver_tol {:.3e}", n, res, cfg.solver_tol));
        t.states.push_back(u);
        t.residuals.push_back(res);
        t.w.push_back(w);
        t.branch_count.push_back(count);
        t.branch_chosen.push_back(chosen);

        if (cfg.stop_tol > 0.0) {
            quiet = t.diff_norm(t.states.size() - 1) <= cfg.stop_tol ? quiet + 1 : 0;
            if (quiet >= cfg.stop_window) {
                t.stopped_early = true;
                break;
            }
        }
    }
    return t;
}

}  // namespace gradstab
