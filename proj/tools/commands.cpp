#include "commands.hpp"

#include "gradstab/export.hpp"
#include "gradstab/lyapunov.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace gradstab::cli {

using nlohmann::json;

namespace {

std::ostream& out(Context& ctx) { return ctx.out ? *ctx.out : std::cout; }

std::string frac(const Rational& r) { return fmt::format("{} ({:.17g})", to_string(r), to_double(r)); }

void write_file(const Context& ctx, const std::string& name, const std::string& content) {
    if (!ctx.out_dir) return;
    std::filesystem::create_directories(*ctx.out_dir);
    const auto path = *ctx.out_dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
    f << content;
}

void write_json(const Context& ctx, const std::string& name, const json& j) { write_file(ctx, name, j.dump(2) + "\n"); }

json with_meta(Context& ctx, const std::string& kind, json body) {
    body["schema"] = kSchemaVersion;
    body["kind"] = kind;
    body["config"] = ctx.config.to_json();
    return body;
}

std::uint64_t seed_for(Context& ctx, const std::string& section, std::uint64_t fallback) {
    if (ctx.seed) {
        ctx.config.set(section, "seed", std::to_string(*ctx.seed));
        return *ctx.seed;
    }
    const std::string s = ctx.config.get(section, "seed", std::to_string(fallback));
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("[{}] seed = '{}' is not an unsigned integer", section, s));
    }
}

Rational parse_rational(const std::string& s) {
    const auto slash = s.find('/');
    try {
        if (slash == std::string::npos) {
            std::size_t used = 0;
            const auto v = std::stoll(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return Rational(v);
        }
        return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("'{}' is not a fraction", s));
    }
}

// Decimal or p/q. Returns the double and, for fractions, the exact value.
std::pair<double, std::optional<Rational>> parse_number(const std::string& s) {
    if (s.find('/') != std::string::npos) {
        const Rational r = parse_rational(s);
        return {to_double(r), r};
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return {v, std::nullopt};
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("'{}' is not a number", s));
    }
}

SchemeConfig scheme_from(Context& ctx) {
    auto& c = ctx.config;
    SchemeConfig s;
    s.k = c.get_int("scheme", "k", s.k);
    s.dt = c.get_double("scheme", "dt", s.dt);
    s.max_steps = c.get_int("scheme", "steps", s.max_steps);
    s.solver_tol = c.get_double("scheme", "solver_tol", s.solver_tol);
    s.stop_tol = c.get_double("scheme", "stop_tol", s.stop_tol);
    s.stop_window = c.get_int("scheme", "stop_window", s.stop_window);
    s.newton_starts = c.get_int("scheme", "newton_starts", s.newton_starts);
    s.grid_cells = c.get_int("scheme", "grid_cells", s.grid_cells);
    s.seed = seed_for(ctx, "scheme", s.seed);
    try {
        s.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return s;
}

EnergyPtr energy_from(Context& ctx, const std::string& fallback_name, const ParamMap& fallback_params = {}) {
    const std::string name = ctx.config.get("energy", "name", fallback_name);
    for (const auto& [k, v] : fallback_params)
        if (!ctx.config.has("energy", k)) ctx.config.set("energy", k, v);
    ParamMap params = ctx.config.section("energy");
    params.erase("name");
    try {
        return make_energy(name, params);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(fmt::format("energy '{}': {}", name, e.what()));
    }
}

Vector initial_state(Context& ctx, int dim) {
    auto vals = ctx.config.get_list("init", "u0");
    if (vals.empty()) {
        vals = {0.0};
        ctx.config.set("init", "u0", "0");
    }
    Vector u(dim);
    if (vals.size() == 1) {
        u.setConstant(vals[0]);
    } else if (static_cast<int>(vals.size()) == dim) {
        for (int i = 0; i < dim; ++i) u[i] = vals[i];
    } else {
        throw ConfigError(fmt::format("[init] u0 has {} entries, the energy has dimension {}", vals.size(), dim));
    }
    const double amp = ctx.config.get_double("init", "cosine_amplitude", 0.0);
    for (int i = 0; i < dim; ++i) u[i] += amp * std::cos(M_PI * (i + 0.5) / dim);
    return u;
}

StateList parse_states(const std::string& text, int dim) {
    StateList states;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        std::vector<double> v;
        std::stringstream is(item);
        std::string x;
        while (std::getline(is, x, ',')) v.push_back(parse_number(x).first);
        if (v.size() == 1 && dim > 1) v.assign(dim, v[0]);
        if (static_cast<int>(v.size()) != dim)
            throw ConfigError(fmt::format("[init] states: entry '{}' does not have {} components", item, dim));
        states.push_back(Eigen::Map<Vector>(v.data(), dim));
    }
    return states;
}

StateList initial_states(Context& ctx, const SemiconvexFunction& f, const SchemeConfig& cfg) {
    const std::string mode = ctx.config.get("init", "bootstrap", "ramp-up");
    if (mode == "exact-list") {
        if (!ctx.config.has("init", "states"))
            throw ConfigError("[init] bootstrap = exact-list needs [init] states");
        const auto states = parse_states(ctx.config.get("init", "states", ""), f.dim());
        return bootstrap(f, cfg, states.front(), BootstrapMode::exact_list, states);
    }
    if (mode == "constant") return StateList(cfg.k, initial_state(ctx, f.dim()));
    if (mode != "ramp-up") throw ConfigError(fmt::format("[init] bootstrap = '{}' is not known", mode));
    return bootstrap(f, cfg, initial_state(ctx, f.dim()), BootstrapMode::ramp_up);
}

BranchSelection selection_from(Context& ctx) {
    const std::string s = ctx.config.get("scheme", "selection", "lowest-lyapunov");
    if (s == "lowest-lyapunov") return BranchSelection::lowest_lyapunov();
    if (s == "nearest-to-previous") return BranchSelection::nearest_to_previous();
    if (s.rfind("index:", 0) == 0) {
        try {
            return BranchSelection::index(std::stoul(s.substr(6)));
        } catch (const std::exception&) {
        }
    }
    throw ConfigError(fmt::format("[scheme] selection = '{}' is not known", s));
}

void print_constants(std::ostream& os, int k) {
    const auto c = scheme_constants(k);
    fmt::print(os, "BDF{}: alpha_{} = {}, 2 beta_{} = {}, lambda_{} = {}\n", k, k, frac(c.alpha), k, frac(c.two_beta), k,
               frac(c.lambda));
}

std::string trajectory_text(const Context& ctx, const Trajectory& t) {
    if (ctx.format == Format::json) return trajectory_json(t, ctx.config.to_json()).dump(2) + "\n";
    std::ostringstream os;
    write_trajectory_csv(os, t);
    return os.str();
}

json audit_rows_json(const DescentAudit& a) {
    json rows = json::array();
    for (const auto& r : a.rows)
        rows.push_back({{"step", r.step},
                        {"lyapunov", r.lyapunov},
                        {"margin", r.margin},
                        {"r_term", r.r_term},
                        {"w_norm", std::isfinite(r.w_norm) ? json(r.w_norm) : json(nullptr)},
                        {"cumulative_r", r.cumulative_r},
                        {"slope_gap", std::isfinite(r.slope_gap) ? json(r.slope_gap) : json(nullptr)}});
    return rows;
}

void write_audit(Context& ctx, const std::string& stem, const DescentAudit& a, const BudgetCheck& b,
                 const OmegaReport& o) {
    json summary = audit_json(a, b, o, ctx.config.to_json());
    if (ctx.format == Format::json) {
        summary["rows"] = audit_rows_json(a);
        write_json(ctx, stem + ".json", summary);
    } else {
        std::ostringstream os;
        write_audit_csv(os, a);
        write_file(ctx, stem + ".csv", os.str());
        write_json(ctx, stem + ".summary.json", summary);
    }
}

std::string ext(const Context& ctx) { return ctx.format == Format::json ? ".json" : ".csv"; }

}  // namespace

// ---------------------------------------------------------------------------

int cmd_certify_beta3(Context& ctx) {
    auto& os = out(ctx);
    MaximizeOptions opts;
    opts.seed = seed_for(ctx, "certify", opts.seed);
    opts.starts = ctx.config.get_int("certify", "starts", opts.starts);
    const auto r = maximize_f(opts);

    const double exact = beta3();
    const double gap = std::abs(r.beta_star - exact);
    const auto p = optimal_point();
    const double arg_err = std::max({std::abs(r.argmax.a - p.a), std::abs(r.argmax.b - p.b), std::abs(r.argmax.c - p.c)});

    const auto exact_dec = optimal_decomposition_exact();
    const auto defect = identity_defect(exact_dec);
    const bool exact_zero = defect == ExactForm3{};
    const Decomposition float_dec{exact_dec.q.to_double_form(), exact_dec.r_tilde.to_double_form(),
                                  to_double(exact_dec.beta), p, 1.0};
    const double float_res = identity_residual(float_dec);
    const Rational witness_f = f_eval_exact(classical_witness_exact());

    fmt::print(os, "beta_3 estimate     {:.17g}\n", r.beta_star);
    fmt::print(os, "beta_3 exact        {}\n", frac(beta3_exact()));
    fmt::print(os, "gap                 {:.3e}\n", gap);
    fmt::print(os, "argmax (a, b, c)    ({:.17g}, {:.17g}, {:.17g})\n", r.argmax.a, r.argmax.b, r.argmax.c);
    fmt::print(os, "expected            (1/sqrt6, 1/sqrt6, -7/(4 sqrt6)) = ({:.17g}, {:.17g}, {:.17g})\n", p.a, p.b, p.c);
    fmt::print(os, "argmax error        {:.3e}  (b - a = {:.3e})\n", arg_err, r.argmax.b - r.argmax.a);
    fmt::print(os, "open-set search     {:.17g} at ({:.6g}, {:.6g}, {:.6g})\n", r.cross_check, r.cross_check_point.a,
               r.cross_check_point.b, r.cross_check_point.c);
    fmt::print(os, "closed-form identity exact defect {}, float residual {:.3e}\n", exact_zero ? "0" : "NONZERO",
               float_res);
    fmt::print(os, "f at the classical witness = {}\n", frac(witness_f));

    write_json(ctx, "certify_beta3.json",
               with_meta(ctx, "certify-beta3",
                         {{"beta_star", r.beta_star},
                          {"beta_exact", rational_json(beta3_exact())},
                          {"gap", gap},
                          {"argmax", {r.argmax.a, r.argmax.b, r.argmax.c}},
                          {"argmax_error", arg_err},
                          {"cross_check", r.cross_check},
                          {"identity_exact_zero", exact_zero},
                          {"identity_float_residual", float_res},
                          {"witness_f", rational_json(witness_f)},
                          {"trace", r.trace}}));

    const bool pass = gap <= 1e-9 && arg_err <= 1e-6 && exact_zero && float_res <= 1e-14 && witness_f == Rational(5, 6);
    fmt::print(os, "{}\n", pass ? "certified" : "NOT certified");
    return pass ? ExitCode::ok : ExitCode::numerical_failure;
}

int cmd_decompose(Context& ctx, const std::optional<std::string>& beta_arg) {
    auto& os = out(ctx);
    const std::string text = beta_arg ? *beta_arg : ctx.config.get("decompose", "beta", "95/96");
    ctx.config.set("decompose", "beta", text);
    const auto [beta, exact] = parse_number(text);
    if (exact && *exact > beta3_exact())
        throw InfeasibleError(fmt::format("beta = {} exceeds beta_3 = 95/96", to_string(*exact)));

    const Decomposition d = (exact && *exact == beta3_exact()) ? decompose(beta3()) : decompose(beta);
    auto print_form = [&](const char* name, const auto& q) {
        fmt::print(os, "{} coefficients:\n", name);
        const auto m = q.matrix();
        for (int i = 0; i < m.rows(); ++i) {
            fmt::print(os, "  ");
            for (int j = 0; j < m.cols(); ++j) fmt::print(os, "{:>24.17g}", m(i, j));
            fmt::print(os, "\n");
        }
        const auto minors = q.leading_minors();
        fmt::print(os, "  leading minors:");
        for (double x : minors) fmt::print(os, " {:.6e}", x);
        fmt::print(os, "\n  eigenvalues:");
        const auto ev = q.eigenvalues();
        for (int i = 0; i < ev.size(); ++i) fmt::print(os, " {:.6e}", ev[i]);
        fmt::print(os, "\n  definiteness: {}\n", to_string(classify(q, 0.0).by_minors));
    };
    fmt::print(os, "beta = {}\n", exact ? frac(*exact) : fmt::format("{:.17g}", beta));
    fmt::print(os, "q: a = {:.17g}, b = {:.17g}, c = {:.17g}\n", d.param.a, d.param.b, d.param.c);
    print_form("q", d.q);
    print_form("r~", d.r_tilde);
    fmt::print(os, "identity residual {:.3e}\n", identity_residual(d));

    json body = decomposition_json(d);
    if (exact) body["beta_fraction"] = to_string(*exact);
    write_json(ctx, "decomposition.json", with_meta(ctx, "decomposition", body));
    return ExitCode::ok;
}

int cmd_run(Context& ctx) {
    auto& os = out(ctx);
    const auto f = energy_from(ctx, "allen-cahn");
    const auto cfg = scheme_from(ctx);
    const auto sel = selection_from(ctx);
    const auto init = initial_states(ctx, *f, cfg);

    const double cf_dt = f->semiconvexity() * cfg.dt;
    const Regime regime = cfg.regime(f->semiconvexity());
    print_constants(os, cfg.k);
    fmt::print(os, "energy {} (dimension {}), c_F = {:.17g} [{}], dt = {:.17g}, c_F dt = {:.17g}\n", f->name(), f->dim(),
               f->semiconvexity(), f->semiconvexity_provenance(), cfg.dt, cf_dt);
    fmt::print(os, "regime: {}\n", to_string(regime));

    const auto traj = run(*f, cfg, init, sel);
    fmt::print(os, "steps taken {}, states {}, stopped early {}\n", traj.size() - init.size(), traj.size(),
               traj.stopped_early);
    if (traj.size() > 1) fmt::print(os, "final |dU| = {:.3e}\n", traj.diff_norm(traj.size() - 1));
    write_file(ctx, "trajectory" + ext(ctx), trajectory_text(ctx, traj));

    if (cfg.k != 3) {
        fmt::print(os, "descent audit: only defined for BDF3, skipped\n");
        return ExitCode::ok;
    }
    const bool has_beta = ctx.config.has("audit", "beta");
    const auto range = admissible_beta_range(cf_dt);
    AuditOptions opts;
    opts.force = ctx.config.get_bool("audit", "force", false);
    double beta = has_beta ? parse_number(ctx.config.get("audit", "beta", "")).first : 0.0;
    if (!has_beta) {
        if (!range && !opts.force) {
            fmt::print(os, "descent audit: beta range empty (c_F dt / 2 = {:.17g} >= 95/96); descent not certifiable\n",
                       0.5 * cf_dt);
            return ExitCode::ok;
        }
        beta = default_beta(cf_dt);
        ctx.config.set("audit", "beta", fmt::format("{}", beta));
    }
    const auto dec = decompose(beta);
    DescentAudit audit;
    try {
        audit = descent_audit(traj, dec, *f, opts);
    } catch (const PreconditionError& e) {
        fmt::print(os, "descent audit: {}; descent not certifiable\n", e.what());
        return ExitCode::ok;
    }
    const auto budget = budget_check(audit, f->lower_bound());
    const auto omega = omega_diagnostics(traj, *f);
    fmt::print(os, "descent audit (beta = {:.17g}{}): min margin {:.3e}, descent {}, monotone {}, slope inequality {}\n", beta,
               audit.certified ? "" : ", forced", audit.min_margin, audit.descent_ok, audit.monotone, audit.slope_ok);
    fmt::print(os, "budget: sum R / dt = {:.17g} <= {:.17g}: {}\n", budget.sum_r, budget.budget, budget.ok);
    fmt::print(os, "tail (window {}): max |dU| {:.3e}, diameter {:.3e} (half window {:.3e}, double {:.3e})\n",
               omega.window, omega.max_diff_tail, omega.tail_diameter, omega.tail_diameter_half,
               omega.tail_diameter_double);
    if (f->coercive()) {
        const auto bd = coercive_boundedness_check(traj, *f, dec);
        fmt::print(os, "boundedness: sup F(U^n) = {:.17g} <= {:.17g}: {}, sup |U^n| = {:.6g}\n", bd.sup_f, bd.bound,
                   bd.bounded, bd.sup_norm);
    }
    write_audit(ctx, "audit", audit, budget, omega);
    if (audit.certified && !(audit.descent_ok && audit.slope_ok)) {
        fmt::print(os, "descent violated in a certified regime\n");
        return ExitCode::numerical_failure;
    }
    return ExitCode::ok;
}

int cmd_counterexample(Context& ctx, std::optional<int> k_arg) {
    auto& os = out(ctx);
    const int k = k_arg ? *k_arg : ctx.config.get_int("counterexample", "k", 3);
    ctx.config.set("counterexample", "k", std::to_string(k));
    if (k < 1 || k > 3) throw ConfigError(fmt::format("counterexample: k = {} must be 1, 2 or 3", k));
    const double dt = ctx.config.get_double("counterexample", "dt", 1.0);
    const int steps = ctx.config.get_int("counterexample", "steps", 1000);
    const double glue = ctx.config.get_double("counterexample", "glue_radius", 1.5);
    const double start = ctx.config.get_double("counterexample", "start", -1.0);
    if (std::abs(std::abs(start) - 1.0) != 0.0) throw ConfigError("counterexample: start must be 1 or -1");

    const auto f = barrier_function(k, dt, glue);
    SchemeConfig cfg;
    cfg.k = k;
    cfg.dt = dt;
    cfg.max_steps = steps;
    cfg.stop_tol = 0.0;
    cfg.solver_tol = 1e-12;
    cfg.seed = seed_for(ctx, "counterexample", cfg.seed);

    StateList init;
    for (int j = 0; j < k; ++j) init.push_back(Vector::Constant(1, j % 2 ? -start : start));
    // The middle of the three sorted roots is the one on the concave cap.
    const auto traj = run(*f, cfg, init, BranchSelection::index(1));
    const auto rec = barrier_recursion(k, steps + k - 1, traj, *f);

    double max_dev = 0.0;
    for (std::size_t n = 0; n < traj.size(); ++n)
        max_dev = std::max(max_dev, std::abs(traj.states[n][0] - (n % 2 ? -start : start)));

    const auto c = scheme_constants(k);
    print_constants(os, k);
    fmt::print(os, "lambda_{} = {}; c_F dt = {:.17g}, regime {}\n", k, frac(c.lambda), f->semiconvexity() * dt,
               to_string(cfg.regime(f->semiconvexity())));
    if (k == 1) fmt::print(os, "lambda_1 = 2 = 2 beta_1: the quadratic stability bound is sharp for BDF1\n");
    fmt::print(os, "rational recursion exact: {}\n", rec.exact);
    fmt::print(os, "max scheme residual {:.3e}, max |U^n - (-1)^n start| {:.3e}\n", rec.max_residual, max_dev);
    fmt::print(os, "|dU^n| in [{:.17g}, {:.17g}] over {} steps: no convergence\n", rec.min_diff, rec.max_diff, steps);

    json body{{"k", k},
              {"dt", dt},
              {"constants", scheme_constants_json(k)},
              {"rational_exact", rec.exact},
              {"max_residual", rec.max_residual},
              {"max_deviation", max_dev},
              {"min_diff", rec.min_diff},
              {"max_diff", rec.max_diff}};

    if (k == 3) {
        const double cf_dt = f->semiconvexity() * dt;
        if (!admissible_beta_range(cf_dt))
            fmt::print(os, "descent audit: beta range empty (c_F dt / 2 = {:.17g} > 95/96); descent not certifiable\n",
                       0.5 * cf_dt);
        // Diagnostic mode: audit with the largest admissible-looking beta anyway.
        AuditOptions opts;
        opts.force = true;
        const auto audit = descent_audit(traj, decompose(beta3() - 1e-6), *f, opts);
        const auto budget = budget_check(audit, f->lower_bound());
        fmt::print(os, "forced audit: min margin {:.6g}, budget sum {:.6g} vs {:.6g}: {}\n", audit.min_margin,
                   budget.sum_r, budget.budget, budget.ok ? "within" : "exceeded");
        body["forced_audit"] = {{"note", audit.note},
                                {"min_margin", audit.min_margin},
                                {"sum_r", budget.sum_r},
                                {"budget", budget.budget},
                                {"budget_ok", budget.ok}};
    }
    write_json(ctx, fmt::format("counterexample_k{}.summary.json", k), with_meta(ctx, "counterexample", body));
    write_file(ctx, fmt::format("counterexample_k{}{}", k, ext(ctx)), trajectory_text(ctx, traj));

    const bool pass = rec.exact && rec.max_residual <= 1e-13 && std::abs(rec.min_diff - 2.0) <= 1e-13 &&
                      std::abs(rec.max_diff - 2.0) <= 1e-13;
    fmt::print(os, "{}\n", pass ? "(-1)^n persists" : "(-1)^n NOT reproduced");
    return pass ? ExitCode::ok : ExitCode::numerical_failure;
}

int cmd_order_study(Context& ctx) {
    auto& os = out(ctx);
    const auto f = energy_from(ctx, "quadratic", {{"lambda", "1"}});
    auto orders = ctx.config.get_list("study", "orders");
    if (orders.empty()) {
        orders = {1, 2, 3};
        ctx.config.set("study", "orders", "1,2,3");
    }
    auto dts = ctx.config.get_list("study", "dts");
    if (dts.empty()) {
        dts = {0.1, 0.05, 0.025, 0.0125};
        ctx.config.set("study", "dts", "0.1,0.05,0.025,0.0125");
    }
    const double horizon = ctx.config.get_double("study", "horizon", 1.0);
    const bool exact_start = ctx.config.get_bool("study", "exact_start", true);
    const std::string ref_kind = ctx.config.get("study", "reference", "closed-form");
    if (!ctx.config.has("init", "u0")) ctx.config.set("init", "u0", "1");
    const Vector u0 = initial_state(ctx, f->dim());

    Reference ref;
    if (ref_kind == "closed-form") {
        const auto* q = dynamic_cast<const QuadraticEnergy*>(f.get());
        if (!q) throw ConfigError("order-study: closed-form reference needs the quadratic energy");
        Eigen::SelfAdjointEigenSolver<Matrix> es(q->a());
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw ConfigError("order-study: closed-form reference needs a positive definite matrix");
        const Vector star = es.eigenvectors() * (es.eigenvalues().cwiseInverse().asDiagonal() *
                                                 (es.eigenvectors().transpose() * q->b()));
        const Matrix vecs = es.eigenvectors();
        const Vector lam = es.eigenvalues();
        ref = [vecs, lam, star, u0](double t) -> Vector {
            const Vector decay = (-t * lam).array().exp();
            return star + vecs * (decay.asDiagonal() * (vecs.transpose() * (u0 - star)));
        };
    } else if (ref_kind == "fine-run") {
        ref = fine_run_reference(*f, u0, ctx.config.get_double("study", "dt_ref", 1e-4));
    } else {
        throw ConfigError(fmt::format("[study] reference = '{}' is not known (closed-form or fine-run)", ref_kind));
    }

    json studies = json::array();
    std::ostringstream csv;
    csv << "k,dt,steps,error\n";
    for (double kd : orders) {
        const int k = static_cast<int>(kd);
        if (k != kd) throw ConfigError("[study] orders must be integers");
        const auto st = order_study(*f, k, u0, horizon, dts, ref, exact_start);
        fmt::print(os, "BDF{}\n", k);
        json rows = json::array();
        for (const auto& r : st.rows) {
            fmt::print(os, "  dt {:<10g} steps {:>6} error {:.6e}\n", r.dt, r.steps, r.error);
            csv << k << ',' << format_real(r.dt) << ',' << r.steps << ',' << format_real(r.error) << '\n';
            rows.push_back({{"dt", r.dt}, {"steps", r.steps}, {"error", r.error}});
        }
        if (st.slope)
            fmt::print(os, "  slope {:.4f}\n", *st.slope);
        else
            fmt::print(os, "  slope undefined\n");
        for (const auto& w : st.warnings) fmt::print(os, "  warning: {}\n", w);
        studies.push_back({{"k", k},
                           {"rows", rows},
                           {"slope", st.slope ? json(*st.slope) : json(nullptr)},
                           {"monotone", st.monotone},
                           {"warnings", st.warnings}});
    }
    const json body = with_meta(ctx, "order-study", {{"studies", studies}});
    if (ctx.format == Format::json) {
        write_json(ctx, "order_study.json", body);
    } else {
        write_file(ctx, "order_study.csv", csv.str());
        write_json(ctx, "order_study.summary.json", body);
    }
    return ExitCode::ok;
}

int cmd_multivalued_demo(Context& ctx) {
    auto& os = out(ctx);
    if (!ctx.config.has("scheme", "dt")) ctx.config.set("scheme", "dt", "1.9");
    if (!ctx.config.has("scheme", "stop_tol")) ctx.config.set("scheme", "stop_tol", "0");
    if (!ctx.config.has("init", "bootstrap")) ctx.config.set("init", "bootstrap", "constant");
    const auto f = energy_from(ctx, "double-well", {{"scale", "1"}});
    auto cfg = scheme_from(ctx);
    const int search = ctx.config.get_int("multivalued", "search_steps", 50);
    const auto init = initial_states(ctx, *f, cfg);

    const double cf_dt = f->semiconvexity() * cfg.dt;
    const Regime regime = cfg.regime(f->semiconvexity());
    print_constants(os, cfg.k);
    fmt::print(os, "energy {}, c_F dt = {:.17g}, regime {}\n", f->name(), cf_dt, to_string(regime));

    // Walk forward with the default rule until a step has several solutions.
    Trajectory prefix;
    std::optional<StepSolutions> branch;
    for (int s = 0; s <= search && !branch; ++s) {
        SchemeConfig head = cfg;
        head.max_steps = s;
        prefix = run(*f, head, init);
        const std::size_t n = prefix.size();
        const Vector b = bdf_rhs(cfg.k, std::span<const Vector>(prefix.states.data() + n - cfg.k, cfg.k));
        auto sols = solve_step_multivalued(*f, cfg, b);
        if (sols.roots.size() > 1) branch = std::move(sols);
    }
    json body{{"c_f_dt", cf_dt}, {"regime", to_string(regime)}, {"constants", scheme_constants_json(cfg.k)}};
    if (!branch) {
        fmt::print(os, "no branching in the first {} steps: every step had a single solution\n", search + 1);
        body["branch_step"] = nullptr;
        write_json(ctx, "multivalued.json", with_meta(ctx, "multivalued-demo", body));
        return ExitCode::ok;
    }

    const std::size_t step = prefix.size();
    fmt::print(os, "step {} has {} solutions{}\n", step, branch->roots.size(),
               branch->degenerate() ? " (degenerate interval)" : "");
    body["branch_step"] = step;

    std::optional<Decomposition> dec;
    if (cfg.k == 3 && admissible_beta_range(cf_dt)) dec = decompose(default_beta(cf_dt));
    const int remaining = std::max(0, cfg.max_steps - static_cast<int>(step - cfg.k) - 1);
    json branches = json::array();
    bool all_ok = true;
    for (std::size_t i = 0; i < branch->roots.size(); ++i) {
        Trajectory t = prefix;
        const Vector& u = branch->roots[i];
        const Vector b = bdf_rhs(cfg.k, std::span<const Vector>(t.states.data() + t.size() - cfg.k, cfg.k));
        t.states.push_back(u);
        t.w.push_back(f->gradient(u));
        t.residuals.push_back(step_residual(*f, cfg, b, u));
        t.branch_count.push_back(static_cast<int>(branch->roots.size()));
        t.branch_chosen.push_back(static_cast<int>(i));
        SchemeConfig rest = cfg;
        rest.max_steps = remaining;
        const auto cont = run(*f, rest, StateList(t.states.end() - cfg.k, t.states.end()));
        for (std::size_t j = cfg.k; j < cont.size(); ++j) {
            t.states.push_back(cont.states[j]);
            t.w.push_back(cont.w[j]);
            t.residuals.push_back(cont.residuals[j]);
            t.branch_count.push_back(cont.branch_count[j]);
            t.branch_chosen.push_back(cont.branch_chosen[j]);
        }

        json entry{{"root", u[0]}, {"final", t.states.back()[0]}, {"steps", t.size()}};
        std::string line = fmt::format("  branch {}: U = {:+.17g} -> final {:+.17g}", i, u[0], t.states.back()[0]);
        if (dec) {
            const auto audit = descent_audit(t, *dec, *f);
            const auto budget = budget_check(audit, f->lower_bound());
            const bool ok = audit.descent_ok && audit.slope_ok && audit.monotone && budget.ok;
            all_ok = all_ok && ok;
            line += fmt::format(", min margin {:.3e}, budget {}: {}", audit.min_margin, budget.ok ? "ok" : "exceeded",
                                ok ? "descends" : "FAILS");
            entry["min_margin"] = audit.min_margin;
            entry["descent_ok"] = ok;
            write_audit(ctx, fmt::format("branch_{}_audit", i), audit, budget, omega_diagnostics(t, *f));
        }
        fmt::print(os, "{}\n", line);
        write_file(ctx, fmt::format("branch_{}{}", i, ext(ctx)), trajectory_text(ctx, t));
        branches.push_back(entry);
    }
    if (dec) fmt::print(os, "beta = {:.17g}\n", dec->beta);
    body["branches"] = branches;
    body["beta"] = dec ? json(dec->beta) : json(nullptr);
    write_json(ctx, "multivalued.json", with_meta(ctx, "multivalued-demo", body));
    return all_ok ? ExitCode::ok : ExitCode::numerical_failure;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const InfeasibleError& e) {
        fmt::print(err, "infeasible: {}\n", e.what());
        return ExitCode::infeasible;
    } catch (const ConfigError& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return ExitCode::config_error;
    } catch (const ConvergenceError& e) {
        fmt::print(err, "numerical failure: {}\n", e.what());
        return ExitCode::numerical_failure;
    } catch (const DefinitenessError& e) {
        fmt::print(err, "numerical failure: {}\n", e.what());
        return ExitCode::numerical_failure;
    } catch (const Error& e) {
        fmt::print(err, "invalid input: {}\n", e.what());
        return ExitCode::config_error;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(err, "config error: {}\n", e.what());
        return ExitCode::config_error;
    }
}

}  // namespace gradstab::cli
