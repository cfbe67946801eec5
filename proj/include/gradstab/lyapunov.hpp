#pragma once

#include "gradstab/integrator.hpp"
#include "gradstab/quadform.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gradstab {

/// The triple (U^m, U^m - U^{m-1}, U^{m-1} - U^{m-2}).
struct LyapunovState {
    Vector u;
    Vector du1;
    Vector du2;

    /// Builds the triple at index m >= 2 of a trajectory.
    static LyapunovState at(const Trajectory& t, std::size_t m);
};

/// F(U) + Q(dU1, dU2) / dt with the lifted q of dec. Returns +inf when F(U)
/// is not finite.
double hatF(const Decomposition& dec, const SemiconvexFunction& f, double dt, const LyapunovState& s);

/// [c_F dt / 2, beta_3), or nothing when empty.
std::optional<std::pair<double, double>> admissible_beta_range(double cf_dt);

struct AuditRow {
    std::size_t step;     // m, the index of the newest state
    double lyapunov;      // hatF at m
    double margin;        // hatF(m-1) - hatF(m) - R(m) / dt
    double r_term;        // R(dU^m, dU^{m-1}, dU^{m-2}) / dt
    double w_norm;        // |W^m|
    double cumulative_r;  // running sum of r_term
    double slope_gap;     // F(U^{m-1}) - F(U^m) + <W, dU^m> + c_F/2 |dU^m|^2
};

struct DescentAudit {
    double dt = 0.0;
    double beta = 0.0;
    double cf_dt = 0.0;
    Regime regime = Regime::unique;
    /// beta lies in [c_F dt / 2, beta_3); false only in forced mode.
    bool certified = true;
    std::string note;

    double initial_lyapunov = 0.0;  // hatF at m = 2
    std::vector<AuditRow> rows;

    double min_margin = 0.0;
    bool descent_ok = true;    // every margin >= -1e-10 (1 + |hatF|)
    bool monotone = true;      // hatF nonincreasing up to the same tolerance
    bool slope_ok = true;      // subgradient inequality at every step
    double telescoping_defect = 0.0;  // relative
};

struct AuditOptions {
    double tolerance = 1e-10;
    /// Audit even when beta is outside [c_F dt / 2, beta_3).
    bool force = false;
};

/// Per-step descent audit of a BDF3 trajectory with respect to dec.
/// Throws PreconditionError when k != 3 or beta is not admissible, unless
/// opts.force is set (then certified = false).
DescentAudit descent_audit(const Trajectory& traj, const Decomposition& dec, const SemiconvexFunction& f,
                           AuditOptions opts = {});

struct BudgetCheck {
    double sum_r = 0.0;   // sum of r_term over m >= 4
    double budget = 0.0;  // hatF at m = 3 minus inf F
    bool ok = true;
};

BudgetCheck budget_check(const DescentAudit& audit, double lower_bound);

struct OmegaReport {
    std::size_t window = 0;
    double max_diff_tail = 0.0;   // max |dU^n| over the window
    double final_diff = 0.0;      // |dU^N|
    double tail_diameter = 0.0;   // diam{U^n : n >= N - window}
    double w_norm_first = 0.0;    // |W| at the start of the window
    double w_norm_last = 0.0;     // |W^N|
    /// Tail diameter for half and double the window.
    double tail_diameter_half = 0.0;
    double tail_diameter_double = 0.0;
    /// Single-limit claims are only made for polynomial energies.
    bool single_limit_applicable = false;
};

/// Window max(50, 5% of the steps), capped by the trajectory length.
OmegaReport omega_diagnostics(const Trajectory& traj, const SemiconvexFunction& f);

struct BoundednessReport {
    double sup_f = 0.0;
    double sup_norm = 0.0;
    double bound = 0.0;  // hatF at m = 2
    bool bounded = true;
};

/// Checks F(U^n) <= hatF(U^2) along a BDF3 run of a coercive F.
BoundednessReport coercive_boundedness_check(const Trajectory& traj, const SemiconvexFunction& f,
                                             const Decomposition& dec);

struct BarrierRecursion {
    bool exact = true;             // rational recursion holds at every step
    double max_residual = 0.0;     // floating point scheme residual
    double min_diff = 0.0;         // min |dU^n|
    double max_diff = 0.0;         // max |dU^n|
};

/// Checks that u^n = (-1)^n satisfies sum_j (1/j) d^j u^n = lambda_k u^n in
/// rationals for n = k..steps, and evaluates the floating point residual of
/// traj (a run on the barrier function).
BarrierRecursion barrier_recursion(int k, int steps, const Trajectory& traj, const SemiconvexFunction& f);

}  // namespace gradstab
