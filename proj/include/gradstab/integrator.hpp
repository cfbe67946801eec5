#pragma once

#include "gradstab/objective.hpp"
#include "gradstab/quadform.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace gradstab {

/// Where c_F dt sits relative to the uniqueness and stability thresholds.
enum class Regime {
    unique,              // c_F dt < alpha_k
    multivalued_stable,  // alpha_k <= c_F dt < 2 beta_k
    barrier,             // c_F dt >= 2 beta_k
};

std::string to_string(Regime r);

/// Uniqueness, stability and barrier numbers of BDFk.
struct SchemeConstants {
    Rational alpha;     // sum_{j<=k} 1/j
    Rational two_beta;  // 2, 2, 95/48
    Rational lambda;    // 2, 4, 20/3
};

SchemeConstants scheme_constants(int k);

/// Classifies c_F dt against the exact thresholds of order k.
Regime classify_regime(int k, double cf_dt);

struct SchemeConfig {
    int k = 3;
    double dt = 0.1;
    int max_steps = 100;
    double solver_tol = 1e-10;
    /// Stop once |U^n - U^{n-1}| <= stop_tol for stop_window consecutive
    /// steps; stop_tol <= 0 disables the criterion.
    double stop_tol = 1e-10;
    int stop_window = 5;
    std::uint64_t seed = 42;
    /// Multi-start count for the M > 1 multivalued solver.
    int newton_starts = 8;
    /// Cells of the 1-D root-bracketing grid.
    int grid_cells = 4096;

    Rational alpha() const { return scheme_constants(k).alpha; }
    double alpha_value() const { return to_double(alpha()); }
    Regime regime(double c_f) const { return classify_regime(k, c_f * dt); }
    void validate() const;
};

/// Coefficients of U^{n+k}, U^{n+k-1}, ..., U^n in sum_j (1/j) d^j U^{n+k}.
std::vector<Rational> bdf_coefficients(int k);

/// b with alpha_k U + dt dF(U) containing b; history holds U^n..U^{n+k-1},
/// oldest first.
Vector bdf_rhs(int k, std::span<const Vector> history);

/// |alpha_k U - b + dt W| with W the gradient of F at U.
double step_residual(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& b, const Vector& u);

/// The unique solution of alpha_k U + dt dF(U) containing b, for c_F dt < alpha_k,
/// computed as prox_{(dt/alpha_k) F}(b / alpha_k).
Vector solve_step_unique(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& b);

struct StepSolutions {
    /// Distinct solutions; sorted ascending when M = 1.
    std::vector<Vector> roots;
    /// Intervals on which the step equation vanishes identically (M = 1 only);
    /// roots then holds representatives sampled from each interval.
    std::vector<std::pair<double, double>> degenerate_intervals;

    bool degenerate() const { return !degenerate_intervals.empty(); }
};

/// Every solution of the step equation found by 1-D bracketing (M = 1) or
/// multi-start damped Newton (M > 1). Throws ConvergenceError if none is found.
StepSolutions solve_step_multivalued(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& b);

/// Picks one branch when a step has several solutions.
class BranchSelection {
public:
    enum class Rule { lowest_lyapunov, nearest_to_previous, index };

    /// Lowest F(U) + (1/dt) Q(U - U^{n+k-1}, U^{n+k-1} - U^{n+k-2}); for k < 3
    /// the quadratic term is dropped. Without a form, q is built from
    /// decompose(default_beta(c_F dt)) at run time.
    static BranchSelection lowest_lyapunov(std::optional<QuadraticForm2> q = std::nullopt);
    static BranchSelection nearest_to_previous();
    static BranchSelection index(std::size_t i);

    Rule rule() const { return rule_; }
    std::size_t chosen_index() const { return index_; }
    const std::optional<QuadraticForm2>& form() const { return q_; }

    std::size_t select(const SemiconvexFunction& f, double dt, std::span<const Vector> candidates,
                       std::span<const Vector> history) const;

private:
    Rule rule_ = Rule::lowest_lyapunov;
    std::size_t index_ = 0;
    std::optional<QuadraticForm2> q_;
};

std::string to_string(BranchSelection::Rule r);

struct Trajectory {
    int k = 3;
    double dt = 0.0;
    StateList states;
    /// Per state: inclusion residual and selected subgradient W^n (NaN and
    /// empty for the k initial states).
    std::vector<double> residuals;
    StateList w;
    /// Per state: number of solutions of the step and the index taken.
    std::vector<int> branch_count;
    std::vector<int> branch_chosen;
    bool stopped_early = false;

    std::size_t size() const { return states.size(); }
    /// |U^n - U^{n-1}|, n >= 1.
    double diff_norm(std::size_t n) const { return (states[n] - states[n - 1]).norm(); }
};

enum class BootstrapMode { exact_list, ramp_up };

/// The k starting states. exact_list passes provided through (it must hold k
/// states); ramp_up generates U^1.. U^{k-1} by BDF1 then BDF2 with the same dt.
StateList bootstrap(const SemiconvexFunction& f, const SchemeConfig& cfg, const Vector& u0, BootstrapMode mode,
                    const StateList& provided = {});

/// Iterates the BDFk scheme from init (k states) for cfg.max_steps steps.
Trajectory run(const SemiconvexFunction& f, const SchemeConfig& cfg, const StateList& init,
               const BranchSelection& selection = BranchSelection::lowest_lyapunov());

// ---------------------------------------------------------------------------
// Convergence order

struct OrderRow {
    double dt;
    int steps;
    double error;
};

struct OrderStudy {
    int k = 3;
    std::vector<OrderRow> rows;
    std::optional<double> slope;  // least-squares slope of log(error) on log(dt)
    bool monotone = true;         // errors decrease with dt
    std::vector<std::string> warnings;
};

using Reference = std::function<Vector(double)>;

/// Error at time horizon against reference(t) for each dt. The first k states
/// come from the reference when exact_start is set, otherwise from ramp-up.
OrderStudy order_study(const SemiconvexFunction& f, int k, const Vector& u0, double horizon,
                       const std::vector<double>& dts, const Reference& reference, bool exact_start = true);

/// Reference computed by a BDF3 run with a small step (exact start not
/// available, so it is ramped up).
Reference fine_run_reference(const SemiconvexFunction& f, const Vector& u0, double dt_ref);

/// Least-squares slope of log(y) against log(x).
std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace gradstab
