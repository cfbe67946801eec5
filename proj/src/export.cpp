#include "gradstab/export.hpp"

#include <fmt/format.h>

#include <cmath>

namespace gradstab {

using nlohmann::json;

std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", x);
}

namespace {

json real_json(double x) {
    if (!std::isfinite(x)) return nullptr;
    return x;
}

json vector_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(real_json(v[i]));
    return a;
}

template <int N>
json form_json(const SymmetricForm<N>& q) {
    json rows = json::array();
    const auto m = q.matrix();
    for (int i = 0; i < N; ++i) {
        json row = json::array();
        for (int j = 0; j < N; ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

json rational_json(const Rational& r) { return {{"fraction", to_string(r)}, {"decimal", to_double(r)}}; }

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const Eigen::Index m = traj.states.empty() ? 0 : traj.states.front().size();
    out << "step";
    for (Eigen::Index i = 0; i < m; ++i) out << ",u_" << i;
    out << ",residual,diff_norm\n";
    for (std::size_t n = 0; n < traj.size(); ++n) {
        out << n;
        for (Eigen::Index i = 0; i < m; ++i) out << ',' << format_real(traj.states[n][i]);
        out << ',' << format_real(traj.residuals[n]) << ','
            << format_real(n ? traj.diff_norm(n) : std::nan("")) << '\n';
    }
}

json trajectory_json(const Trajectory& traj, const json& config) {
    json states = json::array();
    json residuals = json::array();
    json w = json::array();
    for (std::size_t n = 0; n < traj.size(); ++n) {
        states.push_back(vector_json(traj.states[n]));
        residuals.push_back(real_json(traj.residuals[n]));
        w.push_back(traj.w[n].size() ? vector_json(traj.w[n]) : json(nullptr));
    }
    return {{"schema", kSchemaVersion},
            {"kind", "trajectory"},
            {"config", config},
            {"k", traj.k},
            {"dt", traj.dt},
            {"stopped_early", traj.stopped_early},
            {"states", states},
            {"residuals", residuals},
            {"w", w},
            {"branch_count", traj.branch_count},
            {"branch_chosen", traj.branch_chosen}};
}

void write_audit_csv(std::ostream& out, const DescentAudit& audit) {
    out << "step,lyapunov,margin,r_term,w_norm,cumulative_r,slope_gap\n";
    for (const auto& r : audit.rows)
        out << r.step << ',' << format_real(r.lyapunov) << ',' << format_real(r.margin) << ','
            << format_real(r.r_term) << ',' << format_real(r.w_norm) << ',' << format_real(r.cumulative_r) << ','
            << format_real(r.slope_gap) << '\n';
}

json scheme_constants_json(int k) {
    const auto c = scheme_constants(k);
    return {{"k", k},
            {"alpha_k", rational_json(c.alpha)},
            {"two_beta_k", rational_json(c.two_beta)},
            {"lambda_k", rational_json(c.lambda)}};
}

json decomposition_json(const Decomposition& d) {
    return {{"beta", d.beta},
            {"q", form_json(d.q)},
            {"r_tilde", form_json(d.r_tilde)},
            {"cholesky", {{"a", d.param.a}, {"b", d.param.b}, {"c", d.param.c}}},
            {"segment_t", d.segment_t},
            {"identity_residual", identity_residual(d)}};
}

json audit_json(const DescentAudit& audit, const BudgetCheck& budget, const OmegaReport& omega, const json& config) {
    return {{"schema", kSchemaVersion},
            {"kind", "descent-audit"},
            {"config", config},
            {"regime", to_string(audit.regime)},
            {"constants", scheme_constants_json(3)},
            {"dt", audit.dt},
            {"beta", audit.beta},
            {"cf_dt", audit.cf_dt},
            {"certified", audit.certified},
            {"note", audit.note},
            {"steps_audited", audit.rows.size()},
            {"initial_lyapunov", real_json(audit.initial_lyapunov)},
            {"min_margin", real_json(audit.min_margin)},
            {"descent_ok", audit.descent_ok},
            {"monotone", audit.monotone},
            {"slope_ok", audit.slope_ok},
            {"telescoping_defect", real_json(audit.telescoping_defect)},
            {"budget", {{"sum_r", real_json(budget.sum_r)}, {"budget", real_json(budget.budget)}, {"ok", budget.ok}}},
            {"omega",
             {{"window", omega.window},
              {"max_diff_tail", omega.max_diff_tail},
              {"final_diff", omega.final_diff},
              {"tail_diameter", omega.tail_diameter},
              {"tail_diameter_half_window", omega.tail_diameter_half},
              {"tail_diameter_double_window", omega.tail_diameter_double},
              {"w_norm_first", real_json(omega.w_norm_first)},
              {"w_norm_last", real_json(omega.w_norm_last)},
              {"single_limit_applicable", omega.single_limit_applicable}}}};
}

}  // namespace gradstab
