#pragma once

#include "gradstab/integrator.hpp"
#include "gradstab/lyapunov.hpp"

#include <nlohmann/json.hpp>

#include <ostream>
#include <string>

namespace gradstab {

inline constexpr const char* kSchemaVersion = "gradstab-output/1";

/// Decimal with 17 significant digits ("nan"/"inf" for non-finite values).
std::string format_real(double x);

/// {"fraction": "p/q", "decimal": x}
nlohmann::json rational_json(const Rational& r);

/// Columns: step, u_0..u_{M-1}, residual, diff_norm.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
nlohmann::json trajectory_json(const Trajectory& traj, const nlohmann::json& config);

/// Columns: step, lyapunov, margin, r_term, w_norm, cumulative_r, slope_gap.
void write_audit_csv(std::ostream& out, const DescentAudit& audit);
nlohmann::json audit_json(const DescentAudit& audit, const BudgetCheck& budget, const OmegaReport& omega,
                          const nlohmann::json& config);

/// alpha_k, 2 beta_k and lambda_k of order k.
nlohmann::json scheme_constants_json(int k);

nlohmann::json decomposition_json(const Decomposition& d);

}  // namespace gradstab
