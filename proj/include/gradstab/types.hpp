#pragma once

#include <Eigen/Dense>

#include <vector>

namespace gradstab {

/// A state U in R^M.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using StateList = std::vector<Vector>;

}  // namespace gradstab
