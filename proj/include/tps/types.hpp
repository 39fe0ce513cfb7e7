//
// Project     : tps
// Module      : types
// Description : shared aliases and error types
//

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace tps {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point  = Eigen::Vector2d;

/// Point set fails the polynomial unisolvency requirement (e.g. collinear
/// nodes for a linear tail).
struct UnisolvencyError : std::runtime_error {
    explicit UnisolvencyError(const std::string& what) : std::runtime_error(what) {}
};

/// Linear system could not be solved to working accuracy.
struct SingularSystemError : std::runtime_error {
    explicit SingularSystemError(const std::string& what) : std::runtime_error(what) {}
};

/// Cholesky hit a non-positive pivot: tolerance too loose or input not SPD.
struct PivotBreakdownError : std::runtime_error {
    explicit PivotBreakdownError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tps
