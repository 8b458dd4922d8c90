#pragma once

#include <Eigen/Core>

namespace cavg {

/// Dense row-major matrix used throughout; row i belongs to agent i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

} // namespace cavg
