#pragma once

#include <Eigen/Dense>

namespace omt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace omt
