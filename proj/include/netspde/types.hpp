#pragma once

#include <Eigen/Dense>

namespace netspde {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace netspde
