#pragma once

#include <Eigen/Dense>

namespace fsclb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace fsclb
