#pragma once

#include <Eigen/Dense>

namespace capscore {

// Every parameter and activation is a row-major matrix; vectors are 1 x n.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace capscore
