#ifndef CNC_TYPES_HPP
#define CNC_TYPES_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cnc {

// Row-major so that one row is one data point.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using Index = std::size_t;
using Labels = std::vector<int>;

}  // namespace cnc

#endif  // CNC_TYPES_HPP
