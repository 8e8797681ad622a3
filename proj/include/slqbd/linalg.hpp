#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace slqbd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

} // namespace slqbd
