#pragma once

#include <Eigen/Dense>

namespace imvc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using IntMatrix = Eigen::MatrixXi;
using IntVector = Eigen::VectorXi;

// RBF similarities over row features; entries in [0,1], pruned rows/cols exactly 0.
using SimilarityMatrix = Matrix;

}  // namespace imvc
