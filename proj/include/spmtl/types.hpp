#pragma once

#include <Eigen/Dense>

namespace spmtl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Instance rows stay contiguous; everything else uses Eigen's default layout.
using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;

}  // namespace spmtl
