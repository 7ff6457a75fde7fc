#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace tenside {

using Real = double;
using Index = Eigen::Index;

using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

// Row-major compressed storage, i.e. CSR: one offset per row, sorted column
// indices within each row. Transpose products iterate the same arrays, so no
// column-major mirror is ever kept.
using CsrMatrix = Eigen::SparseMatrix<Real, Eigen::RowMajor>;

}  // namespace tenside
