#include "tenside/gaussian.hpp"

#include <Eigen/Cholesky>
#include <stdexcept>

namespace tenside {

void fillStandardNormal(Matrix& m, rng::Stream& rs) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = rs.normal();
}

Vector sampleGaussianCanonical(const Matrix& precision, const Vector& linear,
                               rng::Stream& rs) {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sampleGaussianCanonical: precision matrix is not positive definite");
  Vector mean = llt.solve(linear);
  Vector z(linear.size());
  for (Index i = 0; i < z.size(); ++i) z(i) = rs.normal();
  // x = mean + L^{-T} z has covariance (L L^T)^{-1} = precision^{-1}.
  return mean + llt.matrixU().solve(z);
}

Matrix sampleGaussianRows(Index n, const Matrix& cov, rng::Stream& rs) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sampleGaussianRows: covariance matrix is not positive definite");
  Matrix z(n, cov.rows());
  fillStandardNormal(z, rs);
  return z * llt.matrixL().transpose();
}

Matrix sampleWishart(const Matrix& scale, Real dof, rng::Stream& rs) {
  const Index d = scale.rows();
  if (dof < static_cast<Real>(d))
    throw std::invalid_argument("sampleWishart: dof must be at least the dimension");
  Eigen::LLT<Matrix> llt(scale);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sampleWishart: scale matrix is not positive definite");
  Matrix bartlett = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    bartlett(i, i) = std::sqrt(rs.chisq(dof - static_cast<Real>(i)));
    for (Index j = 0; j < i; ++j) bartlett(i, j) = rs.normal();
  }
  Matrix m = llt.matrixL() * bartlett;
  return m * m.transpose();
}

}  // namespace tenside
