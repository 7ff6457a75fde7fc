#include "oracle.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tenside::oracle {

Matrix denseFromSparse(const CsrMatrix& a) {
  Matrix d = Matrix::Zero(a.rows(), a.cols());
  for (Index r = 0; r < a.rows(); ++r)
    for (CsrMatrix::InnerIterator it(a, r); it; ++it) d(r, it.col()) = it.value();
  return d;
}

Matrix directLinkMean(const Matrix& x, const Matrix& u, Real lambda_beta) {
  const Index f = x.cols();
  Matrix k = x.transpose() * x + lambda_beta * Matrix::Identity(f, f);
  return k.llt().solve(x.transpose() * u);
}

Matrix directLinkCovariance(const Matrix& x, const Matrix& lambda, Real lambda_beta) {
  const Index f = x.cols();
  const Index d = lambda.rows();
  Matrix k = x.transpose() * x + lambda_beta * Matrix::Identity(f, f);
  Matrix k_inv = k.llt().solve(Matrix::Identity(f, f));
  Matrix lambda_inv = lambda.llt().solve(Matrix::Identity(d, d));
  Matrix cov(d * f, d * f);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      cov.block(i * f, j * f, f, f) = lambda_inv(i, j) * k_inv;
  return cov;
}

Matrix directLinkSample(const Matrix& x, const Matrix& u, const Matrix& lambda,
                        Real lambda_beta, rng::Stream& rs) {
  const Index f = x.cols();
  const Index d = lambda.rows();
  Matrix k = x.transpose() * x + lambda_beta * Matrix::Identity(f, f);
  Eigen::LLT<Matrix> k_llt(k);
  if (k_llt.info() != Eigen::Success)
    throw std::runtime_error("directLinkSample: K is not positive definite");
  Matrix mean = k_llt.solve(x.transpose() * u);  // F x D

  Matrix k_inv = k_llt.solve(Matrix::Identity(f, f));
  k_inv = ((k_inv + k_inv.transpose()) / 2).eval();
  Matrix lambda_inv = lambda.llt().solve(Matrix::Identity(d, d));
  lambda_inv = ((lambda_inv + lambda_inv.transpose()) / 2).eval();
  Matrix lk = Eigen::LLT<Matrix>(k_inv).matrixL();
  Matrix ll = Eigen::LLT<Matrix>(lambda_inv).matrixL();

  Matrix z(f, d);
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < f; ++i) z(i, j) = rs.normal();
  Matrix b = mean + lk * z * ll.transpose();
  return b.transpose();
}

GridDensity gridPosteriorDensity(const Vector& prior_mean,
                                 const Matrix& prior_precision,
                                 const std::vector<Vector>& q,
                                 const std::vector<Real>& y, Real alpha,
                                 const Vector& lo, const Vector& hi,
                                 Index points_per_dim) {
  const Index d = prior_mean.size();
  if (d < 1 || d > 2)
    throw std::invalid_argument("gridPosteriorDensity: supports 1 or 2 dimensions");
  if (q.size() != y.size())
    throw std::invalid_argument("gridPosteriorDensity: q/y length mismatch");

  GridDensity grid;
  auto evaluate = [&](const Vector& c) {
    Vector r = c - prior_mean;
    Real lp = -0.5 * r.dot(prior_precision * r);
    for (size_t i = 0; i < q.size(); ++i) {
      Real resid = y[i] - q[i].dot(c);
      lp -= 0.5 * alpha * resid * resid;
    }
    grid.points.push_back(c);
    grid.log_density.push_back(lp);
  };

  Vector c(d);
  if (d == 1) {
    for (Index i = 0; i < points_per_dim; ++i) {
      c(0) = lo(0) + (hi(0) - lo(0)) * static_cast<Real>(i) /
                         static_cast<Real>(points_per_dim - 1);
      evaluate(c);
    }
  } else {
    for (Index i = 0; i < points_per_dim; ++i)
      for (Index j = 0; j < points_per_dim; ++j) {
        c(0) = lo(0) + (hi(0) - lo(0)) * static_cast<Real>(i) /
                           static_cast<Real>(points_per_dim - 1);
        c(1) = lo(1) + (hi(1) - lo(1)) * static_cast<Real>(j) /
                           static_cast<Real>(points_per_dim - 1);
        evaluate(c);
      }
  }

  Real max_lp = *std::max_element(grid.log_density.begin(), grid.log_density.end());
  Real sum = 0;
  for (Real lp : grid.log_density) sum += std::exp(lp - max_lp);
  Real log_norm = max_lp + std::log(sum);
  for (Real& lp : grid.log_density) lp -= log_norm;
  return grid;
}

std::vector<Real> gridGaussianLogDensity(const GridDensity& grid,
                                         const Vector& mean,
                                         const Matrix& precision) {
  std::vector<Real> out;
  out.reserve(grid.points.size());
  for (const Vector& c : grid.points) {
    Vector r = c - mean;
    out.push_back(-0.5 * r.dot(precision * r));
  }
  Real max_lp = *std::max_element(out.begin(), out.end());
  Real sum = 0;
  for (Real lp : out) sum += std::exp(lp - max_lp);
  Real log_norm = max_lp + std::log(sum);
  for (Real& lp : out) lp -= log_norm;
  return out;
}

}  // namespace tenside::oracle
