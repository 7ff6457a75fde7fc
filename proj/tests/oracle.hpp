// Independent brute-force references used only by tests. None of these call
// the sparse kernels or the samplers they validate.
#pragma once

#include <vector>

#include "tenside/rng.hpp"
#include "tenside/types.hpp"

namespace tenside::oracle {

// Dense copy of a sparse matrix, built entry by entry.
Matrix denseFromSparse(const CsrMatrix& a);

// Exact draw from the link-matrix conditional: forms K = X^T X + lambda I
// densely and Cholesky-samples the matrix normal with mean K^{-1} X^T U,
// row covariance K^{-1} and column covariance Lambda^{-1}. Returns D x F.
Matrix directLinkSample(const Matrix& x, const Matrix& u, const Matrix& lambda,
                        Real lambda_beta, rng::Stream& rs);

// The closed-form mean K^{-1} X^T U (F x D).
Matrix directLinkMean(const Matrix& x, const Matrix& u, Real lambda_beta);

// The closed-form covariance Lambda^{-1} (x) K^{-1} of vec(beta^T).
Matrix directLinkCovariance(const Matrix& x, const Matrix& lambda, Real lambda_beta);

struct GridDensity {
  std::vector<Vector> points;
  std::vector<Real> log_density;  // normalized over the grid
};

// Evaluates prior x likelihood for one latent vector on a regular grid and
// normalizes discretely. q holds the other-mode products per observation.
GridDensity gridPosteriorDensity(const Vector& prior_mean,
                                 const Matrix& prior_precision,
                                 const std::vector<Vector>& q,
                                 const std::vector<Real>& y, Real alpha,
                                 const Vector& lo, const Vector& hi,
                                 Index points_per_dim);

// Gaussian log density evaluated at the same grid points and normalized the
// same discrete way, for direct comparison.
std::vector<Real> gridGaussianLogDensity(const GridDensity& grid,
                                         const Vector& mean,
                                         const Matrix& precision);

}  // namespace tenside::oracle
