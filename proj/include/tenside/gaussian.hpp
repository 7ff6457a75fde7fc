#pragma once

#include "tenside/rng.hpp"
#include "tenside/types.hpp"

namespace tenside {

// Column-major fill with i.i.d. N(0,1) draws; the order is part of the
// reproducibility contract.
void fillStandardNormal(Matrix& m, rng::Stream& rs);

// Draw from N(precision^{-1} linear, precision^{-1}).
Vector sampleGaussianCanonical(const Matrix& precision, const Vector& linear,
                               rng::Stream& rs);

// n x d matrix whose rows are i.i.d. N(0, cov): rows are z^T L^T with
// cov = L L^T.
Matrix sampleGaussianRows(Index n, const Matrix& cov, rng::Stream& rs);

// Wishart draw via the Bartlett decomposition; requires dof >= dimension.
Matrix sampleWishart(const Matrix& scale, Real dof, rng::Stream& rs);

}  // namespace tenside
