#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tenside/types.hpp"
#include "tenside/util.hpp"

namespace tenside {

struct CgSettings {
  Real rel_tolerance = 1e-6;
  Real abs_tolerance = 1e-12;
  Index max_iterations = 0;  // 0: min(system dimension, 1000)
};

class CgError : public std::runtime_error {
 public:
  explicit CgError(const std::string& what, std::vector<Real> residuals = {})
      : std::runtime_error(what), final_residuals(std::move(residuals)) {}

  // Per right-hand side residual norms; empty for numerical failures.
  std::vector<Real> final_residuals;
};

Vector spmv(const CsrMatrix& a, const Vector& v);
Vector spmvT(const CsrMatrix& a, const Vector& v);

// K v = X^T (X v) + lambda_beta v, without ever forming X^T X.
Vector applyK(const CsrMatrix& x, Real lambda_beta, const Vector& v);

// Solves op(x) = rhs column by column with unpreconditioned conjugate
// gradients. op must be symmetric positive definite of dimension rhs.rows().
// Each column satisfies ||op(x) - b|| <= max(rel_tolerance * ||b||,
// abs_tolerance) on the explicitly recomputed residual. Columns are
// independent, so solving them in parallel never changes the result.
template <typename Op>
Matrix cgSolveMulti(Op&& op, const Matrix& rhs, const CgSettings& settings,
                    int threads = 1) {
  if (settings.rel_tolerance <= 0 || settings.abs_tolerance <= 0)
    throw std::invalid_argument("cgSolveMulti: tolerances must be positive");
  const Index n = rhs.rows();
  const Index n_rhs = rhs.cols();
  const Index max_iter = settings.max_iterations > 0
                             ? settings.max_iterations
                             : std::min<Index>(n, 1000);
  Matrix x = Matrix::Zero(n, n_rhs);
  std::vector<Real> residuals(static_cast<size_t>(n_rhs), 0.0);
  std::vector<char> converged(static_cast<size_t>(n_rhs), 0);

  parallelFor(n_rhs, threads, [&](long j) {
    const Vector b = rhs.col(j);
    const Real tol = std::max(settings.rel_tolerance * b.norm(), settings.abs_tolerance);
    Vector xj = Vector::Zero(n);
    Vector r = b;
    Real rnorm = r.norm();
    Index iter = 0;
    bool done = rnorm <= tol;
    while (!done && iter < max_iter) {
      Vector p = r;
      Real rs = r.squaredNorm();
      while (iter < max_iter) {
        Vector ap = op(p);
        Real pap = p.dot(ap);
        if (!std::isfinite(pap))
          throw CgError("cgSolveMulti: non-finite curvature in iterates");
        if (pap <= 0)
          throw CgError("cgSolveMulti: operator is not positive definite");
        Real step = rs / pap;
        xj.noalias() += step * p;
        r.noalias() -= step * ap;
        ++iter;
        Real rs_next = r.squaredNorm();
        if (!std::isfinite(rs_next))
          throw CgError("cgSolveMulti: NaN detected in iterates");
        if (std::sqrt(rs_next) <= tol) break;
        p = r + (rs_next / rs) * p;
        rs = rs_next;
      }
      // Verify with the explicit residual; restart from it if the recurrence
      // drifted above tolerance.
      r = b - op(xj);
      rnorm = r.norm();
      done = rnorm <= tol;
    }
    residuals[static_cast<size_t>(j)] = rnorm;
    converged[static_cast<size_t>(j)] = done ? 1 : 0;
    x.col(j) = xj;
  });

  for (char c : converged)
    if (!c)
      throw CgError("cgSolveMulti: no convergence within iteration limit",
                    residuals);
  return x;
}

}  // namespace tenside
