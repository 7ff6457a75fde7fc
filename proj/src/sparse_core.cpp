#include "tenside/sparse_core.hpp"

namespace tenside {

Vector spmv(const CsrMatrix& a, const Vector& v) {
  if (v.size() != a.cols())
    throw std::invalid_argument("spmv: vector length " + std::to_string(v.size()) +
                                " does not match column count " + std::to_string(a.cols()));
  return a * v;
}

Vector spmvT(const CsrMatrix& a, const Vector& v) {
  if (v.size() != a.rows())
    throw std::invalid_argument("spmvT: vector length " + std::to_string(v.size()) +
                                " does not match row count " + std::to_string(a.rows()));
  return a.transpose() * v;
}

Vector applyK(const CsrMatrix& x, Real lambda_beta, const Vector& v) {
  if (lambda_beta <= 0)
    throw std::invalid_argument("applyK: lambda_beta must be positive");
  if (v.size() != x.cols())
    throw std::invalid_argument("applyK: vector length " + std::to_string(v.size()) +
                                " does not match feature count " + std::to_string(x.cols()));
  if (x.rows() == 0) return lambda_beta * v;
  return spmvT(x, spmv(x, v)) + lambda_beta * v;
}

}  // namespace tenside
