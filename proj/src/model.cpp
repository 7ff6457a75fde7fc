#include "tenside/model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tenside/gaussian.hpp"

namespace tenside {

namespace {

std::string cellToString(std::span<const Index> cell) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < cell.size(); ++i) os << (i ? ", " : "") << cell[i];
  os << ")";
  return os.str();
}

}  // namespace

void ObservationSet::append(std::span<const Index> cell, Real value) {
  indices.insert(indices.end(), cell.begin(), cell.end());
  values.push_back(value);
}

void ObservationSet::validate(bool require_entries) const {
  const Index m = nModes();
  if (m < 2) throw std::invalid_argument("ObservationSet: at least 2 modes required");
  for (Index d : mode_dims)
    if (d <= 0) throw std::invalid_argument("ObservationSet: mode dimensions must be positive");
  if (indices.size() != static_cast<size_t>(size() * m))
    throw std::invalid_argument("ObservationSet: index array length mismatch");
  if (require_entries && size() == 0)
    throw std::invalid_argument("ObservationSet: no observations");
  for (Index e = 0; e < size(); ++e) {
    for (Index mode = 0; mode < m; ++mode) {
      Index i = index(e, mode);
      if (i < 0 || i >= mode_dims[static_cast<size_t>(mode)])
        throw std::out_of_range("ObservationSet: cell " + cellToString(cell(e)) +
                                " index out of range for mode " + std::to_string(mode));
    }
  }
  // Duplicate detection by lexicographic sort of entry ids.
  std::vector<Index> order(static_cast<size_t>(size()));
  std::iota(order.begin(), order.end(), Index{0});
  auto less = [&](Index a, Index b) {
    for (Index mode = 0; mode < m; ++mode) {
      Index ia = index(a, mode), ib = index(b, mode);
      if (ia != ib) return ia < ib;
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  for (size_t k = 1; k < order.size(); ++k) {
    if (!less(order[k - 1], order[k]) && !less(order[k], order[k - 1]))
      throw std::invalid_argument("ObservationSet: duplicate cell " +
                                  cellToString(cell(order[k])));
  }
}

std::vector<std::vector<Index>> ObservationSet::entityIndex(Index mode,
                                                            Index dim_override) const {
  Index dim = std::max(dim_override, mode_dims[static_cast<size_t>(mode)]);
  std::vector<std::vector<Index>> touching(static_cast<size_t>(dim));
  for (Index e = 0; e < size(); ++e)
    touching[static_cast<size_t>(index(e, mode))].push_back(e);
  return touching;
}

void HyperPriorConfig::validate() const {
  if (kappa0 <= 0) throw std::invalid_argument("HyperPriorConfig: kappa0 must be positive");
  if (alpha_prior.shape <= 0 || alpha_prior.rate <= 0 ||
      lambda_beta_prior.shape <= 0 || lambda_beta_prior.rate <= 0)
    throw std::invalid_argument("HyperPriorConfig: Gamma shape/rate must be positive");
  if (lambda_beta_value <= 0)
    throw std::invalid_argument("HyperPriorConfig: lambda_beta must be positive");
  if (alpha_fixed && *alpha_fixed <= 0)
    throw std::invalid_argument("HyperPriorConfig: fixed alpha must be positive");
}

Real predictEntry(const SamplerState& state, std::span<const Index> cell) {
  const Index m = static_cast<Index>(state.modes.size());
  if (static_cast<Index>(cell.size()) != m)
    throw std::invalid_argument("predictEntry: cell arity does not match mode count");
  for (Index mode = 0; mode < m; ++mode) {
    if (cell[static_cast<size_t>(mode)] < 0 ||
        cell[static_cast<size_t>(mode)] >= state.modes[static_cast<size_t>(mode)].latent.cols())
      throw std::out_of_range("predictEntry: cell " + cellToString(cell) +
                              " index out of range for mode " + std::to_string(mode));
  }
  const Index d = state.modes[0].latent.rows();
  Vector prod = Vector::Ones(d);
  for (Index mode = 0; mode < m; ++mode)
    prod.array() *= state.modes[static_cast<size_t>(mode)]
                        .latent.col(cell[static_cast<size_t>(mode)])
                        .array();
  return prod.sum();
}

GaussianCanonical latentConditional(const SamplerState& state,
                                    const ModeData& mode_data, Index mode,
                                    Index entity, const ObservationSet& data,
                                    std::span<const Index> touching) {
  const ModeState& ms = state.modes[static_cast<size_t>(mode)];
  const Index d = ms.latent.rows();
  if (entity < 0 || entity >= ms.latent.cols())
    throw std::out_of_range("latentConditional: entity out of range");

  Vector prior_mean = ms.mu;
  if (ms.beta && mode_data.side_info) {
    for (CsrMatrix::InnerIterator it(*mode_data.side_info, entity); it; ++it)
      prior_mean.noalias() += it.value() * ms.beta->col(it.col());
  }

  GaussianCanonical out;
  out.precision = ms.lambda;
  out.linear = ms.lambda * prior_mean;

  Vector q(d);
  for (Index e : touching) {
    q.setOnes();
    auto cell = data.cell(e);
    for (Index m2 = 0; m2 < data.nModes(); ++m2) {
      if (m2 == mode) continue;
      q.array() *= state.modes[static_cast<size_t>(m2)]
                       .latent.col(cell[static_cast<size_t>(m2)])
                       .array();
    }
    out.precision.noalias() += state.alpha * q * q.transpose();
    out.linear.noalias() += state.alpha * data.values[static_cast<size_t>(e)] * q;
  }
  return out;
}

std::pair<Vector, Matrix> sampleModeHyperparams(const ModeState& mode_state,
                                                const ModeData& mode_data,
                                                const HyperPriorConfig& hyper,
                                                rng::Stream& rs) {
  const Index d = mode_state.latent.rows();
  const Index n = mode_state.latent.cols();

  Matrix resid = mode_state.latent;
  if (mode_state.beta && mode_data.side_info)
    resid.noalias() -= (*mode_data.side_info * mode_state.beta->transpose()).transpose();

  const Vector mu0 = hyper.mu0.size() > 0 ? hyper.mu0 : Vector::Zero(d);
  const Matrix w0 = hyper.w0.size() > 0 ? hyper.w0 : Matrix::Identity(d, d);
  if (mu0.size() != d || w0.rows() != d || w0.cols() != d)
    throw std::invalid_argument("sampleModeHyperparams: hyperprior dimensions do not match D");
  const Real kappa0 = hyper.kappa0;
  const Real nu0 = hyper.nu0 > 0 ? hyper.nu0 : static_cast<Real>(d);

  const Real kappa_n = kappa0 + static_cast<Real>(n);
  const Real nu_n = nu0 + static_cast<Real>(n);

  Eigen::LLT<Matrix> w0_llt(w0);
  if (w0_llt.info() != Eigen::Success)
    throw std::invalid_argument("sampleModeHyperparams: W0 is not positive definite");
  Matrix winv = w0_llt.solve(Matrix::Identity(d, d));
  Vector mu_n = mu0;
  if (n > 0) {
    Vector rbar = resid.rowwise().mean();
    mu_n = (kappa0 * mu0 + static_cast<Real>(n) * rbar) / kappa_n;
    Matrix centered = resid.colwise() - rbar;
    winv.noalias() += centered * centered.transpose();
    Vector dm = rbar - mu0;
    winv.noalias() += (kappa0 * static_cast<Real>(n) / kappa_n) * dm * dm.transpose();
  }
  winv = ((winv + winv.transpose()) / 2).eval();

  Eigen::LLT<Matrix> winv_llt(winv);
  if (winv_llt.info() != Eigen::Success)
    throw std::runtime_error("sampleModeHyperparams: updated Wishart scale is not positive definite");
  Matrix wn = winv_llt.solve(Matrix::Identity(d, d));
  wn = ((wn + wn.transpose()) / 2).eval();

  Matrix lambda = sampleWishart(wn, nu_n, rs);

  Eigen::LLT<Matrix> lam_llt(lambda);
  if (lam_llt.info() != Eigen::Success)
    throw std::runtime_error("sampleModeHyperparams: sampled precision is not positive definite");
  Vector z(d);
  for (Index i = 0; i < d; ++i) z(i) = rs.normal();
  Vector mu = mu_n + lam_llt.matrixU().solve(z) / std::sqrt(kappa_n);
  return {mu, lambda};
}

Real sampleAlpha(const SamplerState& state, const ObservationSet& data,
                 const HyperPriorConfig& hyper, rng::Stream& rs) {
  if (hyper.alpha_fixed) return *hyper.alpha_fixed;
  Real sse = 0;
  for (Index e = 0; e < data.size(); ++e) {
    Real r = data.values[static_cast<size_t>(e)] - predictEntry(state, data.cell(e));
    sse += r * r;
  }
  if (!std::isfinite(sse))
    throw std::runtime_error("sampleAlpha: non-finite squared error");
  Real shape = hyper.alpha_prior.shape + static_cast<Real>(data.size()) / 2;
  Real rate = hyper.alpha_prior.rate + sse / 2;
  return rs.gamma(shape, rate);
}

Real sampleLambdaBeta(const ModeState& mode_state, const HyperPriorConfig& hyper,
                      rng::Stream& rs) {
  if (!mode_state.beta)
    throw std::logic_error("sampleLambdaBeta: mode has no side information");
  const Matrix& beta = *mode_state.beta;
  Real trace = (mode_state.lambda * beta).cwiseProduct(beta).sum();
  Real shape = hyper.lambda_beta_prior.shape +
               static_cast<Real>(beta.rows() * beta.cols()) / 2;
  Real rate = hyper.lambda_beta_prior.rate + trace / 2;
  return rs.gamma(shape, rate);
}

}  // namespace tenside
