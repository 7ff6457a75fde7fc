#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tenside/rng.hpp"
#include "tenside/types.hpp"

namespace tenside {

// Sparse list of observed tensor cells. Indices are stored flattened,
// n_modes entries per cell.
struct ObservationSet {
  std::vector<Index> mode_dims;
  std::vector<Index> indices;
  std::vector<Real> values;

  Index nModes() const { return static_cast<Index>(mode_dims.size()); }
  Index size() const { return static_cast<Index>(values.size()); }
  Index index(Index entry, Index mode) const {
    return indices[static_cast<size_t>(entry * nModes() + mode)];
  }
  std::span<const Index> cell(Index entry) const {
    return {indices.data() + entry * nModes(), static_cast<size_t>(nModes())};
  }

  void append(std::span<const Index> cell, Real value);

  // Throws on out-of-range indices, duplicate cells, or (when required)
  // an empty entry list.
  void validate(bool require_entries = true) const;

  // Cells touching each entity of one mode. dim_override extends the entity
  // range past the observed maximum (cold-start entities get empty lists).
  std::vector<std::vector<Index>> entityIndex(Index mode, Index dim_override = 0) const;
};

struct ModeData {
  Index dim = 0;
  std::optional<CsrMatrix> side_info;  // dim x F, rows are entities
  std::string name;
};

struct ModeState {
  Matrix latent;               // D x N, column i is entity i's latent vector
  Vector mu;                   // D
  Matrix lambda;               // D x D precision
  std::optional<Matrix> beta;  // D x F, present iff the mode has side info
  Real lambda_beta = 5.0;
};

struct GammaParams {
  Real shape = 1.0;
  Real rate = 1.0;
};

struct HyperPriorConfig {
  Vector mu0;      // empty: zeros(D)
  Real kappa0 = 2.0;
  Real nu0 = 0.0;  // <= 0: D
  Matrix w0;       // empty: identity(D)
  std::optional<Real> alpha_fixed;
  GammaParams alpha_prior{1.0, 1.0};
  bool sample_lambda_beta = false;
  Real lambda_beta_value = 5.0;
  GammaParams lambda_beta_prior{1.0, 1.0};

  void validate() const;
};

struct SamplerState {
  std::vector<ModeState> modes;
  Real alpha = 1.0;  // noise precision
  long iteration = 0;
};

Real predictEntry(const SamplerState& state, std::span<const Index> cell);

// Canonical form of a Gaussian: N(precision^{-1} linear, precision^{-1}).
struct GaussianCanonical {
  Matrix precision;
  Vector linear;
};

// Full conditional of one entity's latent vector. `touching` lists the
// observed cells involving this entity (from ObservationSet::entityIndex).
GaussianCanonical latentConditional(const SamplerState& state,
                                    const ModeData& mode_data, Index mode,
                                    Index entity, const ObservationSet& data,
                                    std::span<const Index> touching);

// Normal-Wishart draw of (mu, Lambda) from the residuals c_i - beta x_i.
std::pair<Vector, Matrix> sampleModeHyperparams(const ModeState& mode_state,
                                                const ModeData& mode_data,
                                                const HyperPriorConfig& hyper,
                                                rng::Stream& rs);

// Conjugate Gamma draw of the noise precision; returns alpha_fixed verbatim
// when configured.
Real sampleAlpha(const SamplerState& state, const ObservationSet& data,
                 const HyperPriorConfig& hyper, rng::Stream& rs);

// Conjugate Gamma draw of the link-matrix precision lambda_beta.
Real sampleLambdaBeta(const ModeState& mode_state, const HyperPriorConfig& hyper,
                      rng::Stream& rs);

}  // namespace tenside
