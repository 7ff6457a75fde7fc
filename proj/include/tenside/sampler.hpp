#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tenside/model.hpp"
#include "tenside/sparse_core.hpp"

namespace tenside {

struct SamplerConfig {
  Index latent_dim = 30;
  Index burn_in = 200;
  Index n_samples = 800;
  CgSettings cg;
  HyperPriorConfig hyper;
  std::uint64_t seed = 0;
  int threads = 1;  // 0: all hardware threads
  bool store_latents = false;
  // When set, the per-sample interaction differences over these latent
  // dimensions are accumulated online into chat_mean (3-mode runs).
  std::optional<std::vector<bool>> cstat_mask;

  void validate() const;
};

struct PosteriorSummary {
  Index n_retained = 0;
  Vector train_pred_mean;
  Vector test_pred_mean;
  std::vector<Real> train_rmse_samples;
  std::vector<Real> test_rmse_samples;
  // 3-mode runs: measurement-mode latents (D x N_t) and normalized values
  // (N_t x D) per retained sample. Small enough to keep for every sample.
  std::vector<Matrix> measurement_latents;
  std::vector<Matrix> measurement_report;
  // Per retained sample, per mode; filled only when store_latents is set.
  std::vector<std::vector<Matrix>> latent_samples;
  std::vector<Matrix> latent_mean;
  std::optional<Matrix> chat_mean;
  SamplerState final_state;
};

// One draw of the link matrix (D x F) via the noise-injection construction:
// solve K b = X^T (U + E1) + sqrt(lambda_beta) E2 column-wise with matrix-free
// conjugate gradients, K = X^T X + lambda_beta I. Rows of E1, E2 are i.i.d.
// N(0, Lambda^{-1}).
Matrix sampleLinkMatrix(const CsrMatrix& x, const Matrix& u, const Matrix& lambda,
                        Real lambda_beta, const CgSettings& cg, rng::Stream& rs,
                        int threads = 1);

SamplerState initState(const std::vector<ModeData>& modes,
                       const SamplerConfig& config);

// One full sweep: per mode in declared order, hyperparameters, then the link
// matrix (when side info is present), then every entity's latent vector;
// finally the noise precision. Increments state.iteration.
void gibbsSweep(SamplerState& state, const ObservationSet& data,
                const std::vector<std::vector<std::vector<Index>>>& touching,
                const std::vector<ModeData>& modes, const SamplerConfig& config);

PosteriorSummary runSampler(const ObservationSet& data,
                            const std::vector<ModeData>& modes,
                            const std::optional<ObservationSet>& test_cells,
                            const SamplerConfig& config);

}  // namespace tenside
