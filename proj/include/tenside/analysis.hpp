#pragma once

#include <utility>
#include <vector>

#include "tenside/model.hpp"

namespace tenside {

Real rmse(const Vector& predicted, const Vector& actual);

// Nearest-rank empirical quantile: the ceil(q * n)-th order statistic.
Real nearestRankQuantile(std::vector<Real> values, Real q);

// Measurement-mode latent values scaled by the per-dimension Euclidean norms
// of the compound and protein latents: out(k, d) = t(d, k) * ||c^(d)|| *
// ||p^(d)||. Requires a 3-mode state with the measurement mode last.
Matrix normalizedMeasurementLatents(const SamplerState& state);

// Marks dimension d when the posterior mean of |v(1,d) - v(0,d)| exceeds
// tau times the median of those means over dimensions. Needs >= 30 samples.
std::vector<bool> selectDivergentDims(const std::vector<Matrix>& reports,
                                      Real tau = 3.0);

struct InteractionDifferenceTable {
  Matrix chat;  // N_c x N_p posterior-mean absolute slice differences
  Vector q95;   // per-protein 0.95 quantile of the corresponding column
};

// Posterior mean over samples of |sum_{d in mask} c_id p_jd (t_2d - t_1d)|.
// latent_samples holds per-sample latents for all three modes.
InteractionDifferenceTable interactionDifference(
    const std::vector<std::vector<Matrix>>& latent_samples,
    const std::vector<bool>& mask);

// Builds the table from an already-averaged chat matrix (online path).
InteractionDifferenceTable interactionTableFromChat(Matrix chat);

struct ProteinRanking {
  std::vector<std::pair<Index, Real>> top;
  std::vector<std::pair<Index, Real>> bottom;
};

// Sorts proteins by q95 descending, ties broken by index ascending.
ProteinRanking rankProteins(const InteractionDifferenceTable& table, Index top_n);

struct WelchResult {
  Real mean_abs_a = 0;
  Real mean_abs_b = 0;
  Real t = 0;
  Real p = 1;
  bool degenerate = false;
};

// Welch two-sample t-test on |diff| between the two groups.
WelchResult pairTypeDiscrimination(const std::vector<Real>& diffs_a,
                                   const std::vector<Real>& diffs_b);

namespace detail {
Real regularizedIncompleteBeta(Real a, Real b, Real x);
Real studentTwoSidedP(Real t, Real dof);
}  // namespace detail

}  // namespace tenside
