#include "tenside/sampler.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <set>
#include <stdexcept>

#include "tenside/analysis.hpp"
#include "tenside/gaussian.hpp"

namespace tenside {

void SamplerConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("SamplerConfig: latent_dim must be >= 1");
  if (n_samples < 1) throw std::invalid_argument("SamplerConfig: n_samples must be >= 1");
  if (burn_in < 0) throw std::invalid_argument("SamplerConfig: burn_in must be >= 0");
  if (threads < 0) throw std::invalid_argument("SamplerConfig: threads must be >= 0");
  hyper.validate();
}

Matrix sampleLinkMatrix(const CsrMatrix& x, const Matrix& u, const Matrix& lambda,
                        Real lambda_beta, const CgSettings& cg, rng::Stream& rs,
                        int threads) {
  const Index n = x.rows();
  const Index f = x.cols();
  const Index d = u.cols();
  if (u.rows() != n)
    throw std::invalid_argument("sampleLinkMatrix: U row count does not match X");
  if (lambda.rows() != d || lambda.cols() != d)
    throw std::invalid_argument("sampleLinkMatrix: Lambda dimension does not match U");
  if (lambda_beta <= 0)
    throw std::invalid_argument("sampleLinkMatrix: lambda_beta must be positive");

  Eigen::LLT<Matrix> lam_llt(lambda);
  if (lam_llt.info() != Eigen::Success)
    throw std::runtime_error("sampleLinkMatrix: Lambda is not positive definite");
  Matrix lambda_inv = lam_llt.solve(Matrix::Identity(d, d));
  lambda_inv = ((lambda_inv + lambda_inv.transpose()) / 2).eval();

  Matrix e1 = sampleGaussianRows(n, lambda_inv, rs);
  Matrix e2 = sampleGaussianRows(f, lambda_inv, rs);

  Matrix rhs = x.transpose() * (u + e1);
  rhs.noalias() += std::sqrt(lambda_beta) * e2;

  auto op = [&](const Vector& v) { return applyK(x, lambda_beta, v); };
  Matrix solution = cgSolveMulti(op, rhs, cg, threads);  // F x D
  return solution.transpose();
}

SamplerState initState(const std::vector<ModeData>& modes,
                       const SamplerConfig& config) {
  const Index d = config.latent_dim;
  SamplerState state;
  state.alpha = config.hyper.alpha_fixed ? *config.hyper.alpha_fixed : 1.0;
  state.iteration = 0;
  state.modes.resize(modes.size());
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(d));
  for (size_t m = 0; m < modes.size(); ++m) {
    ModeState& ms = state.modes[m];
    ms.latent.resize(d, modes[m].dim);
    auto rs = rng::stream(config.seed, rng::Purpose::Init, 0, m);
    fillStandardNormal(ms.latent, rs);
    ms.latent *= scale;
    ms.mu = Vector::Zero(d);
    ms.lambda = Matrix::Identity(d, d);
    ms.lambda_beta = config.hyper.lambda_beta_value;
    if (modes[m].side_info)
      ms.beta = Matrix::Zero(d, modes[m].side_info->cols());
  }
  return state;
}

void gibbsSweep(SamplerState& state, const ObservationSet& data,
                const std::vector<std::vector<std::vector<Index>>>& touching,
                const std::vector<ModeData>& modes, const SamplerConfig& config) {
  const auto sweep = static_cast<std::uint64_t>(state.iteration);
  for (size_t m = 0; m < modes.size(); ++m) {
    ModeState& ms = state.modes[m];

    auto hyper_rs = rng::stream(config.seed, rng::Purpose::Hyper, sweep, m);
    auto [mu, lambda] = sampleModeHyperparams(ms, modes[m], config.hyper, hyper_rs);
    ms.mu = mu;
    ms.lambda = lambda;

    if (modes[m].side_info) {
      Matrix u = (ms.latent.colwise() - ms.mu).transpose();  // N x D
      auto link_rs = rng::stream(config.seed, rng::Purpose::Link, sweep, m);
      ms.beta = sampleLinkMatrix(*modes[m].side_info, u, ms.lambda, ms.lambda_beta,
                                 config.cg, link_rs, config.threads);
      if (config.hyper.sample_lambda_beta) {
        auto lb_rs = rng::stream(config.seed, rng::Purpose::LambdaBeta, sweep, m);
        ms.lambda_beta = sampleLambdaBeta(ms, config.hyper, lb_rs);
      }
    }

    const auto& mode_touching = touching[m];
    parallelFor(modes[m].dim, config.threads, [&](long entity) {
      auto cond = latentConditional(state, modes[m], static_cast<Index>(m), entity,
                                    data, mode_touching[static_cast<size_t>(entity)]);
      auto rs = rng::stream(config.seed, rng::Purpose::Latent, sweep, m,
                            static_cast<std::uint64_t>(entity));
      state.modes[m].latent.col(entity) =
          sampleGaussianCanonical(cond.precision, cond.linear, rs);
    });
  }
  auto alpha_rs = rng::stream(config.seed, rng::Purpose::Alpha, sweep);
  state.alpha = sampleAlpha(state, data, config.hyper, alpha_rs);
  ++state.iteration;
}

namespace {

Vector predictAll(const SamplerState& state, const ObservationSet& cells) {
  Vector out(cells.size());
  for (Index e = 0; e < cells.size(); ++e) out(e) = predictEntry(state, cells.cell(e));
  return out;
}

Real rmseAgainst(const Vector& pred, const std::vector<Real>& actual) {
  Real sse = 0;
  for (Index i = 0; i < pred.size(); ++i) {
    Real r = pred(i) - actual[static_cast<size_t>(i)];
    sse += r * r;
  }
  return std::sqrt(sse / static_cast<Real>(pred.size()));
}

}  // namespace

PosteriorSummary runSampler(const ObservationSet& data,
                            const std::vector<ModeData>& modes,
                            const std::optional<ObservationSet>& test_cells,
                            const SamplerConfig& config) {
  config.validate();
  data.validate();
  if (modes.size() != static_cast<size_t>(data.nModes()))
    throw std::invalid_argument("runSampler: mode descriptor count does not match data");
  for (size_t m = 0; m < modes.size(); ++m) {
    if (modes[m].dim <= 0)
      throw std::invalid_argument("runSampler: mode " + std::to_string(m) +
                                  " has dimension 0");
    if (modes[m].dim < data.mode_dims[m])
      throw std::invalid_argument("runSampler: mode " + std::to_string(m) +
                                  " dimension smaller than observed indices");
    if (modes[m].side_info && modes[m].side_info->rows() != modes[m].dim)
      throw std::invalid_argument("runSampler: side info row count does not match mode " +
                                  std::to_string(m));
  }
  if (test_cells) {
    test_cells->validate();
    if (test_cells->nModes() != data.nModes())
      throw std::invalid_argument("runSampler: test cells have wrong mode count");
    std::set<std::vector<Index>> train_keys;
    for (Index e = 0; e < data.size(); ++e) {
      auto c = data.cell(e);
      train_keys.emplace(c.begin(), c.end());
    }
    for (Index e = 0; e < test_cells->size(); ++e) {
      auto c = test_cells->cell(e);
      if (train_keys.count(std::vector<Index>(c.begin(), c.end())))
        throw std::invalid_argument("runSampler: test cells overlap training cells");
    }
  }
  if (config.cstat_mask) {
    if (modes.size() != 3)
      throw std::invalid_argument("runSampler: cstat_mask requires a 3-mode tensor");
    if (config.cstat_mask->size() != static_cast<size_t>(config.latent_dim))
      throw std::invalid_argument("runSampler: cstat_mask length does not match latent_dim");
  }

  std::vector<std::vector<std::vector<Index>>> touching;
  touching.reserve(modes.size());
  for (size_t m = 0; m < modes.size(); ++m)
    touching.push_back(data.entityIndex(static_cast<Index>(m), modes[m].dim));

  SamplerState state = initState(modes, config);

  PosteriorSummary summary;
  summary.train_pred_mean = Vector::Zero(data.size());
  if (test_cells) summary.test_pred_mean = Vector::Zero(test_cells->size());
  summary.latent_mean.resize(modes.size());
  for (size_t m = 0; m < modes.size(); ++m)
    summary.latent_mean[m] = Matrix::Zero(config.latent_dim, modes[m].dim);
  const bool three_mode = modes.size() == 3;
  if (config.cstat_mask)
    summary.chat_mean = Matrix::Zero(modes[0].dim, modes[1].dim);

  for (Index sweep = 0; sweep < config.burn_in; ++sweep)
    gibbsSweep(state, data, touching, modes, config);

  for (Index s = 0; s < config.n_samples; ++s) {
    gibbsSweep(state, data, touching, modes, config);
    ++summary.n_retained;

    Vector train_pred = predictAll(state, data);
    summary.train_pred_mean += train_pred;
    summary.train_rmse_samples.push_back(rmseAgainst(train_pred, data.values));
    if (test_cells) {
      Vector test_pred = predictAll(state, *test_cells);
      summary.test_pred_mean += test_pred;
      summary.test_rmse_samples.push_back(rmseAgainst(test_pred, test_cells->values));
    }
    for (size_t m = 0; m < modes.size(); ++m)
      summary.latent_mean[m] += state.modes[m].latent;

    if (three_mode) {
      summary.measurement_latents.push_back(state.modes[2].latent);
      summary.measurement_report.push_back(normalizedMeasurementLatents(state));
    }
    if (config.store_latents) {
      std::vector<Matrix> snapshot;
      snapshot.reserve(modes.size());
      for (const auto& ms : state.modes) snapshot.push_back(ms.latent);
      summary.latent_samples.push_back(std::move(snapshot));
    }
    if (config.cstat_mask) {
      const Matrix& t = state.modes[2].latent;
      Vector w(config.latent_dim);
      for (Index dd = 0; dd < config.latent_dim; ++dd)
        w(dd) = (*config.cstat_mask)[static_cast<size_t>(dd)]
                    ? t(dd, 1) - t(dd, 0)
                    : 0.0;
      *summary.chat_mean += (state.modes[0].latent.transpose() * w.asDiagonal() *
                             state.modes[1].latent)
                                .cwiseAbs();
    }
  }

  const Real inv = 1.0 / static_cast<Real>(summary.n_retained);
  summary.train_pred_mean *= inv;
  if (test_cells) summary.test_pred_mean *= inv;
  for (auto& lm : summary.latent_mean) lm *= inv;
  if (summary.chat_mean) *summary.chat_mean *= inv;
  summary.final_state = std::move(state);
  return summary;
}

}  // namespace tenside
