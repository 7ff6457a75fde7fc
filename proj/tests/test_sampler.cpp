#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <vector>

#include "oracle.hpp"
#include "tenside/gaussian.hpp"
#include "tenside/sampler.hpp"

using namespace tenside;

namespace {

CsrMatrix randomSparse(Index rows, Index cols, Real density, rng::Stream& rs) {
  std::vector<Eigen::Triplet<Real>> ts;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      if (rs.uniform() < density) ts.emplace_back(r, c, rs.normal());
  CsrMatrix m(rows, cols);
  m.setFromTriplets(ts.begin(), ts.end());
  m.makeCompressed();
  return m;
}

// Fully observed small tensor sampled from planted latents plus noise.
struct TinyProblem {
  ObservationSet train;
  std::vector<ModeData> modes;
};

TinyProblem makeTinyProblem(Index nc, Index np, Index nt, Index d_true,
                            Real noise_sd, std::uint64_t seed) {
  rng::Stream rs(seed, {1001});
  Matrix c(d_true, nc), p(d_true, np), t(d_true, nt);
  fillStandardNormal(c, rs);
  fillStandardNormal(p, rs);
  fillStandardNormal(t, rs);
  c /= std::sqrt(static_cast<Real>(d_true));

  TinyProblem out;
  out.train.mode_dims = {nc, np, nt};
  for (Index i = 0; i < nc; ++i)
    for (Index j = 0; j < np; ++j)
      for (Index k = 0; k < nt; ++k) {
        Real y = (c.col(i).array() * p.col(j).array() * t.col(k).array()).sum() +
                 noise_sd * rs.normal();
        std::vector<Index> cell{i, j, k};
        out.train.append(std::span<const Index>(cell.data(), 3), y);
      }
  out.modes = {{nc, std::nullopt, "compound"},
               {np, std::nullopt, "protein"},
               {nt, std::nullopt, "measurement"}};
  return out;
}

bool statesEqual(const SamplerState& a, const SamplerState& b) {
  if (a.alpha != b.alpha || a.iteration != b.iteration) return false;
  for (size_t m = 0; m < a.modes.size(); ++m) {
    if ((a.modes[m].latent - b.modes[m].latent).cwiseAbs().maxCoeff() != 0) return false;
    if ((a.modes[m].mu - b.modes[m].mu).cwiseAbs().maxCoeff() != 0) return false;
    if ((a.modes[m].lambda - b.modes[m].lambda).cwiseAbs().maxCoeff() != 0) return false;
    if (a.modes[m].beta.has_value() != b.modes[m].beta.has_value()) return false;
    if (a.modes[m].beta &&
        (*a.modes[m].beta - *b.modes[m].beta).cwiseAbs().maxCoeff() != 0)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("sampleLinkMatrix with zero X reduces to the closed form") {
  const Index n = 6, f = 4, d = 2;
  CsrMatrix x(n, f);
  x.makeCompressed();
  Matrix u = Matrix::Zero(n, d);
  Matrix lambda(2, 2);
  lambda << 2.0, 0.4, 0.4, 1.5;
  const Real lb = 3.0;

  // Replay the noise construction: the draw must equal E2 / sqrt(lambda_beta)
  // exactly, because K = lambda_beta I and X^T(U + E1) = 0.
  Matrix lambda_inv = lambda.llt().solve(Matrix::Identity(d, d));
  lambda_inv = ((lambda_inv + lambda_inv.transpose()) / 2).eval();
  rng::Stream replay(7, {1});
  Matrix e1 = sampleGaussianRows(n, lambda_inv, replay);
  Matrix e2 = sampleGaussianRows(f, lambda_inv, replay);

  rng::Stream rs(7, {1});
  CgSettings cg;
  cg.rel_tolerance = 1e-12;
  Matrix beta = sampleLinkMatrix(x, u, lambda, lb, cg, rs);
  REQUIRE(beta.rows() == d);
  REQUIRE(beta.cols() == f);
  Matrix expected = (e2 / std::sqrt(lb)).transpose();
  CHECK((beta - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sampleLinkMatrix zero-X diagonal covariance matches Lambda^-1 / lambda_beta") {
  const Index n = 5, f = 3, d = 2;
  CsrMatrix x(n, f);
  x.makeCompressed();
  Matrix u = Matrix::Zero(n, d);
  Matrix lambda(2, 2);
  lambda << 1.2, -0.3, -0.3, 2.1;
  const Real lb = 2.0;
  Matrix lambda_inv = lambda.llt().solve(Matrix::Identity(d, d));

  const int draws = 40000;
  Matrix second = Matrix::Zero(d, f);  // E[beta_{ij}^2]
  CgSettings cg;
  for (int it = 0; it < draws; ++it) {
    rng::Stream rs(11, {static_cast<std::uint64_t>(it)});
    Matrix beta = sampleLinkMatrix(x, u, lambda, lb, cg, rs);
    second += beta.cwiseProduct(beta);
  }
  second /= draws;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < f; ++j) {
      Real expected = lambda_inv(i, i) / lb;
      CHECK(second(i, j) == doctest::Approx(expected).epsilon(0.05));
    }
}

TEST_CASE("sampleLinkMatrix is dominated by a huge prior precision") {
  rng::Stream xs(13, {1});
  CsrMatrix x = randomSparse(20, 5, 0.4, xs);
  Matrix u(20, 2);
  fillStandardNormal(u, xs);
  Matrix lambda = Matrix::Identity(2, 2);
  rng::Stream rs(13, {2});
  Matrix beta = sampleLinkMatrix(x, u, lambda, 1e12, {}, rs);
  CHECK(beta.norm() < 1e-3);
}

TEST_CASE("sampleLinkMatrix mean tracks the closed-form ridge solution") {
  rng::Stream xs(17, {1});
  CsrMatrix x = randomSparse(20, 5, 0.5, xs);
  Matrix u(20, 2);
  fillStandardNormal(u, xs);
  Matrix lambda(2, 2);
  lambda << 3.0, 0.5, 0.5, 2.0;
  const Real lb = 1.5;
  Matrix expected_mean = oracle::directLinkMean(oracle::denseFromSparse(x), u, lb);

  const int draws = 5000;
  Matrix mean = Matrix::Zero(2, 5);
  for (int it = 0; it < draws; ++it) {
    rng::Stream rs(17, {2, static_cast<std::uint64_t>(it)});
    mean += sampleLinkMatrix(x, u, lambda, lb, {}, rs);
  }
  mean /= draws;
  CHECK((mean - expected_mean.transpose()).cwiseAbs().maxCoeff() < 0.06);
}

TEST_CASE("sampleLinkMatrix rejects inconsistent inputs") {
  CsrMatrix x(4, 3);
  x.makeCompressed();
  Matrix u = Matrix::Zero(5, 2);
  Matrix lambda = Matrix::Identity(2, 2);
  rng::Stream rs(1, {1});
  CHECK_THROWS_AS(sampleLinkMatrix(x, u, lambda, 1.0, {}, rs), std::invalid_argument);
  Matrix u_ok = Matrix::Zero(4, 2);
  CHECK_THROWS_AS(sampleLinkMatrix(x, u_ok, lambda, 0.0, {}, rs), std::invalid_argument);
  Matrix bad_lambda(2, 2);
  bad_lambda << 1, 2, 2, 1;  // indefinite
  CHECK_THROWS_AS(sampleLinkMatrix(x, u_ok, bad_lambda, 1.0, {}, rs), std::runtime_error);
}

TEST_CASE("initState honours the configuration") {
  std::vector<ModeData> modes{{4, std::nullopt, "a"}, {3, std::nullopt, "b"}};
  SamplerConfig config;
  config.latent_dim = 5;
  config.hyper.alpha_fixed = 2.5;
  config.hyper.lambda_beta_value = 7.0;
  SamplerState state = initState(modes, config);
  CHECK(state.alpha == 2.5);
  CHECK(state.modes.size() == 2);
  CHECK(state.modes[0].latent.rows() == 5);
  CHECK(state.modes[0].latent.cols() == 4);
  CHECK_FALSE(state.modes[0].beta.has_value());
  CHECK(state.modes[0].lambda_beta == 7.0);

  CsrMatrix x(4, 6);
  x.makeCompressed();
  modes[0].side_info = x;
  SamplerState with_si = initState(modes, config);
  REQUIRE(with_si.modes[0].beta.has_value());
  CHECK(with_si.modes[0].beta->rows() == 5);
  CHECK(with_si.modes[0].beta->cols() == 6);
  CHECK(with_si.modes[0].beta->norm() == 0);
}

TEST_CASE("gibbsSweep is deterministic for a fixed seed") {
  TinyProblem prob = makeTinyProblem(8, 6, 2, 3, 0.3, 21);
  SamplerConfig config;
  config.latent_dim = 3;
  config.seed = 42;
  std::vector<std::vector<std::vector<Index>>> touching;
  for (size_t m = 0; m < prob.modes.size(); ++m)
    touching.push_back(prob.train.entityIndex(static_cast<Index>(m), prob.modes[m].dim));

  SamplerState a = initState(prob.modes, config);
  SamplerState b = initState(prob.modes, config);
  for (int sweep = 0; sweep < 10; ++sweep) {
    gibbsSweep(a, prob.train, touching, prob.modes, config);
    gibbsSweep(b, prob.train, touching, prob.modes, config);
  }
  CHECK(statesEqual(a, b));
}

TEST_CASE("gibbsSweep result is independent of the thread count") {
  TinyProblem prob = makeTinyProblem(8, 6, 2, 3, 0.3, 22);
  // Side info on mode 0 so the link solve runs in parallel too.
  rng::Stream xs(22, {5});
  prob.modes[0].side_info = randomSparse(8, 4, 0.5, xs);

  std::vector<std::vector<std::vector<Index>>> touching;
  for (size_t m = 0; m < prob.modes.size(); ++m)
    touching.push_back(prob.train.entityIndex(static_cast<Index>(m), prob.modes[m].dim));

  SamplerConfig serial;
  serial.latent_dim = 3;
  serial.seed = 99;
  serial.threads = 1;
  SamplerConfig parallel = serial;
  parallel.threads = 4;

  SamplerState a = initState(prob.modes, serial);
  SamplerState b = initState(prob.modes, parallel);
  for (int sweep = 0; sweep < 6; ++sweep) {
    gibbsSweep(a, prob.train, touching, prob.modes, serial);
    gibbsSweep(b, prob.train, touching, prob.modes, parallel);
  }
  CHECK(statesEqual(a, b));
}

TEST_CASE("prior-only sweeps give predictions centred at zero") {
  ObservationSet empty;
  empty.mode_dims = {4, 3, 2};
  std::vector<ModeData> modes{{4, std::nullopt, "a"},
                              {3, std::nullopt, "b"},
                              {2, std::nullopt, "c"}};
  SamplerConfig config;
  config.latent_dim = 3;
  config.seed = 5;
  config.hyper.alpha_fixed = 1.0;
  // Concentrate the Normal-Wishart prior: with the diffuse default (nu0 = D)
  // the product of three heavy-tailed latent draws has too much variance for
  // a stable Monte-Carlo mean. Symmetry around zero is unaffected.
  config.hyper.nu0 = 30;
  config.hyper.kappa0 = 10;
  std::vector<std::vector<std::vector<Index>>> touching;
  for (size_t m = 0; m < modes.size(); ++m)
    touching.push_back(empty.entityIndex(static_cast<Index>(m), modes[m].dim));

  SamplerState state = initState(modes, config);
  std::vector<Index> cell{0, 0, 0};
  Real acc = 0;
  const int sweeps = 2000;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    gibbsSweep(state, empty, touching, modes, config);
    acc += predictEntry(state, std::span<const Index>(cell.data(), 3));
  }
  CHECK(std::abs(acc / sweeps) < 0.05);
}

TEST_CASE("posterior alpha recovers the generating noise precision") {
  const Real noise_sd = 0.5;  // alpha_true = 4
  TinyProblem prob = makeTinyProblem(20, 15, 2, 3, noise_sd, 31);
  SamplerConfig config;
  config.latent_dim = 3;
  config.burn_in = 200;
  config.n_samples = 500;
  config.seed = 77;
  config.threads = 2;

  std::vector<std::vector<std::vector<Index>>> touching;
  for (size_t m = 0; m < prob.modes.size(); ++m)
    touching.push_back(prob.train.entityIndex(static_cast<Index>(m), prob.modes[m].dim));
  SamplerState state = initState(prob.modes, config);
  for (Index sweep = 0; sweep < config.burn_in; ++sweep)
    gibbsSweep(state, prob.train, touching, prob.modes, config);
  Real acc = 0;
  for (Index s = 0; s < config.n_samples; ++s) {
    gibbsSweep(state, prob.train, touching, prob.modes, config);
    acc += state.alpha;
  }
  Real alpha_mean = acc / static_cast<Real>(config.n_samples);
  Real alpha_true = 1.0 / (noise_sd * noise_sd);
  CHECK(alpha_mean > 0.75 * alpha_true);
  CHECK(alpha_mean < 1.25 * alpha_true);
}

TEST_CASE("runSampler single retained sample equals the final state's predictions") {
  TinyProblem prob = makeTinyProblem(5, 4, 2, 2, 0.2, 41);
  SamplerConfig config;
  config.latent_dim = 2;
  config.burn_in = 0;
  config.n_samples = 1;
  config.seed = 3;
  PosteriorSummary summary = runSampler(prob.train, prob.modes, std::nullopt, config);
  CHECK(summary.n_retained == 1);
  for (Index e = 0; e < prob.train.size(); ++e) {
    Real direct = predictEntry(summary.final_state, prob.train.cell(e));
    CHECK(summary.train_pred_mean(e) == doctest::Approx(direct));
  }
  CHECK(summary.measurement_latents.size() == 1);
  CHECK(summary.measurement_report.size() == 1);
  CHECK(summary.latent_samples.empty());
}

TEST_CASE("runSampler validates its inputs") {
  TinyProblem prob = makeTinyProblem(4, 3, 2, 2, 0.2, 51);
  SamplerConfig config;
  config.latent_dim = 2;
  config.burn_in = 0;
  config.n_samples = 1;

  std::vector<ModeData> zero_dim = prob.modes;
  zero_dim[1].dim = 0;
  CHECK_THROWS_AS(runSampler(prob.train, zero_dim, std::nullopt, config),
                  std::invalid_argument);

  ObservationSet overlap;
  overlap.mode_dims = prob.train.mode_dims;
  overlap.append(prob.train.cell(0), 1.0);
  CHECK_THROWS_AS(runSampler(prob.train, prob.modes, overlap, config),
                  std::invalid_argument);

  SamplerConfig bad = config;
  bad.n_samples = 0;
  CHECK_THROWS_AS(runSampler(prob.train, prob.modes, std::nullopt, bad),
                  std::invalid_argument);
}

TEST_CASE("runSampler posterior summaries are reproducible across thread counts") {
  TinyProblem prob = makeTinyProblem(8, 6, 2, 3, 0.3, 61);
  rng::Stream xs(61, {9});
  prob.modes[0].side_info = randomSparse(8, 5, 0.4, xs);

  ObservationSet test;
  test.mode_dims = prob.train.mode_dims;
  // Hold out the last 10 training cells.
  ObservationSet train;
  train.mode_dims = prob.train.mode_dims;
  for (Index e = 0; e < prob.train.size(); ++e) {
    if (e >= prob.train.size() - 10)
      test.append(prob.train.cell(e), prob.train.values[static_cast<size_t>(e)]);
    else
      train.append(prob.train.cell(e), prob.train.values[static_cast<size_t>(e)]);
  }

  SamplerConfig config;
  config.latent_dim = 3;
  config.burn_in = 5;
  config.n_samples = 10;
  config.seed = 8;
  config.store_latents = true;
  config.threads = 1;
  PosteriorSummary a = runSampler(train, prob.modes, test, config);
  config.threads = 4;
  PosteriorSummary b = runSampler(train, prob.modes, test, config);

  CHECK((a.train_pred_mean - b.train_pred_mean).cwiseAbs().maxCoeff() == 0);
  CHECK((a.test_pred_mean - b.test_pred_mean).cwiseAbs().maxCoeff() == 0);
  REQUIRE(a.latent_samples.size() == b.latent_samples.size());
  for (size_t s = 0; s < a.latent_samples.size(); ++s)
    for (size_t m = 0; m < a.latent_samples[s].size(); ++m)
      CHECK((a.latent_samples[s][m] - b.latent_samples[s][m]).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("mode update order does not shift the posterior predictive mean") {
  TinyProblem prob = makeTinyProblem(10, 8, 2, 3, 0.3, 71);
  ObservationSet train, test;
  train.mode_dims = prob.train.mode_dims;
  test.mode_dims = prob.train.mode_dims;
  for (Index e = 0; e < prob.train.size(); ++e) {
    if (e % 10 == 0)
      test.append(prob.train.cell(e), prob.train.values[static_cast<size_t>(e)]);
    else
      train.append(prob.train.cell(e), prob.train.values[static_cast<size_t>(e)]);
  }

  // Swap modes 0 and 1 by permuting the data; the model is symmetric in mode
  // order, so the posterior predictive means must agree statistically.
  auto permute = [](const ObservationSet& src) {
    ObservationSet out;
    out.mode_dims = {src.mode_dims[1], src.mode_dims[0], src.mode_dims[2]};
    for (Index e = 0; e < src.size(); ++e) {
      std::vector<Index> cell{src.index(e, 1), src.index(e, 0), src.index(e, 2)};
      out.append(std::span<const Index>(cell.data(), 3),
                 src.values[static_cast<size_t>(e)]);
    }
    return out;
  };
  ObservationSet train_p = permute(train);
  ObservationSet test_p = permute(test);
  std::vector<ModeData> modes_p{prob.modes[1], prob.modes[0], prob.modes[2]};

  SamplerConfig config;
  config.latent_dim = 3;
  config.burn_in = 100;
  config.n_samples = 400;
  config.seed = 12;
  config.threads = 2;
  PosteriorSummary a = runSampler(train, prob.modes, test, config);
  PosteriorSummary b = runSampler(train_p, modes_p, test_p, config);

  // Monte-Carlo error of each mean prediction, estimated from the spread of
  // per-sample RMSEs, is well under 0.1 here; allow a generous multiple.
  Real max_diff = (a.test_pred_mean - b.test_pred_mean).cwiseAbs().maxCoeff();
  CHECK(max_diff < 0.3);
  Real mean_diff = (a.test_pred_mean - b.test_pred_mean).cwiseAbs().mean();
  CHECK(mean_diff < 0.12);
}

TEST_CASE("training RMSE has no upward trend over retained samples") {
  TinyProblem prob = makeTinyProblem(12, 10, 2, 3, 0.4, 81);
  SamplerConfig config;
  config.latent_dim = 3;
  config.burn_in = 100;
  config.n_samples = 400;
  config.seed = 19;
  config.threads = 2;
  PosteriorSummary summary = runSampler(prob.train, prob.modes, std::nullopt, config);

  const auto& y = summary.train_rmse_samples;
  const Index n = static_cast<Index>(y.size());
  Real xbar = (n - 1) / 2.0;
  Real ybar = 0;
  for (Real v : y) ybar += v;
  ybar /= n;
  Real sxx = 0, sxy = 0;
  for (Index i = 0; i < n; ++i) {
    sxx += (i - xbar) * (i - xbar);
    sxy += (i - xbar) * (y[static_cast<size_t>(i)] - ybar);
  }
  Real slope = sxy / sxx;
  Real sse = 0;
  for (Index i = 0; i < n; ++i) {
    Real fit = ybar + slope * (i - xbar);
    Real r = y[static_cast<size_t>(i)] - fit;
    sse += r * r;
  }
  Real slope_se = std::sqrt(sse / (n - 2) / sxx);
  CHECK(slope <= 3 * slope_se);
}

TEST_CASE("online chat accumulation matches the offline computation") {
  TinyProblem prob = makeTinyProblem(6, 5, 2, 2, 0.3, 91);
  SamplerConfig config;
  config.latent_dim = 3;
  config.burn_in = 5;
  config.n_samples = 20;
  config.seed = 23;
  config.store_latents = true;
  std::vector<bool> mask{true, false, true};
  config.cstat_mask = mask;
  PosteriorSummary summary = runSampler(prob.train, prob.modes, std::nullopt, config);
  REQUIRE(summary.chat_mean.has_value());

  // Recompute offline from the stored latent samples.
  Matrix offline = Matrix::Zero(6, 5);
  for (const auto& sample : summary.latent_samples) {
    const Matrix& c = sample[0];
    const Matrix& p = sample[1];
    const Matrix& t = sample[2];
    for (Index i = 0; i < 6; ++i)
      for (Index j = 0; j < 5; ++j) {
        Real acc = 0;
        for (Index d = 0; d < 3; ++d)
          if (mask[static_cast<size_t>(d)])
            acc += c(d, i) * p(d, j) * (t(d, 1) - t(d, 0));
        offline(i, j) += std::abs(acc);
      }
  }
  offline /= static_cast<Real>(summary.latent_samples.size());
  CHECK((*summary.chat_mean - offline).cwiseAbs().maxCoeff() < 1e-12);
}
