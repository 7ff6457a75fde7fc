#include "tenside/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tenside {

Real rmse(const Vector& predicted, const Vector& actual) {
  if (predicted.size() == 0)
    throw std::invalid_argument("rmse: empty input");
  if (predicted.size() != actual.size())
    throw std::invalid_argument("rmse: length mismatch");
  return std::sqrt((predicted - actual).squaredNorm() /
                   static_cast<Real>(predicted.size()));
}

Real nearestRankQuantile(std::vector<Real> values, Real q) {
  if (values.empty())
    throw std::invalid_argument("nearestRankQuantile: empty input");
  if (q <= 0 || q > 1)
    throw std::invalid_argument("nearestRankQuantile: q must be in (0, 1]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<size_t>(
      std::ceil(q * static_cast<Real>(values.size())));
  return values[rank - 1];
}

Matrix normalizedMeasurementLatents(const SamplerState& state) {
  if (state.modes.size() != 3)
    throw std::invalid_argument("normalizedMeasurementLatents: requires a 3-mode state");
  const Matrix& c = state.modes[0].latent;
  const Matrix& p = state.modes[1].latent;
  const Matrix& t = state.modes[2].latent;
  const Index d = t.rows();
  const Index n_types = t.cols();
  Matrix out(n_types, d);
  for (Index dd = 0; dd < d; ++dd) {
    Real scale = c.row(dd).norm() * p.row(dd).norm();
    for (Index k = 0; k < n_types; ++k) out(k, dd) = t(dd, k) * scale;
  }
  return out;
}

std::vector<bool> selectDivergentDims(const std::vector<Matrix>& reports,
                                      Real tau) {
  if (reports.size() < 30)
    throw std::invalid_argument("selectDivergentDims: need at least 30 retained samples");
  const Index d = reports.front().cols();
  std::vector<Real> mean_abs(static_cast<size_t>(d), 0.0);
  for (const Matrix& r : reports) {
    if (r.rows() < 2 || r.cols() != d)
      throw std::invalid_argument("selectDivergentDims: inconsistent report shapes");
    for (Index dd = 0; dd < d; ++dd)
      mean_abs[static_cast<size_t>(dd)] += std::abs(r(1, dd) - r(0, dd));
  }
  for (auto& v : mean_abs) v /= static_cast<Real>(reports.size());

  std::vector<Real> sorted = mean_abs;
  std::sort(sorted.begin(), sorted.end());
  size_t n = sorted.size();
  Real median = n % 2 ? sorted[n / 2] : (sorted[n / 2 - 1] + sorted[n / 2]) / 2;

  std::vector<bool> mask(static_cast<size_t>(d));
  for (size_t dd = 0; dd < mask.size(); ++dd)
    mask[dd] = mean_abs[dd] > tau * median;
  return mask;
}

InteractionDifferenceTable interactionDifference(
    const std::vector<std::vector<Matrix>>& latent_samples,
    const std::vector<bool>& mask) {
  if (latent_samples.empty())
    throw std::invalid_argument("interactionDifference: no samples");
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    throw std::invalid_argument(
        "interactionDifference: mask selects no dimensions; no divergent "
        "dimensions exist for this run");

  const auto& first = latent_samples.front();
  if (first.size() != 3)
    throw std::invalid_argument("interactionDifference: samples must cover 3 modes");
  const Index d = first[0].rows();
  if (mask.size() != static_cast<size_t>(d))
    throw std::invalid_argument("interactionDifference: mask length does not match D");

  Matrix chat = Matrix::Zero(first[0].cols(), first[1].cols());
  for (const auto& sample : latent_samples) {
    const Matrix& c = sample[0];
    const Matrix& p = sample[1];
    const Matrix& t = sample[2];
    Vector w(d);
    for (Index dd = 0; dd < d; ++dd)
      w(dd) = mask[static_cast<size_t>(dd)] ? t(dd, 1) - t(dd, 0) : 0.0;
    chat += (c.transpose() * w.asDiagonal() * p).cwiseAbs();
  }
  chat /= static_cast<Real>(latent_samples.size());
  return interactionTableFromChat(std::move(chat));
}

InteractionDifferenceTable interactionTableFromChat(Matrix chat) {
  InteractionDifferenceTable table;
  table.q95.resize(chat.cols());
  for (Index j = 0; j < chat.cols(); ++j) {
    std::vector<Real> column(chat.col(j).data(), chat.col(j).data() + chat.rows());
    table.q95(j) = nearestRankQuantile(std::move(column), 0.95);
  }
  table.chat = std::move(chat);
  return table;
}

ProteinRanking rankProteins(const InteractionDifferenceTable& table, Index top_n) {
  const Index n = table.q95.size();
  if (top_n > n)
    throw std::invalid_argument("rankProteins: top_n exceeds protein count");
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (table.q95(a) != table.q95(b)) return table.q95(a) > table.q95(b);
    return a < b;
  });
  ProteinRanking ranking;
  for (Index i = 0; i < top_n; ++i)
    ranking.top.emplace_back(order[static_cast<size_t>(i)],
                             table.q95(order[static_cast<size_t>(i)]));
  for (Index i = n - top_n; i < n; ++i)
    ranking.bottom.emplace_back(order[static_cast<size_t>(i)],
                                table.q95(order[static_cast<size_t>(i)]));
  return ranking;
}

namespace detail {

namespace {

Real betaContinuedFraction(Real a, Real b, Real x) {
  constexpr int kMaxIter = 300;
  constexpr Real kEps = 1e-15;
  constexpr Real kTiny = 1e-300;
  Real qab = a + b, qap = a + 1, qam = a - 1;
  Real c = 1, d = 1 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1 / d;
  Real h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    Real m2 = 2.0 * m;
    Real aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1 / d;
    Real delta = d * c;
    h *= delta;
    if (std::abs(delta - 1) < kEps) break;
  }
  return h;
}

}  // namespace

Real regularizedIncompleteBeta(Real a, Real b, Real x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  Real log_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                a * std::log(x) + b * std::log1p(-x);
  Real bt = std::exp(log_bt);
  if (x < (a + 1) / (a + b + 2)) return bt * betaContinuedFraction(a, b, x) / a;
  return 1 - bt * betaContinuedFraction(b, a, 1 - x) / b;
}

Real studentTwoSidedP(Real t, Real dof) {
  if (!std::isfinite(t)) return 0;
  return regularizedIncompleteBeta(dof / 2, 0.5, dof / (dof + t * t));
}

}  // namespace detail

WelchResult pairTypeDiscrimination(const std::vector<Real>& diffs_a,
                                   const std::vector<Real>& diffs_b) {
  if (diffs_a.size() < 2 || diffs_b.size() < 2)
    throw std::invalid_argument("pairTypeDiscrimination: need at least 2 pairs per group");

  auto stats = [](const std::vector<Real>& v) {
    Real mean = 0;
    for (Real x : v) mean += std::abs(x);
    mean /= static_cast<Real>(v.size());
    Real var = 0;
    for (Real x : v) {
      Real r = std::abs(x) - mean;
      var += r * r;
    }
    var /= static_cast<Real>(v.size() - 1);
    return std::pair<Real, Real>{mean, var};
  };
  auto [ma, va] = stats(diffs_a);
  auto [mb, vb] = stats(diffs_b);
  const Real na = static_cast<Real>(diffs_a.size());
  const Real nb = static_cast<Real>(diffs_b.size());

  WelchResult result;
  result.mean_abs_a = ma;
  result.mean_abs_b = mb;
  Real se2 = va / na + vb / nb;
  if (se2 == 0) {
    result.degenerate = true;
    result.t = 0;
    result.p = ma == mb ? 1.0 : 0.0;
    return result;
  }
  result.t = (ma - mb) / std::sqrt(se2);
  Real dof = se2 * se2 /
             (va * va / (na * na * (na - 1)) + vb * vb / (nb * nb * (nb - 1)));
  result.p = detail::studentTwoSidedP(result.t, dof);
  return result;
}

}  // namespace tenside
