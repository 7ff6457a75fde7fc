#include "tenside/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "tenside/analysis.hpp"
#include "tenside/gaussian.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tenside {

namespace {

std::vector<std::string> splitTabs(const std::string& line) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  for (;;) {
    auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::string trimmed(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' '))
    s.pop_back();
  return s;
}

Index parseIndex(const std::string& token, const std::string& path, long line_no) {
  try {
    size_t pos = 0;
    long long v = std::stoll(token, &pos);
    if (pos != token.size()) throw std::invalid_argument("trailing characters");
    return static_cast<Index>(v);
  } catch (const std::exception&) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": malformed index '" + token + "'");
  }
}

Real parseReal(const std::string& token, const std::string& path, long line_no) {
  try {
    size_t pos = 0;
    Real v = std::stod(token, &pos);
    if (pos != token.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) +
                             ": non-numeric value '" + token + "'");
  }
}

std::ofstream openOut(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << std::setprecision(17);
  return out;
}

std::ifstream openIn(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return in;
}

}  // namespace

ObservationSet loadTensor(const std::string& path,
                          const std::vector<Index>& dims_override) {
  auto in = openIn(path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": empty file");
  ++line_no;
  auto header = splitTabs(trimmed(line));
  if (header.size() < 3)
    throw std::runtime_error(path + ": header must have at least two mode columns and a value column");
  const Index n_modes = static_cast<Index>(header.size()) - 1;

  ObservationSet data;
  data.mode_dims.assign(static_cast<size_t>(n_modes), 0);
  std::unordered_set<std::string> seen;
  std::vector<Index> cell(static_cast<size_t>(n_modes));
  while (std::getline(in, line)) {
    ++line_no;
    auto stripped = trimmed(line);
    if (stripped.empty()) continue;
    auto tokens = splitTabs(stripped);
    if (tokens.size() != header.size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(header.size()) +
                               " columns, got " + std::to_string(tokens.size()));
    std::string key;
    for (Index m = 0; m < n_modes; ++m) {
      Index i = parseIndex(tokens[static_cast<size_t>(m)], path, line_no);
      if (i < 0)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": negative index");
      cell[static_cast<size_t>(m)] = i;
      key += tokens[static_cast<size_t>(m)];
      key += ',';
      data.mode_dims[static_cast<size_t>(m)] =
          std::max(data.mode_dims[static_cast<size_t>(m)], i + 1);
    }
    if (!seen.insert(key).second)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": duplicate cell");
    data.append(cell, parseReal(tokens.back(), path, line_no));
  }
  if (data.size() == 0) throw std::runtime_error(path + ": no observations");
  if (!dims_override.empty()) {
    if (dims_override.size() != static_cast<size_t>(n_modes))
      throw std::runtime_error(path + ": mode_dims override arity mismatch");
    for (Index m = 0; m < n_modes; ++m) {
      if (dims_override[static_cast<size_t>(m)] < data.mode_dims[static_cast<size_t>(m)])
        throw std::runtime_error(path + ": mode_dims override smaller than observed indices for mode " +
                                 std::to_string(m));
      data.mode_dims[static_cast<size_t>(m)] = dims_override[static_cast<size_t>(m)];
    }
  }
  data.validate();
  return data;
}

void writeTensor(const std::string& path, const ObservationSet& data) {
  auto out = openOut(path);
  for (Index m = 0; m < data.nModes(); ++m) out << "mode" << m << '\t';
  out << "value\n";
  for (Index e = 0; e < data.size(); ++e) {
    for (Index m = 0; m < data.nModes(); ++m) out << data.index(e, m) << '\t';
    out << data.values[static_cast<size_t>(e)] << '\n';
  }
}

CsrMatrix loadSideInfo(const std::string& path) {
  auto in = openIn(path);
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  ++line_no;
  std::istringstream hs(trimmed(line));
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  if (banner != "%%MatrixMarket" || lower(object) != "matrix" ||
      lower(format) != "coordinate")
    throw std::runtime_error(path + ": not a MatrixMarket coordinate file");
  field = lower(field);
  symmetry = lower(symmetry);
  const bool pattern = field == "pattern";
  if (!pattern && field != "real" && field != "integer")
    throw std::runtime_error(path + ": unsupported field type '" + field + "'");
  if (symmetry != "general")
    throw std::runtime_error(path + ": only general symmetry is supported");

  long long nrows = -1, ncols = -1, nnz = -1;
  while (std::getline(in, line)) {
    ++line_no;
    auto stripped = trimmed(line);
    if (stripped.empty() || stripped[0] == '%') continue;
    std::istringstream ds(stripped);
    if (!(ds >> nrows >> ncols >> nnz) || nrows < 0 || ncols < 0 || nnz < 0)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed size line");
    break;
  }
  if (nrows < 0) throw std::runtime_error(path + ": missing size line");

  std::vector<Eigen::Triplet<Real>> triplets;
  triplets.reserve(static_cast<size_t>(nnz));
  std::unordered_set<long long> seen;
  long long count = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto stripped = trimmed(line);
    if (stripped.empty() || stripped[0] == '%') continue;
    std::istringstream es(stripped);
    long long r = 0, c = 0;
    if (!(es >> r >> c))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed entry");
    Real value = 1.0;
    if (!pattern && !(es >> value))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": missing value");
    if (r < 1 || r > nrows || c < 1 || c > ncols)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": entry (" + std::to_string(r) + ", " +
                               std::to_string(c) + ") out of declared bounds " +
                               std::to_string(nrows) + "x" + std::to_string(ncols));
    if (!seen.insert((r - 1) * ncols + (c - 1)).second)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": duplicate entry");
    triplets.emplace_back(static_cast<int>(r - 1), static_cast<int>(c - 1), value);
    ++count;
  }
  if (count != nnz)
    throw std::runtime_error(path + ": declared " + std::to_string(nnz) +
                             " entries, found " + std::to_string(count));
  CsrMatrix m(static_cast<Index>(nrows), static_cast<Index>(ncols));
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

void writeMatrixMarket(const std::string& path, const CsrMatrix& m) {
  auto out = openOut(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  for (Index r = 0; r < m.rows(); ++r)
    for (CsrMatrix::InnerIterator it(m, r); it; ++it)
      out << (r + 1) << ' ' << (it.col() + 1) << ' ' << it.value() << '\n';
}

namespace {

void samplerFromJson(const json& j, SamplerConfig& cfg) {
  cfg.latent_dim = j.value("latent_dim", cfg.latent_dim);
  cfg.burn_in = j.value("burn_in", cfg.burn_in);
  cfg.n_samples = j.value("n_samples", cfg.n_samples);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.threads = j.value("threads", cfg.threads);
  cfg.store_latents = j.value("store_latents", cfg.store_latents);
  if (j.contains("cg")) {
    const auto& c = j.at("cg");
    cfg.cg.rel_tolerance = c.value("rel_tolerance", cfg.cg.rel_tolerance);
    cfg.cg.abs_tolerance = c.value("abs_tolerance", cfg.cg.abs_tolerance);
    cfg.cg.max_iterations = c.value("max_iterations", cfg.cg.max_iterations);
  }
  if (j.contains("hyper")) {
    const auto& h = j.at("hyper");
    cfg.hyper.kappa0 = h.value("kappa0", cfg.hyper.kappa0);
    cfg.hyper.nu0 = h.value("nu0", cfg.hyper.nu0);
    if (h.contains("alpha_fixed") && !h.at("alpha_fixed").is_null())
      cfg.hyper.alpha_fixed = h.at("alpha_fixed").get<Real>();
    cfg.hyper.alpha_prior.shape = h.value("alpha_shape", cfg.hyper.alpha_prior.shape);
    cfg.hyper.alpha_prior.rate = h.value("alpha_rate", cfg.hyper.alpha_prior.rate);
    cfg.hyper.lambda_beta_value = h.value("lambda_beta", cfg.hyper.lambda_beta_value);
    cfg.hyper.sample_lambda_beta =
        h.value("sample_lambda_beta", cfg.hyper.sample_lambda_beta);
    cfg.hyper.lambda_beta_prior.shape =
        h.value("lambda_beta_shape", cfg.hyper.lambda_beta_prior.shape);
    cfg.hyper.lambda_beta_prior.rate =
        h.value("lambda_beta_rate", cfg.hyper.lambda_beta_prior.rate);
  }
}

json samplerToJson(const SamplerConfig& cfg) {
  json h = {
      {"kappa0", cfg.hyper.kappa0},
      {"nu0", cfg.hyper.nu0},
      {"alpha_shape", cfg.hyper.alpha_prior.shape},
      {"alpha_rate", cfg.hyper.alpha_prior.rate},
      {"lambda_beta", cfg.hyper.lambda_beta_value},
      {"sample_lambda_beta", cfg.hyper.sample_lambda_beta},
      {"lambda_beta_shape", cfg.hyper.lambda_beta_prior.shape},
      {"lambda_beta_rate", cfg.hyper.lambda_beta_prior.rate},
  };
  if (cfg.hyper.alpha_fixed)
    h["alpha_fixed"] = *cfg.hyper.alpha_fixed;
  else
    h["alpha_fixed"] = nullptr;
  return json{
      {"latent_dim", cfg.latent_dim},
      {"burn_in", cfg.burn_in},
      {"n_samples", cfg.n_samples},
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"store_latents", cfg.store_latents},
      {"cg",
       {{"rel_tolerance", cfg.cg.rel_tolerance},
        {"abs_tolerance", cfg.cg.abs_tolerance},
        {"max_iterations", cfg.cg.max_iterations}}},
      {"hyper", h},
  };
}

}  // namespace

RunManifest RunManifest::load(const std::string& path) {
  auto in = openIn(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty()) return p;
    fs::path fp(p);
    return (fp.is_absolute() ? fp : base / fp).string();
  };

  RunManifest m;
  if (!j.contains("tensor")) throw std::runtime_error(path + ": missing 'tensor'");
  m.tensor_path = resolve(j.at("tensor").get<std::string>());
  if (j.contains("side_info")) {
    for (const auto& e : j.at("side_info"))
      m.side_info_paths.push_back(e.is_null() ? std::string{}
                                              : resolve(e.get<std::string>()));
  }
  if (j.contains("test") && !j.at("test").is_null())
    m.test_path = resolve(j.at("test").get<std::string>());
  if (j.contains("mode_dims"))
    m.mode_dims = j.at("mode_dims").get<std::vector<Index>>();
  if (j.contains("mode_names"))
    m.mode_names = j.at("mode_names").get<std::vector<std::string>>();
  if (j.contains("output")) m.output_dir = resolve(j.at("output").get<std::string>());
  if (j.contains("sampler")) samplerFromJson(j.at("sampler"), m.sampler);

  if (!fs::exists(m.tensor_path))
    throw std::runtime_error(path + ": tensor file '" + m.tensor_path + "' does not exist");
  for (const auto& p : m.side_info_paths)
    if (!p.empty() && !fs::exists(p))
      throw std::runtime_error(path + ": side-info file '" + p + "' does not exist");
  if (!m.test_path.empty() && !fs::exists(m.test_path))
    throw std::runtime_error(path + ": test file '" + m.test_path + "' does not exist");
  return m;
}

std::string RunManifest::runConfigJson() const {
  json side = json::array();
  for (const auto& p : side_info_paths) {
    if (p.empty())
      side.push_back(nullptr);
    else
      side.push_back(p);
  }
  json j = {
      {"tensor", tensor_path},
      {"side_info", side},
      {"test", test_path.empty() ? json(nullptr) : json(test_path)},
      {"mode_dims", mode_dims},
      {"mode_names", mode_names},
      {"output", output_dir},
      {"sampler", samplerToJson(sampler)},
  };
  return j.dump(2);
}

LoadedDataset loadDataset(const RunManifest& manifest) {
  LoadedDataset ds;
  ds.train = loadTensor(manifest.tensor_path, manifest.mode_dims);
  const Index n_modes = ds.train.nModes();
  if (!manifest.side_info_paths.empty() &&
      manifest.side_info_paths.size() != static_cast<size_t>(n_modes))
    throw std::runtime_error("manifest: side_info list arity does not match mode count");

  ds.modes.resize(static_cast<size_t>(n_modes));
  for (Index m = 0; m < n_modes; ++m) {
    ModeData& md = ds.modes[static_cast<size_t>(m)];
    md.dim = ds.train.mode_dims[static_cast<size_t>(m)];
    md.name = m < static_cast<Index>(manifest.mode_names.size())
                  ? manifest.mode_names[static_cast<size_t>(m)]
                  : "mode" + std::to_string(m);
    if (m < static_cast<Index>(manifest.side_info_paths.size()) &&
        !manifest.side_info_paths[static_cast<size_t>(m)].empty()) {
      md.side_info = loadSideInfo(manifest.side_info_paths[static_cast<size_t>(m)]);
      if (md.side_info->rows() < md.dim)
        throw std::runtime_error("side info for mode " + std::to_string(m) +
                                 " has fewer rows than entities");
      // Feature-only entities extend the mode beyond the observed indices.
      md.dim = std::max(md.dim, md.side_info->rows());
    }
  }
  std::vector<Index> dims;
  for (const auto& md : ds.modes) dims.push_back(md.dim);
  ds.train.mode_dims = dims;
  if (!manifest.test_path.empty()) {
    ds.test = loadTensor(manifest.test_path, dims);
  }
  return ds;
}

void GenSpec::validate() const {
  if (dims.size() != 2 && dims.size() != 3)
    throw std::invalid_argument("GenSpec: 2 or 3 modes supported");
  for (Index d : dims)
    if (d <= 0) throw std::invalid_argument("GenSpec: dimensions must be positive");
  if (d_true < 1) throw std::invalid_argument("GenSpec: d_true must be >= 1");
  if (offset_dims < 0 || offset_dims > d_true)
    throw std::invalid_argument("GenSpec: offset_dims must be in [0, d_true]");
  if (offset_dims > 0 && dims.size() != 3)
    throw std::invalid_argument("GenSpec: offsets require a 3-mode tensor");
  if (offset_dims > 0 && dims[2] != 2)
    throw std::invalid_argument("GenSpec: offsets require exactly 2 measurement slices");
  if (n_features < 1 || n_feature_groups < 1 || n_feature_groups > n_features)
    throw std::invalid_argument("GenSpec: bad feature shape");
  if (feature_density <= 0 || feature_density > 1 || obs_fraction <= 0 ||
      obs_fraction > 1 || holdout_fraction < 0 || holdout_fraction >= 1 ||
      cold_start_fraction < 0 || cold_start_fraction >= 1 ||
      competitive_fraction <= 0 || competitive_fraction > 1)
    throw std::invalid_argument("GenSpec: fractions out of range");
  if (noise_sd < 0 || latent_noise_sd < 0)
    throw std::invalid_argument("GenSpec: noise magnitudes must be non-negative");
}

SyntheticData genSynthetic(const GenSpec& spec) {
  spec.validate();
  const Index n_modes = static_cast<Index>(spec.dims.size());
  const Index nc = spec.dims[0];
  const Index d = spec.d_true;

  SyntheticData out;
  out.dims = spec.dims;

  // Grouped binary features: each feature belongs to a group, each compound
  // activates a random subset of groups. Keeps the effective feature dimension
  // low so feature-only entities are predictable from warm ones.
  auto feat_rs = rng::stream(spec.seed, rng::Purpose::Gen, 0);
  std::vector<Eigen::Triplet<Real>> triplets;
  {
    std::vector<char> active(static_cast<size_t>(spec.n_feature_groups));
    for (Index i = 0; i < nc; ++i) {
      bool any = false;
      for (Index g = 0; g < spec.n_feature_groups; ++g) {
        active[static_cast<size_t>(g)] = feat_rs.uniform() < spec.feature_density;
        any = any || active[static_cast<size_t>(g)];
      }
      if (!any) active[static_cast<size_t>(i % spec.n_feature_groups)] = 1;
      for (Index f = 0; f < spec.n_features; ++f) {
        bool on = active[static_cast<size_t>(f % spec.n_feature_groups)];
        if (spec.feature_flip_prob > 0 && feat_rs.uniform() < spec.feature_flip_prob)
          on = !on;
        if (on) triplets.emplace_back(static_cast<int>(i), static_cast<int>(f), 1.0);
      }
    }
  }
  out.features = CsrMatrix(nc, spec.n_features);
  out.features.setFromTriplets(triplets.begin(), triplets.end());
  out.features.makeCompressed();

  // True latents. Mode 0 comes from the features through a true link matrix,
  // standardized to unit per-dimension variance.
  auto latent_rs = rng::stream(spec.seed, rng::Purpose::Gen, 1);
  out.true_latents.resize(static_cast<size_t>(n_modes));
  {
    Matrix beta_raw(d, spec.n_features);
    fillStandardNormal(beta_raw, latent_rs);
    Matrix c = (out.features * beta_raw.transpose()).transpose();  // d x nc
    for (Index dd = 0; dd < d; ++dd) {
      Real mean = c.row(dd).mean();
      c.row(dd).array() -= mean;
      Real sd = std::sqrt(c.row(dd).squaredNorm() / static_cast<Real>(nc));
      if (sd < 1e-9) sd = 1;
      c.row(dd) /= sd;
    }
    if (spec.latent_noise_sd > 0)
      for (Index j = 0; j < nc; ++j)
        for (Index dd = 0; dd < d; ++dd)
          c(dd, j) += spec.latent_noise_sd * latent_rs.normal();
    out.true_latents[0] = std::move(c);
  }
  for (Index m = 1; m < n_modes; ++m) {
    Matrix lat(d, spec.dims[static_cast<size_t>(m)]);
    fillStandardNormal(lat, latent_rs);
    out.true_latents[static_cast<size_t>(m)] = std::move(lat);
  }

  const bool planted = n_modes == 3 && spec.offset_dims > 0;
  if (n_modes == 3) {
    // Measurement latents scaled so per-cell signal variance is about 1.
    Matrix& t = out.true_latents[2];
    t /= std::sqrt(static_cast<Real>(d));
    // Two-slice tensors model paired measurement types: identical up to the
    // planted offsets, so slice differences come only from those offsets.
    if (spec.dims[2] == 2) t.col(1) = t.col(0);
    if (planted) {
      const Index np = spec.dims[1];
      Matrix& p = out.true_latents[1];
      out.competitive.assign(static_cast<size_t>(np), 0);
      std::vector<Index> order(static_cast<size_t>(np));
      std::iota(order.begin(), order.end(), Index{0});
      std::shuffle(order.begin(), order.end(), latent_rs.engine());
      auto n_comp = static_cast<Index>(
          std::lround(spec.competitive_fraction * static_cast<Real>(np)));
      n_comp = std::max<Index>(n_comp, 1);
      for (Index k = 0; k < n_comp; ++k)
        out.competitive[static_cast<size_t>(order[static_cast<size_t>(k)])] = 1;

      const Real unit = spec.offset_scale / std::sqrt(static_cast<Real>(d));
      for (Index dd = d - spec.offset_dims; dd < d; ++dd) {
        Real sign = latent_rs.uniform() < 0.5 ? -1.0 : 1.0;
        t(dd, 1) = t(dd, 0) + sign * unit;
        // Offset dimensions only act on competitive proteins.
        for (Index j = 0; j < np; ++j)
          if (!out.competitive[static_cast<size_t>(j)]) p(dd, j) = 0;
      }
      out.planted_offsets = Matrix::Zero(nc, np);
      for (Index dd = d - spec.offset_dims; dd < d; ++dd) {
        Real delta = t(dd, 1) - t(dd, 0);
        out.planted_offsets.noalias() +=
            delta * out.true_latents[0].row(dd).transpose() * p.row(dd);
      }
    }
  }

  // Observed cells, split into train and test. Feature-only (cold-start)
  // entities of mode 0 contribute test cells only.
  auto obs_rs = rng::stream(spec.seed, rng::Purpose::Gen, 2);
  std::vector<char> cold(static_cast<size_t>(nc), 0);
  if (spec.cold_start_fraction > 0) {
    std::vector<Index> order(static_cast<size_t>(nc));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), obs_rs.engine());
    auto n_cold = static_cast<Index>(
        std::lround(spec.cold_start_fraction * static_cast<Real>(nc)));
    for (Index k = 0; k < n_cold; ++k)
      cold[static_cast<size_t>(order[static_cast<size_t>(k)])] = 1;
  }

  out.train.mode_dims = spec.dims;
  out.test.mode_dims = spec.dims;
  std::vector<Index> cell(static_cast<size_t>(n_modes), 0);
  for (;;) {
    if (obs_rs.uniform() < spec.obs_fraction) {
      Vector prod = Vector::Ones(d);
      for (Index m = 0; m < n_modes; ++m)
        prod.array() *= out.true_latents[static_cast<size_t>(m)]
                            .col(cell[static_cast<size_t>(m)])
                            .array();
      Real value = prod.sum();
      if (spec.noise_sd > 0) value += spec.noise_sd * obs_rs.normal();

      const Index slice = n_modes == 3 ? cell[2] : Index{0};
      const Real split_draw = obs_rs.uniform();
      if (cold[static_cast<size_t>(cell[0])]) {
        if (slice == 0) out.test.append(cell, value);
      } else if (slice == 0 && split_draw < spec.holdout_fraction) {
        out.test.append(cell, value);
      } else {
        out.train.append(cell, value);
      }
    }
    // Odometer over all index tuples.
    Index m = n_modes - 1;
    for (;;) {
      if (++cell[static_cast<size_t>(m)] < spec.dims[static_cast<size_t>(m)]) break;
      cell[static_cast<size_t>(m)] = 0;
      if (m == 0) break;
      --m;
    }
    if (m == 0 && cell[0] == 0) break;
  }
  if (out.train.size() == 0)
    throw std::runtime_error("genSynthetic: produced no training observations");
  return out;
}

namespace {

void writeDenseTsv(const std::string& path, const Matrix& m) {
  auto out = openOut(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "\t" : "") << m(i, j);
    out << '\n';
  }
}

}  // namespace

void writeSynthetic(const SyntheticData& data, const GenSpec& spec,
                    const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "truth");
  writeTensor((fs::path(out_dir) / "train.tsv").string(), data.train);
  const bool have_test = data.test.size() > 0;
  if (have_test) writeTensor((fs::path(out_dir) / "test.tsv").string(), data.test);
  writeMatrixMarket((fs::path(out_dir) / "features.mm").string(), data.features);
  for (size_t m = 0; m < data.true_latents.size(); ++m)
    writeDenseTsv((fs::path(out_dir) / "truth" /
                   ("latents-mode" + std::to_string(m) + ".tsv"))
                      .string(),
                  data.true_latents[m]);
  if (data.planted_offsets.size() > 0)
    writeDenseTsv((fs::path(out_dir) / "truth" / "offsets.tsv").string(),
                  data.planted_offsets);
  if (!data.competitive.empty()) {
    auto out = openOut((fs::path(out_dir) / "truth" / "competitive.tsv").string());
    out << "protein\tcompetitive\n";
    for (size_t j = 0; j < data.competitive.size(); ++j)
      out << j << '\t' << data.competitive[j] << '\n';
  }

  json side = json::array();
  side.push_back("features.mm");
  for (size_t m = 1; m < data.dims.size(); ++m) side.push_back(nullptr);
  json manifest = {
      {"tensor", "train.tsv"},
      {"side_info", side},
      {"test", have_test ? json("test.tsv") : json(nullptr)},
      {"mode_dims", data.dims},
      {"mode_names", data.dims.size() == 3
                         ? std::vector<std::string>{"compound", "protein", "measurement"}
                         : std::vector<std::string>{"row", "column"}},
      {"output", "out"},
      {"sampler",
       {{"latent_dim", 10},
        {"burn_in", 100},
        {"n_samples", 200},
        {"seed", spec.seed},
        {"threads", 0}}},
  };
  auto out = openOut((fs::path(out_dir) / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

void writeLatentSamples(const std::string& path,
                        const std::vector<std::vector<Matrix>>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  auto put = [&](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  put(0x54534c5331ull);  // format tag
  put(samples.size());
  const size_t n_modes = samples.empty() ? 0 : samples.front().size();
  put(n_modes);
  if (!samples.empty()) {
    put(static_cast<std::uint64_t>(samples.front().front().rows()));
    for (size_t m = 0; m < n_modes; ++m)
      put(static_cast<std::uint64_t>(samples.front()[m].cols()));
    for (const auto& sample : samples)
      for (const auto& lat : sample)
        out.write(reinterpret_cast<const char*>(lat.data()),
                  static_cast<std::streamsize>(sizeof(Real) * lat.size()));
  }
}

std::vector<std::vector<Matrix>> readLatentSamples(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  auto get = [&] {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error(path + ": truncated latent-sample file");
    return v;
  };
  if (get() != 0x54534c5331ull)
    throw std::runtime_error(path + ": not a latent-sample file");
  const auto n_samples = get();
  const auto n_modes = get();
  std::vector<std::vector<Matrix>> samples;
  if (n_samples == 0 || n_modes == 0) return samples;
  const auto d = static_cast<Index>(get());
  std::vector<Index> dims;
  for (std::uint64_t m = 0; m < n_modes; ++m) dims.push_back(static_cast<Index>(get()));
  samples.resize(n_samples);
  for (auto& sample : samples) {
    sample.resize(n_modes);
    for (std::uint64_t m = 0; m < n_modes; ++m) {
      sample[m].resize(d, dims[m]);
      in.read(reinterpret_cast<char*>(sample[m].data()),
              static_cast<std::streamsize>(sizeof(Real) * sample[m].size()));
      if (!in) throw std::runtime_error(path + ": truncated latent-sample file");
    }
  }
  return samples;
}

void writeSummary(const std::string& out_dir, const PosteriorSummary& summary,
                  const ObservationSet& train,
                  const std::optional<ObservationSet>& test,
                  const RunManifest* manifest) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  {
    const ObservationSet& cells = test ? *test : train;
    const Vector& pred = test ? summary.test_pred_mean : summary.train_pred_mean;
    auto out = openOut((dir / "predictions.tsv").string());
    for (Index m = 0; m < cells.nModes(); ++m) out << "mode" << m << '\t';
    out << "observed\tpredicted\n";
    for (Index e = 0; e < cells.size(); ++e) {
      for (Index m = 0; m < cells.nModes(); ++m) out << cells.index(e, m) << '\t';
      out << cells.values[static_cast<size_t>(e)] << '\t'
          << std::setprecision(6) << pred(e) << std::setprecision(17) << '\n';
    }
  }
  {
    auto out = openOut((dir / "test-metrics.tsv").string());
    out << std::setprecision(6) << "metric\tvalue\n";
    Vector train_actual = Eigen::Map<const Vector>(train.values.data(),
                                                   static_cast<Index>(train.values.size()));
    out << "train_rmse\t" << rmse(summary.train_pred_mean, train_actual) << '\n';
    if (test) {
      Vector test_actual = Eigen::Map<const Vector>(test->values.data(),
                                                    static_cast<Index>(test->values.size()));
      out << "test_rmse\t" << rmse(summary.test_pred_mean, test_actual) << '\n';
    }
    out << "n_samples\t" << summary.n_retained << '\n';
  }
  if (!summary.measurement_report.empty()) {
    auto out = openOut((dir / "measurement-latents.tsv").string());
    out << "sample\tdim\ttype\tvalue\n";
    for (size_t s = 0; s < summary.measurement_report.size(); ++s) {
      const Matrix& r = summary.measurement_report[s];
      for (Index dd = 0; dd < r.cols(); ++dd)
        for (Index k = 0; k < r.rows(); ++k)
          out << s << '\t' << dd << '\t' << k << '\t' << r(k, dd) << '\n';
    }
  }
  {
    auto out = openOut((dir / "mean-latents.tsv").string());
    out << "mode\tdim\tentity\tvalue\n";
    for (size_t m = 0; m < summary.latent_mean.size(); ++m) {
      const Matrix& lat = summary.latent_mean[m];
      for (Index dd = 0; dd < lat.rows(); ++dd)
        for (Index i = 0; i < lat.cols(); ++i)
          out << m << '\t' << dd << '\t' << i << '\t' << lat(dd, i) << '\n';
    }
  }
  if (summary.chat_mean) {
    auto table = interactionTableFromChat(*summary.chat_mean);
    auto out = openOut((dir / "chat.tsv").string());
    out << "rank\tprotein\tq95\n";
    auto ranking = rankProteins(table, table.q95.size());
    for (size_t r = 0; r < ranking.top.size(); ++r)
      out << r << '\t' << ranking.top[r].first << '\t' << ranking.top[r].second << '\n';
  }
  if (!summary.latent_samples.empty())
    writeLatentSamples((dir / "latent-samples.bin").string(), summary.latent_samples);
  {
    auto out = openOut((dir / "run-config").string());
    if (manifest) {
      out << manifest->runConfigJson() << '\n';
    } else {
      out << json{{"n_samples", summary.n_retained}}.dump(2) << '\n';
    }
  }
}

std::vector<Matrix> readMeasurementReports(const std::string& path) {
  auto in = openIn(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  std::map<std::tuple<long, Index, Index>, Real> entries;
  long n_samples = 0;
  Index n_dims = 0, n_types = 0;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto stripped = trimmed(line);
    if (stripped.empty()) continue;
    auto tokens = splitTabs(stripped);
    if (tokens.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 4 columns");
    long s = parseIndex(tokens[0], path, line_no);
    Index dd = parseIndex(tokens[1], path, line_no);
    Index k = parseIndex(tokens[2], path, line_no);
    entries[{s, k, dd}] = parseReal(tokens[3], path, line_no);
    n_samples = std::max(n_samples, s + 1);
    n_dims = std::max(n_dims, dd + 1);
    n_types = std::max(n_types, k + 1);
  }
  std::vector<Matrix> reports(static_cast<size_t>(n_samples),
                              Matrix::Zero(n_types, n_dims));
  for (const auto& [key, value] : entries) {
    auto [s, k, dd] = key;
    reports[static_cast<size_t>(s)](k, dd) = value;
  }
  return reports;
}

std::vector<Matrix> readMeanLatents(const std::string& path) {
  auto in = openIn(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  std::map<std::tuple<Index, Index, Index>, Real> entries;
  Index n_modes = 0, n_dims = 0;
  std::map<Index, Index> mode_sizes;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto stripped = trimmed(line);
    if (stripped.empty()) continue;
    auto tokens = splitTabs(stripped);
    if (tokens.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 4 columns");
    Index m = parseIndex(tokens[0], path, line_no);
    Index dd = parseIndex(tokens[1], path, line_no);
    Index i = parseIndex(tokens[2], path, line_no);
    entries[{m, dd, i}] = parseReal(tokens[3], path, line_no);
    n_modes = std::max(n_modes, m + 1);
    n_dims = std::max(n_dims, dd + 1);
    mode_sizes[m] = std::max(mode_sizes[m], i + 1);
  }
  std::vector<Matrix> latents;
  for (Index m = 0; m < n_modes; ++m)
    latents.push_back(Matrix::Zero(n_dims, mode_sizes[m]));
  for (const auto& [key, value] : entries) {
    auto [m, dd, i] = key;
    latents[static_cast<size_t>(m)](dd, i) = value;
  }
  return latents;
}

std::pair<Vector, Vector> readPredictions(const std::string& path) {
  auto in = openIn(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  auto header = splitTabs(trimmed(line));
  if (header.size() < 3)
    throw std::runtime_error(path + ": expected observed and predicted columns");
  std::vector<Real> observed, predicted;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto stripped = trimmed(line);
    if (stripped.empty()) continue;
    auto tokens = splitTabs(stripped);
    if (tokens.size() != header.size())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": column count mismatch");
    observed.push_back(parseReal(tokens[tokens.size() - 2], path, line_no));
    predicted.push_back(parseReal(tokens.back(), path, line_no));
  }
  Vector o = Eigen::Map<Vector>(observed.data(), static_cast<Index>(observed.size()));
  Vector p = Eigen::Map<Vector>(predicted.data(), static_cast<Index>(predicted.size()));
  return {o, p};
}

}  // namespace tenside
