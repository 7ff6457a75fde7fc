#include <CLI11.hpp>

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tenside/analysis.hpp"
#include "tenside/io.hpp"
#include "tenside/sampler.hpp"

namespace fs = std::filesystem;
using namespace tenside;

namespace {

int parseThreads(const std::string& s) {
  if (s == "auto") return 0;
  int t = std::stoi(s);
  if (t < 0) throw CLI::ValidationError("--threads", "must be positive or 'auto'");
  return t;
}

std::vector<Index> parseDims(const std::string& s) {
  std::vector<Index> dims;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) dims.push_back(std::stoll(tok));
  return dims;
}

int runTrain(const std::string& manifest_path, const std::string& out_override,
             std::optional<std::uint64_t> seed_override,
             const std::string& threads_override, bool store_latents) {
  RunManifest manifest = RunManifest::load(manifest_path);
  if (!out_override.empty()) manifest.output_dir = out_override;
  if (manifest.output_dir.empty())
    throw std::runtime_error("no output directory: set 'output' in the manifest or pass --out");
  if (seed_override) manifest.sampler.seed = *seed_override;
  if (!threads_override.empty())
    manifest.sampler.threads = parseThreads(threads_override);
  if (store_latents) manifest.sampler.store_latents = true;

  LoadedDataset ds = loadDataset(manifest);
  PosteriorSummary summary = runSampler(ds.train, ds.modes, ds.test, manifest.sampler);
  writeSummary(manifest.output_dir, summary, ds.train, ds.test, &manifest);

  std::cout << std::setprecision(6);
  Vector train_actual = Eigen::Map<const Vector>(
      ds.train.values.data(), static_cast<Index>(ds.train.values.size()));
  std::cout << "train RMSE: " << rmse(summary.train_pred_mean, train_actual) << '\n';
  if (ds.test) {
    Vector test_actual = Eigen::Map<const Vector>(
        ds.test->values.data(), static_cast<Index>(ds.test->values.size()));
    std::cout << "test RMSE: " << rmse(summary.test_pred_mean, test_actual) << '\n';
  }
  std::cout << "summary written to " << manifest.output_dir << '\n';
  return 0;
}

int runPredict(const std::string& summary_dir, const std::string& cells_path,
               const std::string& out_path) {
  auto latents = readMeanLatents((fs::path(summary_dir) / "mean-latents.tsv").string());

  std::ifstream in(cells_path);
  if (!in) throw std::runtime_error("cannot open '" + cells_path + "'");
  std::ostream* out = &std::cout;
  std::ofstream file_out;
  if (!out_path.empty() && out_path != "-") {
    file_out.open(out_path);
    if (!file_out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    out = &file_out;
  }
  *out << std::setprecision(6);
  for (size_t m = 0; m < latents.size(); ++m) *out << "mode" << m << '\t';
  *out << "predicted\n";

  std::string line;
  long line_no = 0;
  bool header_skipped = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (std::getline(ss, tok, '\t')) tokens.push_back(tok);
    if (!header_skipped) {
      header_skipped = true;
      if (!tokens.empty() && tokens[0].rfind("mode", 0) == 0) continue;
    }
    if (tokens.size() < latents.size())
      throw std::runtime_error(cells_path + ":" + std::to_string(line_no) +
                               ": expected one index per mode");
    std::vector<Index> cell;
    for (size_t m = 0; m < latents.size(); ++m) cell.push_back(std::stoll(tokens[m]));
    for (size_t m = 0; m < latents.size(); ++m) {
      if (cell[m] < 0 || cell[m] >= latents[m].cols()) {
        std::ostringstream os;
        os << "cell (";
        for (size_t k = 0; k < cell.size(); ++k) os << (k ? ", " : "") << cell[k];
        os << "): index " << cell[m] << " out of range for mode " << m << " (dim "
           << latents[m].cols() << ")";
        throw std::runtime_error(os.str());
      }
    }
    Vector prod = Vector::Ones(latents[0].rows());
    for (size_t m = 0; m < latents.size(); ++m)
      prod.array() *= latents[m].col(cell[m]).array();
    for (size_t m = 0; m < latents.size(); ++m) *out << cell[m] << '\t';
    *out << prod.sum() << '\n';
  }
  return 0;
}

int runAnalyze(const std::string& summary_dir, Real tau, Index top_n) {
  const fs::path dir(summary_dir);
  std::cout << std::setprecision(6);

  auto [observed, predicted] = readPredictions((dir / "predictions.tsv").string());
  std::cout << "prediction RMSE: " << rmse(predicted, observed) << '\n';

  auto reports = readMeasurementReports((dir / "measurement-latents.tsv").string());
  auto mask = selectDivergentDims(reports, tau);
  {
    std::vector<Real> mean_abs(mask.size(), 0.0);
    for (const Matrix& r : reports)
      for (size_t dd = 0; dd < mask.size(); ++dd)
        mean_abs[dd] += std::abs(r(1, static_cast<Index>(dd)) -
                                 r(0, static_cast<Index>(dd)));
    std::ofstream out((dir / "divergent-dims.tsv").string());
    out << std::setprecision(17) << "dim\tmean_abs_delta\tselected\n";
    for (size_t dd = 0; dd < mask.size(); ++dd)
      out << dd << '\t' << mean_abs[dd] / static_cast<Real>(reports.size()) << '\t'
          << (mask[dd] ? 1 : 0) << '\n';
  }
  Index n_selected = 0;
  for (bool b : mask) n_selected += b;
  std::cout << "divergent dimensions: " << n_selected << " of " << mask.size() << '\n';

  if (n_selected == 0) {
    std::cout << "no divergent dimensions; skipping interaction-difference ranking\n";
    return 0;
  }
  const auto samples_path = (dir / "latent-samples.bin").string();
  if (!fs::exists(samples_path)) {
    std::cout << "latent-samples.bin not found; re-run train with --store-latents "
                 "to enable the interaction-difference ranking\n";
    return 0;
  }
  auto samples = readLatentSamples(samples_path);
  auto table = interactionDifference(samples, mask);
  {
    std::ofstream out((dir / "chat.tsv").string());
    out << std::setprecision(17) << "rank\tprotein\tq95\n";
    auto full = rankProteins(table, table.q95.size());
    for (size_t r = 0; r < full.top.size(); ++r)
      out << r << '\t' << full.top[r].first << '\t' << full.top[r].second << '\n';
  }
  auto ranking = rankProteins(table, std::min<Index>(top_n, table.q95.size()));
  std::cout << "top proteins by 0.95 quantile of the interaction difference:\n";
  for (const auto& [j, q] : ranking.top)
    std::cout << "  protein " << j << "\tq95 " << q << '\n';
  std::cout << "bottom proteins:\n";
  for (const auto& [j, q] : ranking.bottom)
    std::cout << "  protein " << j << "\tq95 " << q << '\n';
  return 0;
}

int runGen(const GenSpec& spec, const std::string& out_dir) {
  SyntheticData data = genSynthetic(spec);
  writeSynthetic(data, spec, out_dir);
  std::cout << "wrote " << data.train.size() << " train cells, " << data.test.size()
            << " test cells to " << out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian tensor factorization with sparse side information"};
  app.require_subcommand(1);

  // train
  std::string manifest_path, out_dir, threads_str;
  std::optional<std::uint64_t> seed_override;
  bool store_latents = false;
  auto* train = app.add_subcommand("train", "run the Gibbs sampler on a manifest");
  train->add_option("--manifest", manifest_path, "run manifest (JSON)")->required();
  train->add_option("--out", out_dir, "output directory (overrides manifest)");
  train->add_option("--seed", seed_override, "seed override");
  train->add_option("--threads", threads_str, "thread count or 'auto'");
  train->add_flag("--store-latents", store_latents,
                  "retain per-sample latents for analyze");

  // predict
  std::string summary_dir, cells_path, predict_out;
  auto* predict = app.add_subcommand("predict", "predict cells from a trained summary");
  predict->add_option("--summary", summary_dir, "summary directory from train")->required();
  predict->add_option("--cells", cells_path, "TSV of cell indices")->required();
  predict->add_option("--out", predict_out, "output file ('-' for stdout)");

  // analyze
  std::string analyze_dir;
  Real tau = 3.0;
  Index top_n = 10;
  auto* analyze = app.add_subcommand("analyze", "divergent dimensions and protein ranking");
  analyze->add_option("--summary", analyze_dir, "summary directory from train")->required();
  analyze->add_option("--tau", tau, "divergence threshold multiplier");
  analyze->add_option("--top-n", top_n, "ranking size");

  // gen
  GenSpec spec;
  std::string gen_out, dims_str = "400,50,2";
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--dims", dims_str, "mode dimensions, comma separated");
  gen->add_option("--d-true", spec.d_true, "true latent dimension");
  gen->add_option("--features", spec.n_features, "feature count for mode 0");
  gen->add_option("--feature-groups", spec.n_feature_groups, "feature group count");
  gen->add_option("--density", spec.feature_density, "expected feature density");
  gen->add_option("--noise-sd", spec.noise_sd, "observation noise");
  gen->add_option("--latent-noise-sd", spec.latent_noise_sd, "latent noise around beta x");
  gen->add_option("--offset-dims", spec.offset_dims, "planted offset dimensions");
  gen->add_option("--offset-scale", spec.offset_scale, "planted offset magnitude");
  gen->add_option("--competitive-frac", spec.competitive_fraction,
                  "fraction of proteins carrying the offset");
  gen->add_option("--obs-frac", spec.obs_fraction, "fraction of cells observed");
  gen->add_option("--holdout-frac", spec.holdout_fraction, "slice-0 hold-out fraction");
  gen->add_option("--cold-frac", spec.cold_start_fraction, "feature-only entity fraction");
  gen->add_option("--seed", spec.seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train)
      return runTrain(manifest_path, out_dir, seed_override, threads_str, store_latents);
    if (*predict) return runPredict(summary_dir, cells_path, predict_out);
    if (*analyze) return runAnalyze(analyze_dir, tau, top_n);
    if (*gen) {
      spec.dims = parseDims(dims_str);
      return runGen(spec, gen_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
