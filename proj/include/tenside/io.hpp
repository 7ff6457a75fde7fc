#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tenside/model.hpp"
#include "tenside/sampler.hpp"

namespace tenside {

// TSV tensor format: header line `mode0<TAB>...<TAB>value`, then one cell per
// line with 0-based integer indices. Mode dimensions default to 1 + the
// largest observed index unless overridden.
ObservationSet loadTensor(const std::string& path,
                          const std::vector<Index>& dims_override = {});
void writeTensor(const std::string& path, const ObservationSet& data);

// MatrixMarket coordinate format (real or pattern, general), 1-based indices.
CsrMatrix loadSideInfo(const std::string& path);
void writeMatrixMarket(const std::string& path, const CsrMatrix& m);

struct RunManifest {
  std::string tensor_path;
  std::vector<std::string> side_info_paths;  // empty string: no features
  std::string test_path;                     // empty: no hold-out cells
  std::vector<Index> mode_dims;              // empty: infer from the data
  std::vector<std::string> mode_names;
  std::string output_dir;
  SamplerConfig sampler;

  // Reads the JSON manifest; relative paths resolve against its directory.
  // Referenced files must exist.
  static RunManifest load(const std::string& path);

  // Echo of every effective parameter, so defaults never change results
  // silently.
  std::string runConfigJson() const;
};

struct LoadedDataset {
  ObservationSet train;
  std::optional<ObservationSet> test;
  std::vector<ModeData> modes;
};

LoadedDataset loadDataset(const RunManifest& manifest);

struct GenSpec {
  std::vector<Index> dims{400, 50, 2};
  Index d_true = 5;
  Index n_features = 2000;
  Index n_feature_groups = 40;
  Real feature_density = 0.05;   // expected fraction of active features
  Real feature_flip_prob = 0.005;
  Real latent_noise_sd = 0.05;
  Real noise_sd = 0.4;
  Index offset_dims = 0;
  Real offset_scale = 1.5;
  Real competitive_fraction = 0.5;
  Real obs_fraction = 0.25;
  Real holdout_fraction = 0.2;
  Real cold_start_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticData {
  std::vector<Index> dims;
  ObservationSet train;
  ObservationSet test;
  CsrMatrix features;                // mode-0 side information
  std::vector<Matrix> true_latents;  // per mode, D_true x N
  // 3-mode runs with planted offsets: per-pair additive slice difference and
  // the per-protein competitive labels. Empty otherwise.
  Matrix planted_offsets;
  std::vector<int> competitive;
};

// Forward-samples the model: latents from grouped binary features through a
// true link matrix, the tensor from the latent products plus Gaussian noise,
// and (for 3-mode specs with offset_dims > 0) an additive difference between
// the two measurement slices confined to the last offset_dims dimensions.
SyntheticData genSynthetic(const GenSpec& spec);

// Writes train/test tensors, the feature matrix, ground truth, and a ready
// manifest.json into out_dir.
void writeSynthetic(const SyntheticData& data, const GenSpec& spec,
                    const std::string& out_dir);

// Posterior summary directory: predictions.tsv, test-metrics.tsv,
// measurement-latents.tsv, mean-latents.tsv, run-config, chat.tsv and
// latent-samples.bin when available.
void writeSummary(const std::string& out_dir, const PosteriorSummary& summary,
                  const ObservationSet& train,
                  const std::optional<ObservationSet>& test,
                  const RunManifest* manifest = nullptr);

void writeLatentSamples(const std::string& path,
                        const std::vector<std::vector<Matrix>>& samples);
std::vector<std::vector<Matrix>> readLatentSamples(const std::string& path);

// measurement-latents.tsv contents: per-sample N_t x D normalized values.
std::vector<Matrix> readMeasurementReports(const std::string& path);

// mean-latents.tsv contents: per-mode D x N posterior-mean latents.
std::vector<Matrix> readMeanLatents(const std::string& path);

// predictions.tsv contents: (observed, predicted) columns.
std::pair<Vector, Vector> readPredictions(const std::string& path);

}  // namespace tenside
