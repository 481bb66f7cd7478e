#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramanmix/ae/autoencoder.hpp"
#include "ramanmix/eval/metrics.hpp"
#include "ramanmix/synth/generator.hpp"

namespace ramanmix::eval {

enum class MethodKind { NfindrFcls, NfindrNnls, VcaFcls, VcaNnls, Pca, Autoencoder };

struct AutoencoderConfig {
  ae::EncoderKind encoder = ae::EncoderKind::Dense;
  ae::DecoderKind decoder = ae::DecoderKind::Linear;
  bool asc = true;
  double gamma = 10.0;
  /// Defaults to n, or n + 1 when the data carries artifacts.
  std::optional<std::size_t> latent;
  /// The seed field is replaced by the replicate seed.
  ae::TrainConfig train;
};

struct MethodConfig {
  std::string name;
  MethodKind kind = MethodKind::NfindrFcls;
  AutoencoderConfig ae;
};

/// Named presets: nfindr+fcls, nfindr+nnls, vca+fcls, vca+nnls, pca,
/// {dense,deep-dense,conv,transformer,conv-transformer}-ae and the same with a
/// -bilinear suffix.
MethodConfig method_preset(const std::string& name);
std::vector<std::string> method_preset_names();

struct UnmixOutput {
  EndmemberMatrix endmembers;
  AbundanceMatrix abundances;
  double seconds = 0.0;
  nlohmann::json meta = nlohmann::json::object();
  /// Set for autoencoder methods.
  std::optional<ae::AEModel> model;
  std::vector<double> loss_history;
};

/// Runs one method end to end (extraction + abundances, or build + train +
/// inference); `seconds` is the wall time of the whole call.
UnmixOutput run_method(const MethodConfig& method, const SpectralDataset& d, std::size_t n, bool has_artifacts,
                       std::uint64_t seed);

struct BenchmarkVariant {
  /// ideal, artifacts, realistic or bilinear.
  std::string name;
  synth::DatasetSpec spec;
};

BenchmarkVariant variant_preset(const std::string& mixture, synth::SceneKind scene);
/// The eleven mixture x scene combinations (bilinear skips Chessboard).
std::vector<BenchmarkVariant> standard_variants();

struct BenchmarkGrid {
  std::vector<BenchmarkVariant> variants;
  std::vector<MethodConfig> methods;
  std::size_t datasets_per_variant = 5;
  std::size_t seeds_per_dataset = 5;
  std::uint64_t base_seed = 0;
};

void validate(const BenchmarkGrid& g);

/// Dataset seeds depend only on (base_seed, index), so every variant sees the
/// same seeds; likewise for method seeds.
std::uint64_t dataset_seed(std::uint64_t base, std::size_t index);
std::uint64_t method_seed(std::uint64_t base, std::size_t index);

struct Replicate {
  std::string variant;
  std::string scene;
  std::string method;
  std::size_t dataset_index = 0;
  std::size_t seed_index = 0;
  std::optional<MetricReport> report;
  std::string error;
};

struct SummaryRow {
  std::string variant;
  std::string scene;
  std::string method;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

struct BenchmarkResult {
  std::vector<Replicate> replicates;
  std::vector<SummaryRow> summary;
};

/// Cells that throw are recorded with their error and excluded from the
/// statistics. `jobs` > 1 runs (variant, dataset) groups on worker threads;
/// results do not depend on it.
BenchmarkResult run_benchmark(const BenchmarkGrid& grid, std::size_t jobs = 1);

/// Summary rows for (variant, scene, method); endmember_sad and abundance_mse.
std::vector<SummaryRow> summarize(const std::vector<Replicate>& reps);

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
/// Per-replicate detail. Wall times are left out so reruns are byte-identical.
nlohmann::json to_json(const BenchmarkResult& r);

struct TimingRow {
  std::string method;
  std::size_t n_spectra = 0;
  std::size_t run = 0;
  double seconds = 0.0;
  std::string error;
};

struct ScalingConfig {
  std::vector<std::size_t> sizes;
  std::vector<MethodConfig> methods;
  std::size_t runs = 3;
  std::size_t bands = 1000;
  std::size_t endmembers = 5;
  std::uint64_t seed = 0;
};

/// Ideal Chessboard scenes with sizes[i] pixels; (H, W) is the most square
/// factorization. Runs serially.
std::vector<TimingRow> profile_scaling(const ScalingConfig& cfg);
synth::DatasetSpec scaling_dataset_spec(std::size_t n_spectra, std::size_t bands, std::size_t endmembers,
                                        std::uint64_t seed);
void write_scaling_csv(const std::filesystem::path& path, const std::vector<TimingRow>& rows);

/// Coefficient of determination of the least-squares line through (x, y).
double linear_r2(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace ramanmix::eval
