#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ramanmix/core/dataset.hpp"
#include "ramanmix/core/rng.hpp"

namespace ramanmix::synth {

enum class EndmemberStyle { Clean, Noisy };
enum class SceneKind { Chessboard, Gaussian, Dirichlet };

struct EndmemberSpec {
  std::size_t n = 5;
  std::size_t b = 1000;
  EndmemberStyle style = EndmemberStyle::Clean;
};

struct SceneSpec {
  SceneKind kind = SceneKind::Chessboard;
  std::size_t height = 100;
  std::size_t width = 100;
  std::size_t n = 5;
  /// Chessboard only: the scene is split into patches_per_side^2 square patches.
  std::size_t patches_per_side = 20;
};

struct ArtifactConfig {
  double sigma_noise = 0.1;
  double p_baseline = 0.25;
  double h_baseline = 2.0;
  double p_spike = 0.1;
  double h_spike = 5.0;
};

struct DatasetSpec {
  EndmemberSpec endmembers;
  SceneSpec scene;
  MixtureModel model = MixtureModel::Linear;
  std::optional<ArtifactConfig> artifacts;
  std::uint64_t seed = 0;
};

/// One Gaussian peak h * exp(-(x - center)^2 / (2 width^2)); the
/// h * width * sqrt(2 pi) prefactor on the unit-area density makes the
/// maximum equal to h.
struct Peak {
  double height;
  double center;
  double width;
};

double evaluate_peak(const Peak& p, double x);

/// Draws a major peak (w_p = 1) or a minor noise peak (h1 = 1/3, w_p = 2).
Peak sample_peak(std::size_t bands, bool minor, Rng& rng);

void validate(const EndmemberSpec& spec);
void validate(const SceneSpec& spec);
void validate(const ArtifactConfig& cfg);
void validate(const DatasetSpec& spec);

/// `minor_rng` supplies the extra peaks of Noisy endmembers so the major
/// peaks of a Noisy set coincide with the Clean set drawn from the same seed.
struct PeakRecord {
  /// Per endmember.
  std::vector<std::vector<Peak>> major;
  std::vector<std::vector<Peak>> minor;
};

EndmemberMatrix generate_endmembers(const EndmemberSpec& spec, Rng& rng, Rng& minor_rng, PeakRecord* record = nullptr);
EndmemberMatrix generate_endmembers(const EndmemberSpec& spec, Rng& rng);

/// Discrete U{5..9}, the major-peak count law.
std::size_t sample_major_peak_count(Rng& rng);

AbundanceMatrix generate_scene(const SceneSpec& spec, Rng& rng);

SpectralDataset mix(const EndmemberMatrix& m, const AbundanceMatrix& a, MixtureModel model);

struct ArtifactRecord {
  std::vector<bool> baseline;
  std::vector<bool> spike;
};

SpectralDataset add_artifacts(const SpectralDataset& d, const ArtifactConfig& cfg, Rng& rng,
                              ArtifactRecord* record = nullptr);

/// h_B * arctan(pi * j / b) for j = 1..b.
Eigen::VectorXd baseline_signal(std::size_t bands, double height);

std::pair<SpectralDataset, GroundTruth> generate_dataset(const DatasetSpec& spec);

std::string to_string(EndmemberStyle s);
std::string to_string(SceneKind k);
EndmemberStyle endmember_style_from_string(const std::string& s);
SceneKind scene_kind_from_string(const std::string& s);

}  // namespace ramanmix::synth
