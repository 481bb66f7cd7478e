#pragma once

#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ramanmix/core/dataset.hpp"
#include "ramanmix/preprocess/baseline.hpp"
#include "ramanmix/preprocess/filters.hpp"

namespace ramanmix::preprocess {

struct CropStep {
  double lo = 0.0;
  double hi = 0.0;
};
struct DespikeStep {
  DespikeParams params;
};
struct SavgolStep {
  int window = 7;
  int degree = 3;
};
struct AslsStep {
  BaselineParams params;
};
struct AsplsStep {
  BaselineParams params;
};
struct NormalizeStep {
  NormalizeMode mode = NormalizeMode::GlobalMinMax;
};

using Step = std::variant<CropStep, DespikeStep, SavgolStep, AslsStep, AsplsStep, NormalizeStep>;

/// crop(700, 1800) -> despike(3, 8) -> savgol(7, 3) -> AsLS(1e6, 0.01, 2, 50, 1e-3) -> min-max
std::vector<Step> thp1_preset();
/// crop(400, 1800) -> ASPLS(1e5, 2, 100, 1e-3) -> global vector normalization
std::vector<Step> sugar_preset();
/// "thp1" or "sugar"; ConfigError otherwise.
std::vector<Step> preset(const std::string& name);

/// Applies the steps in order. Errors are rethrown with the failing step index.
SpectralDataset run_pipeline(const SpectralDataset& d, const std::vector<Step>& steps);

/// Parses either {"preset": name} or {"steps": [...]} (see schemas/pipeline.schema.json).
std::vector<Step> steps_from_json(const nlohmann::json& j);
nlohmann::json to_json(const std::vector<Step>& steps);

std::string step_name(const Step& step);

}  // namespace ramanmix::preprocess
