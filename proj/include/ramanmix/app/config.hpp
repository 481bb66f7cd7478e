#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramanmix/eval/benchmark.hpp"
#include "ramanmix/synth/generator.hpp"

namespace ramanmix::app {

using nlohmann::json;

/// IoError when the file cannot be read, ConfigError on a syntax error.
json load_json(const std::filesystem::path& path);
/// Two-space indented, trailing newline.
void write_json(const std::filesystem::path& path, const json& j);

/// Typed access to one JSON object. Errors carry the JSON pointer of the
/// offending value; keys outside `allowed` are rejected.
class Fields {
 public:
  Fields(const json& j, std::string pointer, std::vector<std::string_view> allowed);

  bool has(std::string_view key) const;
  const json& at(std::string_view key) const { return j_.at(std::string(key)); }
  std::string pointer(std::string_view key) const;

  std::string string(std::string_view key, const std::string& fallback) const;
  std::string choice(std::string_view key, const std::string& fallback, const std::vector<std::string>& options) const;
  double number(std::string_view key, double fallback) const;
  /// Non-negative integer no smaller than `min`.
  std::uint64_t count(std::string_view key, std::uint64_t fallback, std::uint64_t min = 0) const;
  bool boolean(std::string_view key, bool fallback) const;

 private:
  const json& j_;
  std::string pointer_;
};

/// {"variant", "seed", "endmembers": {n, bands, style}, "scene": {kind,
/// height, width, n, patches_per_side}, "mixture", "artifacts"}. The variant
/// (ideal, artifacts, realistic, bilinear) sets defaults that the other
/// fields override; scene.n defaults to endmembers.n.
synth::DatasetSpec dataset_spec_from_json(const json& j, const std::string& pointer = "");
json to_json(const synth::DatasetSpec& s);

/// A preset name or {"method", "name", "encoder", "decoder", "latent", "asc",
/// "gamma", "train": {epochs, lr, batch_size, mse_weight}}.
eval::MethodConfig method_from_json(const json& j, const std::string& pointer = "");
json to_json(const eval::MethodConfig& m);

/// {"base_seed", "datasets_per_variant", "seeds_per_dataset", "variants",
/// "methods"}. "variants" is "standard" or a list of dataset specs with an
/// optional "name".
eval::BenchmarkGrid grid_from_json(const json& j);
json to_json(const eval::BenchmarkGrid& g);

/// {"sizes", "methods", "runs", "bands", "endmembers", "seed"}.
eval::ScalingConfig scaling_from_json(const json& j);
json to_json(const eval::ScalingConfig& c);

}  // namespace ramanmix::app
