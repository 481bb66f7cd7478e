#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramanmix/nn/tensor.hpp"

namespace ramanmix::nn {

/// model.bin: "RMXM", u64 manifest length, UTF-8 JSON manifest, then every
/// parameter's values as little-endian f64 in manifest order. The manifest
/// carries a "parameters" array of {name, dims} written by save_parameters.
void save_parameters(const std::filesystem::path& path, nlohmann::json manifest,
                     const std::vector<const Tensor*>& params, const std::vector<std::string>& names);

struct LoadedParameters {
  nlohmann::json manifest;
  std::vector<Tensor> tensors;
};

LoadedParameters load_parameters(const std::filesystem::path& path);

/// Copies loaded values into `params`; shapes must agree one to one.
void assign_parameters(const std::vector<Tensor*>& params, const std::vector<Tensor>& values);

}  // namespace ramanmix::nn
