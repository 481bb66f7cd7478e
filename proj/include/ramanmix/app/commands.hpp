#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ramanmix::app {

using nlohmann::json;

std::string version();

struct Context {
  std::filesystem::path out = ".";
  /// Worker threads for benchmark; results do not depend on it.
  std::size_t jobs = 1;
  /// Recorded in the manifest.
  std::vector<std::string> argv;
};

/// Every command takes one settings object, resolves it against defaults,
/// writes its outputs and `manifest.json` into ctx.out (created if needed)
/// and returns the manifest. The manifest's "settings" member is the fully
/// resolved object, so feeding it back reproduces the run.
///
/// generate   {"spec": <synthspec>, "format": "bin" | "csv"}
/// preprocess {"input": path, "pipeline": <pipeline>}
/// unmix      {"input": path, "method": <method>, "endmembers": n, "seed": u64}
/// evaluate   {"result": dir, "ground_truth": path, "mse": "squared" | "literal"}
/// benchmark  {"grid": <grid>}
/// profile    {"scaling": <scaling>}
/// plot       {"input": dir}
json cmd_generate(const json& settings, const Context& ctx);
json cmd_preprocess(const json& settings, const Context& ctx);
json cmd_unmix(const json& settings, const Context& ctx);
json cmd_evaluate(const json& settings, const Context& ctx);
json cmd_benchmark(const json& settings, const Context& ctx);
json cmd_profile(const json& settings, const Context& ctx);
json cmd_plot(const json& settings, const Context& ctx);

/// Dispatch by subcommand name; ConfigError for an unknown name.
json run_command(const std::string& name, const json& settings, const Context& ctx);
std::vector<std::string> command_names();

/// Non-null when `j` is a manifest written by `command`; returns its settings.
/// ConfigError when it is a manifest of a different command.
const json* manifest_settings(const json& j, const std::string& command);

/// 0 on success; 2 config, 3 I/O, 4 numerical.
int exit_code_for(const std::exception& e);

}  // namespace ramanmix::app
