#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ramanmix/app/commands.hpp"
#include "ramanmix/app/config.hpp"
#include "ramanmix/core/error.hpp"

using nlohmann::json;
namespace app = ramanmix::app;

namespace {

struct Flags {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string config;
  std::size_t jobs = 1;

  std::optional<std::string> variant, scene, format, input, preset, method, result, gt, mse, styles;
  std::optional<std::size_t> endmembers, bands, height, width, epochs, datasets, seeds, runs;
  std::vector<std::string> methods;
  std::vector<std::size_t> sizes;
};

// The config file holds the command's own document (synthspec, pipeline,
// method, grid, scaling) or a manifest from an earlier run.
json base_settings(const std::string& command, const Flags& fl) {
  if (fl.config.empty()) return json::object();
  const json doc = app::load_json(fl.config);
  if (const json* s = app::manifest_settings(doc, command)) return *s;
  if (command == "generate") return {{"spec", doc}};
  if (command == "preprocess") return {{"pipeline", doc}};
  if (command == "unmix") return {{"method", doc}};
  if (command == "benchmark") return {{"grid", doc}};
  if (command == "profile") return {{"scaling", doc}};
  return doc;
}

json method_list(const std::vector<std::string>& names) {
  json arr = json::array();
  for (const auto& n : names) arr.push_back(n);
  return arr;
}

// CLI flags take precedence over the config file.
json resolve(const std::string& command, const Flags& fl) {
  json s = base_settings(command, fl);
  if (command == "generate") {
    json& spec = s["spec"];
    if (spec.is_null()) spec = json::object();
    if (fl.variant) spec["variant"] = *fl.variant;
    if (fl.scene) spec["scene"]["kind"] = *fl.scene;
    if (fl.height) spec["scene"]["height"] = *fl.height;
    if (fl.width) spec["scene"]["width"] = *fl.width;
    if (fl.endmembers) {
      spec["endmembers"]["n"] = *fl.endmembers;
      if (spec.contains("scene")) spec["scene"]["n"] = *fl.endmembers;
    }
    if (fl.bands) spec["endmembers"]["bands"] = *fl.bands;
    if (fl.seed) spec["seed"] = *fl.seed;
    if (fl.format) s["format"] = *fl.format;
  } else if (command == "preprocess") {
    if (fl.input) s["input"] = *fl.input;
    if (fl.preset) s["pipeline"] = {{"preset", *fl.preset}};
  } else if (command == "unmix") {
    if (fl.input) s["input"] = *fl.input;
    if (fl.method) s["method"] = *fl.method;
    if (fl.endmembers) s["endmembers"] = *fl.endmembers;
    if (fl.epochs) {
      if (!s.contains("method")) throw ramanmix::ConfigError("--epochs needs a method");
      if (s["method"].is_string()) s["method"] = {{"method", s["method"]}};
      s["method"]["train"]["epochs"] = *fl.epochs;
    }
    if (fl.seed) s["seed"] = *fl.seed;
  } else if (command == "evaluate") {
    if (fl.result) s["result"] = *fl.result;
    if (fl.gt) s["ground_truth"] = *fl.gt;
    if (fl.mse) s["mse"] = *fl.mse;
  } else if (command == "benchmark") {
    json& g = s["grid"];
    if (g.is_null()) g = json::object();
    if (!fl.methods.empty()) g["methods"] = method_list(fl.methods);
    if (fl.styles) g["variants"] = *fl.styles;
    if (fl.datasets) g["datasets_per_variant"] = *fl.datasets;
    if (fl.seeds) g["seeds_per_dataset"] = *fl.seeds;
    if (fl.seed) g["base_seed"] = *fl.seed;
  } else if (command == "profile") {
    json& c = s["scaling"];
    if (c.is_null()) c = json::object();
    if (!fl.sizes.empty()) c["sizes"] = fl.sizes;
    if (!fl.methods.empty()) c["methods"] = method_list(fl.methods);
    if (fl.runs) c["runs"] = *fl.runs;
    if (fl.bands) c["bands"] = *fl.bands;
    if (fl.endmembers) c["endmembers"] = *fl.endmembers;
    if (fl.seed) c["seed"] = *fl.seed;
  } else if (command == "plot") {
    if (fl.input) s["input"] = *fl.input;
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Raman spectral unmixing toolkit"};
  cli.set_version_flag("--version", app::version());
  cli.require_subcommand(1);
  Flags fl;
  cli.add_option("--seed", fl.seed, "Seed (overrides the config)");
  cli.add_option("--out", fl.out, "Output directory")->capture_default_str();
  cli.add_option("--config", fl.config, "Config file or manifest of an earlier run");
  cli.add_option("--jobs", fl.jobs, "Worker threads for benchmark")->check(CLI::PositiveNumber)->capture_default_str();

  auto* gen = cli.add_subcommand("generate", "Generate a synthetic dataset with ground truth");
  gen->add_option("--variant", fl.variant, "ideal, artifacts, realistic or bilinear");
  gen->add_option("--scene", fl.scene, "chessboard, gaussian or dirichlet");
  gen->add_option("-n,--endmembers", fl.endmembers, "Number of endmembers");
  gen->add_option("--bands", fl.bands, "Number of bands");
  gen->add_option("--height", fl.height, "Scene height");
  gen->add_option("--width", fl.width, "Scene width");
  gen->add_option("--format", fl.format, "bin or csv");

  auto* pre = cli.add_subcommand("preprocess", "Run a preprocessing pipeline");
  pre->add_option("-i,--input", fl.input, "Dataset file (.bin or .csv)");
  pre->add_option("--preset", fl.preset, "thp1 or sugar");

  auto* unm = cli.add_subcommand("unmix", "Estimate endmembers and abundances");
  unm->add_option("-i,--input", fl.input, "Dataset file (.bin or .csv)");
  unm->add_option("-m,--method", fl.method, "Method preset, e.g. vca+fcls or dense-ae");
  unm->add_option("-n,--endmembers", fl.endmembers, "Number of endmembers");
  unm->add_option("--epochs", fl.epochs, "Training epochs for autoencoders");

  auto* evl = cli.add_subcommand("evaluate", "Score an unmixing result against ground truth");
  evl->add_option("-r,--result", fl.result, "Directory written by unmix");
  evl->add_option("-g,--gt", fl.gt, "Ground truth file");
  evl->add_option("--mse", fl.mse, "squared or literal");

  auto* ben = cli.add_subcommand("benchmark", "Run a replicated benchmark grid");
  ben->add_option("--methods", fl.methods, "Method presets")->delimiter(',');
  ben->add_option("--variants", fl.styles, "\"standard\" for the full scenario grid");
  ben->add_option("--datasets", fl.datasets, "Datasets per variant");
  ben->add_option("--seeds", fl.seeds, "Method seeds per dataset");

  auto* pro = cli.add_subcommand("profile", "Wall-time scaling study");
  pro->add_option("--sizes", fl.sizes, "Spectra counts, ascending")->delimiter(',');
  pro->add_option("--methods", fl.methods, "Method presets")->delimiter(',');
  pro->add_option("--runs", fl.runs, "Runs per cell");
  pro->add_option("--bands", fl.bands, "Number of bands");
  pro->add_option("-n,--endmembers", fl.endmembers, "Number of endmembers");

  auto* plt = cli.add_subcommand("plot", "Render SVG figures from a result directory");
  plt->add_option("-i,--input", fl.input, "Directory with endmembers.csv, abundances.csv, loss.csv or scaling.csv");

  for (auto* sub : cli.get_subcommands({})) sub->fallthrough();

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = cli.get_subcommands().front()->get_name();
  app::Context ctx;
  ctx.out = fl.out;
  ctx.jobs = fl.jobs;
  ctx.argv.assign(argv, argv + argc);
  try {
    const json manifest = app::run_command(command, resolve(command, fl), ctx);
    std::cout << manifest.at("result").dump() << '\n';
    if (command == "benchmark" && manifest["result"].value("failed", 0) > 0)
      std::cerr << "ramanmix: warning: " << manifest["result"]["failed"] << " replicates failed, see bench_results.json\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "ramanmix: error: " << e.what() << '\n';
    return app::exit_code_for(e);
  }
}
