#include "ramanmix/app/commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>

#include "ramanmix/app/config.hpp"
#include "ramanmix/app/plot.hpp"
#include "ramanmix/core/error.hpp"
#include "ramanmix/core/io.hpp"
#include "ramanmix/eval/benchmark.hpp"
#include "ramanmix/eval/metrics.hpp"
#include "ramanmix/preprocess/pipeline.hpp"
#include "ramanmix/synth/generator.hpp"

#ifndef RAMANMIX_VERSION
#define RAMANMIX_VERSION "0.0.0"
#endif

namespace ramanmix::app {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string version() { return RAMANMIX_VERSION; }

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

fs::path required_path(const Fields& f, std::string_view key) {
  if (!f.has(key)) throw ConfigError(f.pointer(key) + ": required");
  const std::string s = f.string(key, "");
  if (s.empty()) throw ConfigError(f.pointer(key) + ": must not be empty");
  return s;
}

const json& required(const Fields& f, std::string_view key) {
  if (!f.has(key)) throw ConfigError(f.pointer(key) + ": required");
  return f.at(key);
}

void prepare_out(const Context& ctx) {
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec || !fs::is_directory(ctx.out)) throw IoError("cannot create output directory " + ctx.out.string());
}

json finish(const std::string& command, const json& settings, const Context& ctx, const std::vector<std::string>& outputs,
            json result, Clock::time_point start) {
  json manifest = {{"tool", "ramanmix"},
                   {"version", version()},
                   {"command", command},
                   {"settings", settings},
                   {"outputs", outputs},
                   {"result", std::move(result)},
                   {"argv", ctx.argv},
                   {"created", utc_timestamp()},
                   {"wall_seconds", std::chrono::duration<double>(Clock::now() - start).count()}};
  write_json(ctx.out / (command + ".manifest.json"), manifest);
  return manifest;
}

// Rethrows the active ramanmix error with `prefix` in front, keeping its type.
[[noreturn]] void rethrow_with(const std::string& prefix) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

json report_to_json(const eval::MetricReport& r) {
  json pairs = json::array();
  for (const auto& p : r.detail)
    pairs.push_back({{"truth", p.truth}, {"estimate", p.estimate}, {"sad", p.sad}, {"pcc", p.pcc}, {"mse", p.mse}});
  return {{"endmember_sad", r.endmember_sad},
          {"abundance_mse", r.abundance_mse},
          {"endmember_pcc", r.endmember_pcc},
          {"pairs", pairs},
          {"unmatched_estimates", r.unmatched_estimates}};
}

}  // namespace

json cmd_generate(const json& settings, const Context& ctx) {
  const auto start = Clock::now();
  const Fields f(settings, "", {"spec", "format"});
  const synth::DatasetSpec spec = dataset_spec_from_json(f.has("spec") ? f.at("spec") : json::object(), "/spec");
  const std::string format = f.choice("format", "bin", {"bin", "csv"});

  auto [data, gt] = synth::generate_dataset(spec);
  prepare_out(ctx);
  std::vector<std::string> outputs;
  if (format == "bin") {
    save_dataset(data, ctx.out / "data.bin", DataFormat::Bin);
    outputs = {"data.bin"};
  } else {
    save_dataset(data, ctx.out / "data.csv", DataFormat::Csv);
    outputs = {"data.csv", "data.meta.json"};
  }
  save_ground_truth(gt, ctx.out / "data.gt.bin");
  outputs.push_back("data.gt.bin");

  const json resolved = {{"spec", to_json(spec)}, {"format", format}};
  const json result = {{"spectra", data.size()}, {"bands", data.bands()}, {"endmembers", gt.endmembers.count()},
                       {"shape", data.shape}};
  return finish("generate", resolved, ctx, outputs, result, start);
}

json cmd_preprocess(const json& settings, const Context& ctx) {
  const auto start = Clock::now();
  const Fields f(settings, "", {"input", "pipeline"});
  const fs::path input = required_path(f, "input");
  std::vector<preprocess::Step> steps;
  try {
    steps = preprocess::steps_from_json(required(f, "pipeline"));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.starts_with("/:") ? "/pipeline" + msg.substr(1) : "/pipeline" + msg);
  }

  const SpectralDataset d = load_dataset(input);
  const SpectralDataset out = preprocess::run_pipeline(d, steps);
  prepare_out(ctx);
  const DataFormat format = format_from_path(input);
  std::vector<std::string> outputs;
  if (format == DataFormat::Bin) {
    save_dataset(out, ctx.out / "processed.bin", format);
    outputs = {"processed.bin"};
  } else {
    save_dataset(out, ctx.out / "processed.csv", format);
    outputs = {"processed.csv", "processed.meta.json"};
  }
  const json resolved = {{"input", absolute_path(input)}, {"pipeline", preprocess::to_json(steps)}};
  const json result = {{"spectra", out.size()}, {"bands_in", d.bands()}, {"bands_out", out.bands()}};
  return finish("preprocess", resolved, ctx, outputs, result, start);
}

json cmd_unmix(const json& settings, const Context& ctx) {
  const auto start = Clock::now();
  const Fields f(settings, "", {"input", "method", "endmembers", "seed"});
  const fs::path input = required_path(f, "input");
  const eval::MethodConfig method = method_from_json(required(f, "method"), "/method");
  if (!f.has("endmembers")) throw ConfigError("/endmembers: required");
  const std::size_t n = f.count("endmembers", 0, 1);
  const std::uint64_t seed = f.count("seed", 0);

  const SpectralDataset d = load_dataset(input);
  eval::UnmixOutput out;
  try {
    out = eval::run_method(method, d, n, false, seed);
  } catch (const Error&) {
    rethrow_with("unmix (" + method.name + "): ");
  }

  prepare_out(ctx);
  std::vector<std::string> outputs{"endmembers.csv", "abundances.csv", "abundances.meta.json"};
  save_endmembers_csv(out.endmembers, ctx.out / "endmembers.csv");
  save_abundances_csv(out.abundances, d.shape, ctx.out / "abundances.csv");
  if (out.model) {
    ae::save_model(ctx.out / "model.bin", *out.model);
    std::ofstream os(ctx.out / "loss.csv");
    if (!os) throw IoError("cannot open " + (ctx.out / "loss.csv").string() + " for writing");
    os << "epoch,loss\n";
    for (std::size_t e = 0; e < out.loss_history.size(); ++e) os << e + 1 << ',' << format_double(out.loss_history[e]) << '\n';
    outputs.insert(outputs.end(), {"model.bin", "loss.csv"});
  }

  const json resolved = {{"input", absolute_path(input)}, {"method", to_json(method)}, {"endmembers", n}, {"seed", seed}};
  const json result = {{"method_seconds", out.seconds}, {"meta", out.meta}, {"estimated", out.endmembers.count()}};
  return finish("unmix", resolved, ctx, outputs, result, start);
}

json cmd_evaluate(const json& settings, const Context& ctx) {
  const auto start = Clock::now();
  const Fields f(settings, "", {"result", "ground_truth", "mse"});
  const fs::path dir = required_path(f, "result");
  const fs::path gt_path = required_path(f, "ground_truth");
  const std::string mse = f.choice("mse", "squared", {"squared", "literal"});

  const EndmemberMatrix m = load_endmembers_csv(dir / "endmembers.csv");
  const AbundanceMatrix a = load_abundances_csv(dir / "abundances.csv");
  const GroundTruth gt = load_ground_truth(gt_path);
  const eval::MetricReport r =
      eval::evaluate(m, a, gt, mse == "squared" ? eval::MseVariant::Squared : eval::MseVariant::LiteralNorm);

  prepare_out(ctx);
  json metrics = report_to_json(r);
  metrics["mse_variant"] = mse;
  write_json(ctx.out / "metrics.json", metrics);
  const json resolved = {{"result", absolute_path(dir)}, {"ground_truth", absolute_path(gt_path)}, {"mse", mse}};
  const json result = {{"endmember_sad", r.endmember_sad},
                       {"abundance_mse", r.abundance_mse},
                       {"endmember_pcc", r.endmember_pcc}};
  return finish("evaluate", resolved, ctx, {"metrics.json"}, result, start);
}

json cmd_benchmark(const json& settings, const Context& ctx) {
  const auto start = Clock::now();
  const Fields f(settings, "", {"grid"});
  eval::BenchmarkGrid grid;
  try {
    grid = grid_from_json(required(f, "grid"));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.starts_with("/") ? "/grid" + msg : msg);
  }

  const eval::BenchmarkResult r = eval::run_benchmark(grid, ctx.jobs);
  prepare_out(ctx);
  eval::write_summary_csv(ctx.out / "bench_results.csv", r.summary);
  write_json(ctx.out / "bench_results.json", eval::to_json(r));

  std::size_t failed = 0;
  for (const auto& rep : r.replicates) failed += rep.report ? 0 : 1;
  const json result = {{"replicates", r.replicates.size()}, {"failed", failed}};
  return finish("benchmark", {{"grid", to_json(grid)}}, ctx, {"bench_results.csv", "bench_results.json"}, result,
                start);
}

json cmd_profile(const json& settings, const Context& ctx) {
  const auto start = Clock::now();
  const Fields f(settings, "", {"scaling"});
  eval::ScalingConfig cfg;
  try {
    cfg = scaling_from_json(required(f, "scaling"));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.starts_with("/") ? "/scaling" + msg : msg);
  }

  // serial on purpose: concurrent cells would distort each other's timings
  const auto rows = eval::profile_scaling(cfg);
  prepare_out(ctx);
  eval::write_scaling_csv(ctx.out / "scaling.csv", rows);

  json fits = json::object();
  for (const auto& m : cfg.methods) {
    std::vector<double> x, y;
    for (const auto& row : rows)
      if (row.method == m.name && row.error.empty()) {
        x.push_back(static_cast<double>(row.n_spectra));
        y.push_back(row.seconds);
      }
    json fit = {{"points", x.size()}};
    if (cfg.sizes.size() >= 2 && !x.empty()) fit["linear_r2"] = eval::linear_r2(x, y);
    fits[m.name] = fit;
  }
  return finish("profile", {{"scaling", to_json(cfg)}}, ctx, {"scaling.csv"}, {{"fits", fits}}, start);
}

namespace {

// scaling.csv rows as mean seconds per (method, N), failed runs skipped.
std::vector<Series> read_scaling(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  std::map<std::string, std::map<double, std::pair<double, int>>> acc;
  std::vector<std::string> order;
  for (int lineno = 2; std::getline(is, line); ++lineno) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    for (int k = 0; k < 4; ++k) {
      const auto next = line.find(',', pos);
      if (next == std::string::npos) throw IoError(path.string() + ":" + std::to_string(lineno) + ": too few columns");
      cells.push_back(line.substr(pos, next - pos));
      pos = next + 1;
    }
    if (pos < line.size()) continue;  // error column set
    try {
      auto& cell = acc[cells[0]][std::stod(cells[1])];
      cell.first += std::stod(cells[3]);
      cell.second += 1;
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    if (std::find(order.begin(), order.end(), cells[0]) == order.end()) order.push_back(cells[0]);
  }
  std::vector<Series> out;
  for (const auto& name : order) {
    Series s{name, {}, {}};
    for (const auto& [n, sum] : acc[name]) {
      s.x.push_back(n);
      s.y.push_back(sum.first / sum.second);
    }
    out.push_back(std::move(s));
  }
  return out;
}

Series read_loss(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(is, line);
  Series s{"loss", {}, {}};
  for (int lineno = 2; std::getline(is, line); ++lineno) {
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      s.x.push_back(std::stod(line.substr(0, comma)));
      s.y.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected epoch,loss");
    }
  }
  return s;
}

// Pixel order is row-major with z outermost; z slices are laid side by side.
RowMatrix scene_map(const Eigen::VectorXd& column, const std::vector<std::size_t>& shape) {
  const auto h = static_cast<Eigen::Index>(shape[0]), w = static_cast<Eigen::Index>(shape[1]);
  const Eigen::Index z = shape.size() == 3 ? static_cast<Eigen::Index>(shape[2]) : 1;
  RowMatrix img(h, w * z);
  for (Eigen::Index k = 0; k < z; ++k)
    for (Eigen::Index r = 0; r < h; ++r)
      for (Eigen::Index c = 0; c < w; ++c) img(r, k * w + c) = column(k * h * w + r * w + c);
  return img;
}

}  // namespace

json cmd_plot(const json& settings, const Context& ctx) {
  const auto start = Clock::now();
  const Fields f(settings, "", {"input"});
  const fs::path dir = required_path(f, "input");
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());

  prepare_out(ctx);
  std::vector<std::string> outputs;
  json skipped = json::array();
  auto emit = [&](const std::string& name, const std::string& svg) {
    write_text(ctx.out / name, svg);
    outputs.push_back(name);
  };

  if (fs::exists(dir / "endmembers.csv")) {
    const EndmemberMatrix m = load_endmembers_csv(dir / "endmembers.csv");
    for (std::size_t k = 0; k < m.count(); ++k) {
      const Eigen::VectorXd col = m.column(k);
      Series s{"endmember " + std::to_string(k), m.axis().values(), {col.data(), col.data() + col.size()}};
      emit("endmember_" + std::to_string(k) + ".svg",
           line_plot_svg({s}, "Endmember " + std::to_string(k), "Raman shift", "Intensity"));
    }
  }
  if (fs::exists(dir / "abundances.csv")) {
    std::vector<std::size_t> shape;
    const AbundanceMatrix a = load_abundances_csv(dir / "abundances.csv", &shape);
    if (shape.size() < 2) {
      skipped.push_back("abundances.csv: no spatial shape");
    } else {
      for (std::size_t k = 0; k < a.count(); ++k)
        emit("abundance_" + std::to_string(k) + ".svg",
             heatmap_svg(scene_map(a.values().col(static_cast<Eigen::Index>(k)), shape),
                         "Abundance " + std::to_string(k)));
    }
  }
  if (fs::exists(dir / "loss.csv")) emit("loss.svg", line_plot_svg({read_loss(dir / "loss.csv")}, "Training loss", "Epoch", "Loss"));
  if (fs::exists(dir / "scaling.csv"))
    emit("scaling.svg", line_plot_svg(read_scaling(dir / "scaling.csv"), "Wall time", "Spectra", "Seconds", true));

  if (outputs.empty() && skipped.empty())
    throw IoError(dir.string() + ": no endmembers.csv, abundances.csv or scaling.csv to plot");
  return finish("plot", {{"input", absolute_path(dir)}}, ctx, outputs, {{"skipped", skipped}}, start);
}

json run_command(const std::string& name, const json& settings, const Context& ctx) {
  if (name == "generate") return cmd_generate(settings, ctx);
  if (name == "preprocess") return cmd_preprocess(settings, ctx);
  if (name == "unmix") return cmd_unmix(settings, ctx);
  if (name == "evaluate") return cmd_evaluate(settings, ctx);
  if (name == "benchmark") return cmd_benchmark(settings, ctx);
  if (name == "profile") return cmd_profile(settings, ctx);
  if (name == "plot") return cmd_plot(settings, ctx);
  throw ConfigError("unknown command '" + name + "'");
}

std::vector<std::string> command_names() {
  return {"generate", "preprocess", "unmix", "evaluate", "benchmark", "profile", "plot"};
}

const json* manifest_settings(const json& j, const std::string& command) {
  if (!j.is_object() || j.value("tool", "") != "ramanmix" || !j.contains("settings")) return nullptr;
  const std::string other = j.value("command", "");
  if (other != command)
    throw ConfigError("/command: manifest is for '" + other + "', not '" + command + "'");
  return &j.at("settings");
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  if (dynamic_cast<const Error*>(&e) || dynamic_cast<const nlohmann::json::exception*>(&e)) return 2;
  // anything else is a runtime failure of the computation itself
  return 4;
}

}  // namespace ramanmix::app
