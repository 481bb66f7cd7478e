#include "ramanmix/eval/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "ramanmix/core/error.hpp"
#include "ramanmix/core/io.hpp"
#include "ramanmix/unmix/extraction.hpp"
#include "ramanmix/unmix/nnls.hpp"

namespace ramanmix::eval {

using Clock = std::chrono::steady_clock;

MethodConfig method_preset(const std::string& name) {
  MethodConfig m;
  m.name = name;
  if (name == "nfindr+fcls") m.kind = MethodKind::NfindrFcls;
  else if (name == "nfindr+nnls") m.kind = MethodKind::NfindrNnls;
  else if (name == "vca+fcls") m.kind = MethodKind::VcaFcls;
  else if (name == "vca+nnls") m.kind = MethodKind::VcaNnls;
  else if (name == "pca") m.kind = MethodKind::Pca;
  else {
    std::string base = name;
    const std::string bil = "-bilinear";
    if (base.size() > bil.size() && base.ends_with(bil)) {
      m.ae.decoder = ae::DecoderKind::BilinearFan;
      base.resize(base.size() - bil.size());
    }
    if (!base.ends_with("-ae")) throw ConfigError("unknown method '" + name + "'");
    base.resize(base.size() - 3);
    m.kind = MethodKind::Autoencoder;
    m.ae.encoder = ae::encoder_kind_from_string(base);
  }
  return m;
}

std::vector<std::string> method_preset_names() {
  std::vector<std::string> names{"nfindr+fcls", "nfindr+nnls", "vca+fcls", "vca+nnls", "pca"};
  for (const char* e : {"dense", "deep-dense", "conv", "transformer", "conv-transformer"}) {
    names.push_back(std::string(e) + "-ae");
    names.push_back(std::string(e) + "-ae-bilinear");
  }
  return names;
}

UnmixOutput run_method(const MethodConfig& method, const SpectralDataset& d, std::size_t n, bool has_artifacts,
                       std::uint64_t seed) {
  const auto start = Clock::now();
  UnmixOutput out;
  Rng rng = Rng::stream(seed, "method");
  switch (method.kind) {
    case MethodKind::NfindrFcls:
    case MethodKind::NfindrNnls:
    case MethodKind::VcaFcls:
    case MethodKind::VcaNnls: {
      const bool nf = method.kind == MethodKind::NfindrFcls || method.kind == MethodKind::NfindrNnls;
      const bool fc = method.kind == MethodKind::NfindrFcls || method.kind == MethodKind::VcaFcls;
      unmix::ExtractionResult ex = nf ? unmix::nfindr(d, n, rng) : unmix::vca(d, n, rng);
      out.abundances = unmix::estimate_abundances(ex.endmembers, d, fc ? unmix::AbundanceMethod::FCLS
                                                                        : unmix::AbundanceMethod::NNLS);
      out.endmembers = std::move(ex.endmembers);
      for (const auto& [k, v] : ex.meta) out.meta[k] = v;
      out.meta["indices"] = ex.indices;
      break;
    }
    case MethodKind::Pca: {
      unmix::PcaUnmixResult r = unmix::pca_unmix(d, n);
      out.endmembers = std::move(r.endmembers);
      out.abundances = std::move(r.abundances);
      for (const auto& [k, v] : r.meta) out.meta[k] = v;
      break;
    }
    case MethodKind::Autoencoder: {
      const AutoencoderConfig& c = method.ae;
      const std::size_t m = c.latent.value_or(has_artifacts ? n + 1 : n);
      Rng init = Rng::stream(seed, "init");
      ae::AEModel model = ae::build_model({c.encoder, d.bands(), m}, {c.decoder, std::nullopt}, {c.asc, c.gamma}, init);
      ae::TrainConfig tc = c.train;
      tc.seed = seed;
      ae::TrainResult tr = ae::train(model, d, tc);
      out.endmembers = ae::extract_endmembers(model);
      out.abundances = ae::predict_abundances(model, d);
      out.loss_history = tr.epoch_loss;
      out.meta["model"] = ae::describe(model);
      out.meta["steps"] = tr.steps;
      out.model = std::move(model);
      break;
    }
  }
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

// Variants

BenchmarkVariant variant_preset(const std::string& mixture, synth::SceneKind scene) {
  BenchmarkVariant v;
  v.name = mixture;
  v.spec.scene.kind = scene;
  if (mixture == "ideal") {
  } else if (mixture == "artifacts") {
    v.spec.artifacts = synth::ArtifactConfig{};
  } else if (mixture == "realistic") {
    v.spec.endmembers.style = synth::EndmemberStyle::Noisy;
    v.spec.artifacts = synth::ArtifactConfig{};
  } else if (mixture == "bilinear") {
    v.spec.endmembers.style = synth::EndmemberStyle::Noisy;
    v.spec.artifacts = synth::ArtifactConfig{};
    v.spec.model = MixtureModel::BilinearFan;
  } else {
    throw ConfigError("unknown mixture scenario '" + mixture + "'");
  }
  return v;
}

std::vector<BenchmarkVariant> standard_variants() {
  using synth::SceneKind;
  std::vector<BenchmarkVariant> out;
  for (const char* mix : {"ideal", "artifacts", "realistic", "bilinear"})
    for (SceneKind s : {SceneKind::Chessboard, SceneKind::Gaussian, SceneKind::Dirichlet}) {
      if (std::string(mix) == "bilinear" && s == SceneKind::Chessboard) continue;
      out.push_back(variant_preset(mix, s));
    }
  return out;
}

void validate(const BenchmarkGrid& g) {
  if (g.variants.empty()) throw ConfigError("grid: no variants");
  if (g.methods.empty()) throw ConfigError("grid: no methods");
  if (g.datasets_per_variant < 1 || g.seeds_per_dataset < 1) throw ConfigError("grid: replicate counts must be >= 1");
  for (const auto& v : g.variants) synth::validate(v.spec);
  for (const auto& m : g.methods)
    if (m.kind == MethodKind::Autoencoder) ae::validate(m.ae.train);
}

namespace {

std::uint64_t nth_output(std::uint64_t base, std::string_view tag, std::size_t index) {
  Rng r = Rng::stream(base, tag);
  std::uint64_t v = 0;
  for (std::size_t i = 0; i <= index; ++i) v = r.next_u64();
  return v;
}

}  // namespace

std::uint64_t dataset_seed(std::uint64_t base, std::size_t index) { return nth_output(base, "datasets", index); }
std::uint64_t method_seed(std::uint64_t base, std::size_t index) { return nth_output(base, "methods", index); }

BenchmarkResult run_benchmark(const BenchmarkGrid& grid, std::size_t jobs) {
  validate(grid);
  const std::size_t nv = grid.variants.size(), nd = grid.datasets_per_variant;
  const std::size_t nm = grid.methods.size(), ns = grid.seeds_per_dataset;
  std::vector<Replicate> reps(nv * nd * nm * ns);

  auto run_group = [&](std::size_t group) {
    const std::size_t vi = group / nd, di = group % nd;
    const BenchmarkVariant& variant = grid.variants[vi];
    synth::DatasetSpec spec = variant.spec;
    spec.seed = dataset_seed(grid.base_seed, di);
    std::optional<std::pair<SpectralDataset, GroundTruth>> data;
    std::string gen_error;
    try {
      data = synth::generate_dataset(spec);
    } catch (const Error& e) {
      gen_error = std::string("dataset generation: ") + e.what();
    }
    for (std::size_t mi = 0; mi < nm; ++mi)
      for (std::size_t si = 0; si < ns; ++si) {
        Replicate& r = reps[((vi * nd + di) * nm + mi) * ns + si];
        r.variant = variant.name;
        r.scene = synth::to_string(spec.scene.kind);
        r.method = grid.methods[mi].name;
        r.dataset_index = di;
        r.seed_index = si;
        if (!data) {
          r.error = gen_error;
          continue;
        }
        try {
          UnmixOutput out = run_method(grid.methods[mi], data->first, spec.endmembers.n, spec.artifacts.has_value(),
                                       method_seed(grid.base_seed, si));
          MetricReport rep = evaluate(out.endmembers, out.abundances, data->second);
          rep.runtime = out.seconds;
          r.report = std::move(rep);
        } catch (const Error& e) {
          r.error = e.what();
        }
      }
  };

  const std::size_t groups = nv * nd;
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, groups);
  if (workers == 1) {
    for (std::size_t g = 0; g < groups; ++g) run_group(g);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t g; (g = next.fetch_add(1)) < groups;) {
          try {
            run_group(g);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  BenchmarkResult result;
  result.replicates = std::move(reps);
  result.summary = summarize(result.replicates);
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<Replicate>& reps) {
  std::vector<SummaryRow> rows;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> values;
  for (const auto& r : reps) {
    const auto key = std::make_tuple(r.variant, r.scene, r.method);
    auto [it, fresh] = index.try_emplace(key, values.size());
    if (fresh) values.emplace_back();
    if (r.report) {
      values[it->second].first.push_back(r.report->endmember_sad);
      values[it->second].second.push_back(r.report->abundance_mse);
    }
  }
  // keep first-seen order of cells
  std::vector<std::pair<std::size_t, decltype(index)::key_type>> order;
  for (const auto& [k, i] : index) order.emplace_back(i, k);
  std::sort(order.begin(), order.end());
  for (const auto& [i, k] : order) {
    const auto& [variant, scene, method] = k;
    for (int which = 0; which < 2; ++which) {
      const auto& v = which == 0 ? values[i].first : values[i].second;
      // a cell where every replicate failed has no statistics, not zero error
      const double nan = std::numeric_limits<double>::quiet_NaN();
      SummaryRow row{variant, scene, method, which == 0 ? "endmember_sad" : "abundance_mse", nan, nan, v.size()};
      if (!v.empty()) {
        row.std = 0.0;
        row.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        if (v.size() > 1) {
          double ss = 0.0;
          for (double x : v) ss += (x - row.mean) * (x - row.mean);
          row.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
        }
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "variant,scene,method,metric,mean,std,n\n";
  for (const auto& r : rows)
    os << r.variant << ',' << r.scene << ',' << r.method << ',' << r.metric << ',' << format_double(r.mean) << ','
       << format_double(r.std) << ',' << r.n << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

nlohmann::json to_json(const BenchmarkResult& r) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& x : r.replicates) {
    nlohmann::json j = {{"variant", x.variant}, {"scene", x.scene}, {"method", x.method},
                        {"dataset_index", x.dataset_index}, {"seed_index", x.seed_index}};
    if (x.report) {
      j["endmember_sad"] = x.report->endmember_sad;
      j["abundance_mse"] = x.report->abundance_mse;
      j["endmember_pcc"] = x.report->endmember_pcc;
      nlohmann::json pairs = nlohmann::json::array();
      for (const auto& p : x.report->detail)
        pairs.push_back({{"truth", p.truth}, {"estimate", p.estimate}, {"sad", p.sad}, {"pcc", p.pcc}, {"mse", p.mse}});
      j["pairs"] = pairs;
      j["unmatched_estimates"] = x.report->unmatched_estimates;
    } else {
      j["error"] = x.error;
    }
    reps.push_back(j);
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : r.summary)
    summary.push_back({{"variant", s.variant}, {"scene", s.scene}, {"method", s.method}, {"metric", s.metric},
                       {"mean", s.mean}, {"std", s.std}, {"n", s.n}});
  return {{"summary", summary}, {"replicates", reps}};
}

// Scaling

synth::DatasetSpec scaling_dataset_spec(std::size_t n_spectra, std::size_t bands, std::size_t endmembers,
                                        std::uint64_t seed) {
  if (n_spectra < 1) throw ConfigError("scaling: sizes must be positive");
  std::size_t h = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_spectra)));
  while (n_spectra % h != 0) --h;
  const std::size_t w = n_spectra / h;
  std::size_t patches = std::min<std::size_t>(20, std::gcd(h, w));
  while (h % patches != 0 || w % patches != 0) --patches;
  synth::DatasetSpec spec;
  spec.endmembers = {endmembers, bands, synth::EndmemberStyle::Clean};
  spec.scene = {synth::SceneKind::Chessboard, h, w, endmembers, patches};
  spec.seed = seed;
  return spec;
}

std::vector<TimingRow> profile_scaling(const ScalingConfig& cfg) {
  if (cfg.sizes.empty() || cfg.methods.empty()) throw ConfigError("scaling: need sizes and methods");
  if (!std::is_sorted(cfg.sizes.begin(), cfg.sizes.end())) throw ConfigError("scaling: sizes must be ascending");
  if (cfg.runs < 1) throw ConfigError("scaling: runs must be >= 1");
  std::vector<TimingRow> rows;
  for (std::size_t n : cfg.sizes) {
    const auto data = synth::generate_dataset(scaling_dataset_spec(n, cfg.bands, cfg.endmembers, cfg.seed));
    for (const auto& m : cfg.methods)
      for (std::size_t run = 0; run < cfg.runs; ++run) {
        TimingRow row{m.name, n, run, 0.0, {}};
        try {
          row.seconds = run_method(m, data.first, cfg.endmembers, false, method_seed(cfg.seed, run)).seconds;
        } catch (const Error& e) {
          row.error = e.what();
        }
        rows.push_back(row);
      }
  }
  return rows;
}

void write_scaling_csv(const std::filesystem::path& path, const std::vector<TimingRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "method,N,run,seconds,error\n";
  for (const auto& r : rows)
    os << r.method << ',' << r.n_spectra << ',' << r.run << ',' << format_double(r.seconds) << ',' << r.error << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

double linear_r2(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("linear_r2: need two or more paired points");
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n), yv(y.data(), n);
  const double mx = xv.mean(), my = yv.mean();
  const double sxx = (xv.array() - mx).square().sum();
  const double sxy = ((xv.array() - mx) * (yv.array() - my)).sum();
  const double syy = (yv.array() - my).square().sum();
  if (sxx == 0.0) throw ConfigError("linear_r2: constant x");
  if (syy == 0.0) return 1.0;
  const double slope = sxy / sxx;
  const double sse = ((yv.array() - my) - slope * (xv.array() - mx)).square().sum();
  return 1.0 - sse / syy;
}

}  // namespace ramanmix::eval
