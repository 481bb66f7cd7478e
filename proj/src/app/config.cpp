#include "ramanmix/app/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ramanmix/core/error.hpp"
#include "ramanmix/core/io.hpp"

namespace ramanmix::app {

json load_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

// Fields

Fields::Fields(const json& j, std::string pointer, std::vector<std::string_view> allowed)
    : j_(j), pointer_(std::move(pointer)) {
  if (!j.is_object()) throw ConfigError((pointer_.empty() ? "/" : pointer_) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(pointer_ + "/" + key + ": unknown key");
  }
}

bool Fields::has(std::string_view key) const {
  const auto it = j_.find(std::string(key));
  return it != j_.end() && !it->is_null();
}

std::string Fields::pointer(std::string_view key) const { return pointer_ + "/" + std::string(key); }

std::string Fields::string(std::string_view key, const std::string& fallback) const {
  if (!has(key)) return fallback;
  const json& v = at(key);
  if (!v.is_string()) throw ConfigError(pointer(key) + ": expected a string");
  return v.get<std::string>();
}

std::string Fields::choice(std::string_view key, const std::string& fallback,
                           const std::vector<std::string>& options) const {
  const std::string s = string(key, fallback);
  if (std::find(options.begin(), options.end(), s) != options.end()) return s;
  std::string list;
  for (const auto& o : options) list += (list.empty() ? "" : ", ") + o;
  throw ConfigError(pointer(key) + ": '" + s + "' is not one of " + list);
}

double Fields::number(std::string_view key, double fallback) const {
  if (!has(key)) return fallback;
  const json& v = at(key);
  if (!v.is_number()) throw ConfigError(pointer(key) + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(pointer(key) + ": must be finite");
  return d;
}

std::uint64_t Fields::count(std::string_view key, std::uint64_t fallback, std::uint64_t min) const {
  if (!has(key)) return fallback;
  const json& v = at(key);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError(pointer(key) + ": expected a non-negative integer");
  const auto c = v.get<std::uint64_t>();
  if (c < min) throw ConfigError(pointer(key) + ": must be >= " + std::to_string(min));
  return c;
}

bool Fields::boolean(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const json& v = at(key);
  if (!v.is_boolean()) throw ConfigError(pointer(key) + ": expected true or false");
  return v.get<bool>();
}

// Dataset spec

namespace {

const std::vector<std::string> kVariants{"ideal", "artifacts", "realistic", "bilinear"};

double probability(const Fields& f, std::string_view key, double fallback) {
  const double p = f.number(key, fallback);
  if (p < 0.0 || p > 1.0) throw ConfigError(f.pointer(key) + ": must be in [0, 1]");
  return p;
}

synth::ArtifactConfig artifacts_from_json(const json& j, const std::string& pointer) {
  synth::ArtifactConfig a;
  const Fields f(j, pointer, {"sigma_noise", "p_baseline", "h_baseline", "p_spike", "h_spike"});
  a.sigma_noise = f.number("sigma_noise", a.sigma_noise);
  if (a.sigma_noise < 0.0) throw ConfigError(f.pointer("sigma_noise") + ": must be >= 0");
  a.p_baseline = probability(f, "p_baseline", a.p_baseline);
  a.h_baseline = f.number("h_baseline", a.h_baseline);
  a.p_spike = probability(f, "p_spike", a.p_spike);
  a.h_spike = f.number("h_spike", a.h_spike);
  return a;
}

}  // namespace

synth::DatasetSpec dataset_spec_from_json(const json& j, const std::string& pointer) {
  const Fields f(j, pointer, {"name", "variant", "seed", "endmembers", "scene", "mixture", "artifacts"});
  f.string("name", "");
  synth::DatasetSpec s = eval::variant_preset(f.choice("variant", "ideal", kVariants), synth::SceneKind::Chessboard).spec;
  s.seed = f.count("seed", 0);

  if (f.has("endmembers")) {
    const Fields e(f.at("endmembers"), f.pointer("endmembers"), {"n", "bands", "style"});
    s.endmembers.n = e.count("n", s.endmembers.n, 1);
    s.endmembers.b = e.count("bands", s.endmembers.b, 20);
    s.endmembers.style =
        synth::endmember_style_from_string(e.choice("style", synth::to_string(s.endmembers.style), {"clean", "noisy"}));
  }
  s.scene.n = s.endmembers.n;
  if (f.has("scene")) {
    const Fields sc(f.at("scene"), f.pointer("scene"), {"kind", "height", "width", "n", "patches_per_side"});
    s.scene.kind = synth::scene_kind_from_string(
        sc.choice("kind", synth::to_string(s.scene.kind), {"chessboard", "gaussian", "dirichlet"}));
    s.scene.height = sc.count("height", s.scene.height, 1);
    s.scene.width = sc.count("width", s.scene.width, 1);
    s.scene.patches_per_side = sc.count("patches_per_side", s.scene.patches_per_side, 1);
    s.scene.n = sc.count("n", s.endmembers.n, 1);
    if (s.scene.n != s.endmembers.n)
      throw ConfigError(sc.pointer("n") + ": " + std::to_string(s.scene.n) + " does not match " + pointer +
                        "/endmembers/n (" + std::to_string(s.endmembers.n) + ")");
    if (s.scene.kind == synth::SceneKind::Chessboard &&
        (s.scene.height % s.scene.patches_per_side != 0 || s.scene.width % s.scene.patches_per_side != 0))
      throw ConfigError(sc.pointer("patches_per_side") + ": " + std::to_string(s.scene.patches_per_side) +
                        " does not divide the " + std::to_string(s.scene.height) + "x" +
                        std::to_string(s.scene.width) + " scene");
  }
  s.model = mixture_model_from_string(f.choice("mixture", to_string(s.model), {"linear", "bilinear"}));

  if (f.has("artifacts")) {
    const json& a = f.at("artifacts");
    if (a.is_boolean()) {
      s.artifacts = a.get<bool>() ? std::optional(synth::ArtifactConfig{}) : std::nullopt;
    } else {
      s.artifacts = artifacts_from_json(a, f.pointer("artifacts"));
    }
  }
  synth::validate(s);
  return s;
}

json to_json(const synth::DatasetSpec& s) {
  json j = {{"seed", s.seed},
            {"endmembers", {{"n", s.endmembers.n}, {"bands", s.endmembers.b}, {"style", to_string(s.endmembers.style)}}},
            {"scene",
             {{"kind", to_string(s.scene.kind)},
              {"height", s.scene.height},
              {"width", s.scene.width},
              {"n", s.scene.n},
              {"patches_per_side", s.scene.patches_per_side}}},
            {"mixture", to_string(s.model)}};
  if (s.artifacts) {
    const auto& a = *s.artifacts;
    j["artifacts"] = {{"sigma_noise", a.sigma_noise}, {"p_baseline", a.p_baseline}, {"h_baseline", a.h_baseline},
                      {"p_spike", a.p_spike}, {"h_spike", a.h_spike}};
  } else {
    j["artifacts"] = false;
  }
  return j;
}

// Methods

eval::MethodConfig method_from_json(const json& j, const std::string& pointer) {
  if (j.is_string()) {
    try {
      return eval::method_preset(j.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError((pointer.empty() ? "/" : pointer) + ": " + e.what());
    }
  }
  const Fields f(j, pointer, {"method", "name", "encoder", "decoder", "latent", "asc", "gamma", "train"});
  if (!f.has("method")) throw ConfigError(f.pointer("method") + ": required");
  eval::MethodConfig m;
  try {
    m = eval::method_preset(f.string("method", ""));
  } catch (const ConfigError& e) {
    throw ConfigError(f.pointer("method") + ": " + e.what());
  }
  m.name = f.string("name", m.name);
  if (m.name.empty()) throw ConfigError(f.pointer("name") + ": must not be empty");
  if (m.kind != eval::MethodKind::Autoencoder) {
    for (const char* key : {"encoder", "decoder", "latent", "asc", "gamma", "train"})
      if (f.has(key)) throw ConfigError(f.pointer(key) + ": only autoencoder methods take this setting");
    return m;
  }
  auto& c = m.ae;
  c.encoder = ae::encoder_kind_from_string(
      f.choice("encoder", ae::to_string(c.encoder), {"dense", "deep-dense", "conv", "transformer", "conv-transformer"}));
  c.decoder = ae::decoder_kind_from_string(f.choice("decoder", ae::to_string(c.decoder), {"linear", "bilinear"}));
  if (f.has("latent")) c.latent = f.count("latent", 0, 1);
  c.asc = f.boolean("asc", c.asc);
  c.gamma = f.number("gamma", c.gamma);
  if (c.gamma <= 0.0) throw ConfigError(f.pointer("gamma") + ": must be positive");
  if (f.has("train")) {
    const Fields t(f.at("train"), f.pointer("train"), {"epochs", "lr", "batch_size", "mse_weight"});
    c.train.epochs = static_cast<int>(t.count("epochs", static_cast<std::uint64_t>(c.train.epochs), 1));
    c.train.lr = t.number("lr", c.train.lr);
    if (c.train.lr <= 0.0) throw ConfigError(t.pointer("lr") + ": must be positive");
    c.train.batch_size = t.count("batch_size", c.train.batch_size, 1);
    c.train.loss.mse_weight = t.number("mse_weight", c.train.loss.mse_weight);
    if (c.train.loss.mse_weight < 0.0) throw ConfigError(t.pointer("mse_weight") + ": must be >= 0");
  }
  return m;
}

json to_json(const eval::MethodConfig& m) {
  using eval::MethodKind;
  switch (m.kind) {
    case MethodKind::NfindrFcls: return {{"method", "nfindr+fcls"}, {"name", m.name}};
    case MethodKind::NfindrNnls: return {{"method", "nfindr+nnls"}, {"name", m.name}};
    case MethodKind::VcaFcls: return {{"method", "vca+fcls"}, {"name", m.name}};
    case MethodKind::VcaNnls: return {{"method", "vca+nnls"}, {"name", m.name}};
    case MethodKind::Pca: return {{"method", "pca"}, {"name", m.name}};
    case MethodKind::Autoencoder: break;
  }
  const auto& c = m.ae;
  json j = {{"method", ae::to_string(c.encoder) + "-ae"},
            {"name", m.name},
            {"encoder", ae::to_string(c.encoder)},
            {"decoder", ae::to_string(c.decoder)},
            {"latent", c.latent ? json(*c.latent) : json(nullptr)},
            {"asc", c.asc},
            {"gamma", c.gamma},
            {"train",
             {{"epochs", c.train.epochs},
              {"lr", c.train.lr},
              {"batch_size", c.train.batch_size},
              {"mse_weight", c.train.loss.mse_weight}}}};
  return j;
}

// Grid

namespace {

std::vector<eval::MethodConfig> methods_from_json(const Fields& f) {
  if (!f.has("methods") || !f.at("methods").is_array() || f.at("methods").empty())
    throw ConfigError(f.pointer("methods") + ": required non-empty array");
  std::vector<eval::MethodConfig> out;
  std::set<std::string> names;
  const json& arr = f.at("methods");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = f.pointer("methods") + "/" + std::to_string(i);
    out.push_back(method_from_json(arr[i], p));
    if (!names.insert(out.back().name).second)
      throw ConfigError(p + ": duplicate method name '" + out.back().name + "'");
  }
  return out;
}

}  // namespace

eval::BenchmarkGrid grid_from_json(const json& j) {
  const Fields f(j, "", {"base_seed", "datasets_per_variant", "seeds_per_dataset", "variants", "methods"});
  eval::BenchmarkGrid g;
  g.base_seed = f.count("base_seed", g.base_seed);
  g.datasets_per_variant = f.count("datasets_per_variant", g.datasets_per_variant, 1);
  g.seeds_per_dataset = f.count("seeds_per_dataset", g.seeds_per_dataset, 1);

  if (!f.has("variants")) throw ConfigError("/variants: required");
  const json& vs = f.at("variants");
  if (vs.is_string()) {
    if (vs.get<std::string>() != "standard") throw ConfigError("/variants: expected \"standard\" or an array");
    g.variants = eval::standard_variants();
  } else if (vs.is_array() && !vs.empty()) {
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const std::string p = "/variants/" + std::to_string(i);
      eval::BenchmarkVariant v;
      v.spec = dataset_spec_from_json(vs[i], p);
      v.name = vs[i].value("name", vs[i].value("variant", std::string("custom")));
      if (!seen.insert({v.name, synth::to_string(v.spec.scene.kind)}).second)
        throw ConfigError(p + ": duplicate variant '" + v.name + "' with scene " + synth::to_string(v.spec.scene.kind));
      g.variants.push_back(std::move(v));
    }
  } else {
    throw ConfigError("/variants: expected \"standard\" or a non-empty array");
  }
  g.methods = methods_from_json(f);
  return g;
}

json to_json(const eval::BenchmarkGrid& g) {
  json variants = json::array();
  for (const auto& v : g.variants) {
    json s = to_json(v.spec);
    s.erase("seed");
    s["name"] = v.name;
    variants.push_back(std::move(s));
  }
  json methods = json::array();
  for (const auto& m : g.methods) methods.push_back(to_json(m));
  return {{"base_seed", g.base_seed},
          {"datasets_per_variant", g.datasets_per_variant},
          {"seeds_per_dataset", g.seeds_per_dataset},
          {"variants", variants},
          {"methods", methods}};
}

// Scaling

eval::ScalingConfig scaling_from_json(const json& j) {
  const Fields f(j, "", {"sizes", "methods", "runs", "bands", "endmembers", "seed"});
  eval::ScalingConfig c;
  if (!f.has("sizes") || !f.at("sizes").is_array() || f.at("sizes").empty())
    throw ConfigError("/sizes: required non-empty array");
  const json& sizes = f.at("sizes");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const std::string p = "/sizes/" + std::to_string(i);
    if (!sizes[i].is_number_integer() || sizes[i].get<std::int64_t>() < 1)
      throw ConfigError(p + ": expected a positive integer");
    c.sizes.push_back(sizes[i].get<std::size_t>());
    if (i > 0 && c.sizes[i] <= c.sizes[i - 1]) throw ConfigError(p + ": sizes must be strictly increasing");
  }
  c.methods = methods_from_json(f);
  c.runs = f.count("runs", c.runs, 1);
  c.bands = f.count("bands", c.bands, 20);
  c.endmembers = f.count("endmembers", c.endmembers, 1);
  c.seed = f.count("seed", c.seed);
  return c;
}

json to_json(const eval::ScalingConfig& c) {
  json methods = json::array();
  for (const auto& m : c.methods) methods.push_back(to_json(m));
  return {{"sizes", c.sizes},   {"methods", methods},       {"runs", c.runs},
          {"bands", c.bands},   {"endmembers", c.endmembers}, {"seed", c.seed}};
}

}  // namespace ramanmix::app
