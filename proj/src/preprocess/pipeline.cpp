#include "ramanmix/preprocess/pipeline.hpp"

#include <nlohmann/json.hpp>

#include "ramanmix/core/error.hpp"

namespace ramanmix::preprocess {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "/" + key + ": wrong type");
  }
}

void check_keys(const json& s, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : s.items()) {
    if (key == "op") continue;
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(path + "/" + key + ": unknown key");
  }
}

BaselineParams baseline_from_json(const json& j, BaselineParams defaults, const std::string& path) {
  defaults.lambda = get_or(j, "lambda", defaults.lambda, path);
  defaults.p = get_or(j, "p", defaults.p, path);
  defaults.diff_order = get_or(j, "diff_order", defaults.diff_order, path);
  defaults.max_iter = get_or(j, "max_iter", defaults.max_iter, path);
  defaults.tol = get_or(j, "tol", defaults.tol, path);
  defaults.asymmetric_coef = get_or(j, "asymmetric_coef", defaults.asymmetric_coef, path);
  return defaults;
}

json baseline_to_json(const char* op, const BaselineParams& p, bool asymmetric) {
  json j = {{"op", op},
            {"lambda", p.lambda},
            {"diff_order", p.diff_order},
            {"max_iter", p.max_iter},
            {"tol", p.tol}};
  if (asymmetric) {
    j["p"] = p.p;
  } else {
    j["asymmetric_coef"] = p.asymmetric_coef;
  }
  return j;
}

SpectralDataset per_spectrum(const SpectralDataset& d, auto&& fn) {
  SpectralDataset out = d;
  for (Eigen::Index i = 0; i < d.intensities.rows(); ++i) {
    const Eigen::VectorXd s = d.intensities.row(i).transpose();
    out.intensities.row(i) = fn(s).transpose();
  }
  return out;
}

}  // namespace

std::vector<Step> thp1_preset() {
  BaselineParams asls;
  asls.lambda = 1e6;
  asls.p = 0.01;
  asls.diff_order = 2;
  asls.max_iter = 50;
  asls.tol = 1e-3;
  return {CropStep{700.0, 1800.0}, DespikeStep{DespikeParams{3, 8.0}}, SavgolStep{7, 3}, AslsStep{asls},
          NormalizeStep{NormalizeMode::GlobalMinMax}};
}

std::vector<Step> sugar_preset() {
  BaselineParams aspls;
  aspls.lambda = 1e5;
  aspls.diff_order = 2;
  aspls.max_iter = 100;
  aspls.tol = 1e-3;
  return {CropStep{400.0, 1800.0}, AsplsStep{aspls}, NormalizeStep{NormalizeMode::GlobalVector}};
}

std::vector<Step> preset(const std::string& name) {
  if (name == "thp1") return thp1_preset();
  if (name == "sugar") return sugar_preset();
  throw ConfigError("unknown preprocessing preset '" + name + "' (expected thp1 or sugar)");
}

std::string step_name(const Step& step) {
  return std::visit(overloaded{[](const CropStep&) { return std::string("crop"); },
                               [](const DespikeStep&) { return std::string("despike"); },
                               [](const SavgolStep&) { return std::string("savgol"); },
                               [](const AslsStep&) { return std::string("asls"); },
                               [](const AsplsStep&) { return std::string("aspls"); },
                               [](const NormalizeStep&) { return std::string("normalize"); }},
                    step);
}

SpectralDataset run_pipeline(const SpectralDataset& d, const std::vector<Step>& steps) {
  SpectralDataset cur = d;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    try {
      cur = std::visit(
          overloaded{
              [&](const CropStep& s) { return crop(cur, s.lo, s.hi); },
              [&](const DespikeStep& s) {
                validate(s.params);
                return per_spectrum(cur, [&](const Eigen::VectorXd& x) { return despike(x, s.params); });
              },
              [&](const SavgolStep& s) {
                return per_spectrum(cur, [&](const Eigen::VectorXd& x) { return savgol(x, s.window, s.degree); });
              },
              [&](const AslsStep& s) {
                return per_spectrum(cur,
                                    [&](const Eigen::VectorXd& x) { return asls_baseline(x, s.params).corrected; });
              },
              [&](const AsplsStep& s) {
                return per_spectrum(cur,
                                    [&](const Eigen::VectorXd& x) { return aspls_baseline(x, s.params).corrected; });
              },
              [&](const NormalizeStep& s) { return normalize(cur, s.mode); }},
          steps[k]);
    } catch (const ConfigError& e) {
      throw ConfigError("pipeline step " + std::to_string(k) + " (" + step_name(steps[k]) + "): " + e.what());
    } catch (const NumericalError& e) {
      throw NumericalError("pipeline step " + std::to_string(k) + " (" + step_name(steps[k]) + "): " + e.what());
    }
  }
  return cur;
}

std::vector<Step> steps_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("/: pipeline config must be an object");
  if (j.contains("preset")) {
    if (j.size() != 1) throw ConfigError("/: preset excludes other keys");
    if (!j.at("preset").is_string()) throw ConfigError("/preset: must be a string");
    return preset(j.at("preset").get<std::string>());
  }
  if (!j.contains("steps") || !j.at("steps").is_array()) throw ConfigError("/steps: required array missing");
  std::vector<Step> steps;
  const auto& arr = j.at("steps");
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string path = "/steps/" + std::to_string(k);
    const auto& s = arr[k];
    if (!s.is_object() || !s.contains("op") || !s.at("op").is_string())
      throw ConfigError(path + "/op: required string missing");
    const auto op = s.at("op").get<std::string>();
    if (op == "crop") {
      check_keys(s, path, {"lo", "hi"});
      if (!s.contains("lo") || !s.contains("hi")) throw ConfigError(path + ": crop needs lo and hi");
      steps.push_back(CropStep{get_or(s, "lo", 0.0, path), get_or(s, "hi", 0.0, path)});
    } else if (op == "despike") {
      check_keys(s, path, {"kernel", "threshold"});
      DespikeParams p;
      p.kernel = get_or(s, "kernel", p.kernel, path);
      p.z_threshold = get_or(s, "threshold", p.z_threshold, path);
      steps.push_back(DespikeStep{p});
    } else if (op == "savgol") {
      check_keys(s, path, {"window", "degree"});
      steps.push_back(SavgolStep{get_or(s, "window", 7, path), get_or(s, "degree", 3, path)});
    } else if (op == "asls") {
      check_keys(s, path, {"lambda", "p", "diff_order", "max_iter", "tol"});
      steps.push_back(AslsStep{baseline_from_json(s, BaselineParams{}, path)});
    } else if (op == "aspls") {
      check_keys(s, path, {"lambda", "asymmetric_coef", "diff_order", "max_iter", "tol"});
      BaselineParams defaults;
      defaults.lambda = 1e5;
      defaults.max_iter = 100;
      steps.push_back(AsplsStep{baseline_from_json(s, defaults, path)});
    } else if (op == "normalize") {
      check_keys(s, path, {"mode"});
      const auto mode = get_or<std::string>(s, "mode", "minmax", path);
      if (mode == "minmax") {
        steps.push_back(NormalizeStep{NormalizeMode::GlobalMinMax});
      } else if (mode == "vector") {
        steps.push_back(NormalizeStep{NormalizeMode::GlobalVector});
      } else {
        throw ConfigError(path + "/mode: expected minmax or vector");
      }
    } else {
      throw ConfigError(path + "/op: unknown step '" + op + "'");
    }
  }
  return steps;
}

json to_json(const std::vector<Step>& steps) {
  json arr = json::array();
  for (const auto& step : steps) {
    arr.push_back(std::visit(
        overloaded{[](const CropStep& s) { return json{{"op", "crop"}, {"lo", s.lo}, {"hi", s.hi}}; },
                   [](const DespikeStep& s) {
                     return json{{"op", "despike"}, {"kernel", s.params.kernel}, {"threshold", s.params.z_threshold}};
                   },
                   [](const SavgolStep& s) { return json{{"op", "savgol"}, {"window", s.window}, {"degree", s.degree}}; },
                   [](const AslsStep& s) { return baseline_to_json("asls", s.params, true); },
                   [](const AsplsStep& s) { return baseline_to_json("aspls", s.params, false); },
                   [](const NormalizeStep& s) {
                     return json{{"op", "normalize"},
                                 {"mode", s.mode == NormalizeMode::GlobalMinMax ? "minmax" : "vector"}};
                   }},
        step));
  }
  return json{{"steps", arr}};
}

}  // namespace ramanmix::preprocess
