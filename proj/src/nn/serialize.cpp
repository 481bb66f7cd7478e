#include "ramanmix/nn/serialize.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "ramanmix/core/error.hpp"

namespace ramanmix::nn {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

void save_parameters(const std::filesystem::path& path, nlohmann::json manifest,
                     const std::vector<const Tensor*>& params, const std::vector<std::string>& names) {
  if (names.size() != params.size()) throw ConfigError("save_parameters: name count does not match parameters");
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) list.push_back({{"name", names[i]}, {"dims", params[i]->dims()}});
  manifest["parameters"] = list;
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("RMXM", 4);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor* p : params)
    out.write(reinterpret_cast<const char*>(p->data()), static_cast<std::streamsize>(p->size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path.string());
}

LoadedParameters load_parameters(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "RMXM") throw IoError(path.string() + ": not a model file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 30)) throw IoError(path.string() + ": corrupt manifest length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError(path.string() + ": truncated manifest");

  LoadedParameters out;
  try {
    out.manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad manifest: " + e.what());
  }
  if (!out.manifest.contains("parameters")) throw IoError(path.string() + ": manifest lacks parameters");
  for (const auto& entry : out.manifest["parameters"]) {
    Tensor t(entry.at("dims").get<std::vector<std::size_t>>());
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw IoError(path.string() + ": truncated parameter data");
    out.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing bytes");
  return out;
}

void assign_parameters(const std::vector<Tensor*>& params, const std::vector<Tensor>& values) {
  if (params.size() != values.size())
    throw ConfigError("model has " + std::to_string(params.size()) + " parameter tensors, file has " +
                      std::to_string(values.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->dims() != values[i].dims())
      throw ConfigError("parameter " + std::to_string(i) + " shape " + params[i]->shape_string() +
                        " does not match file " + values[i].shape_string());
    *params[i] = values[i];
  }
}

}  // namespace ramanmix::nn
