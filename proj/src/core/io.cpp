#include "ramanmix/core/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ramanmix/core/error.hpp"

namespace ramanmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<char, 4> kMagic = {'R', 'M', 'X', '1'};

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const std::string& source) {
  std::array<char, sizeof(T)> bytes;
  const auto offset = is.tellg();
  if (!is.read(bytes.data(), sizeof(T)))
    throw IoError(source + ": truncated file at offset " + std::to_string(static_cast<long long>(offset)));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path() && !fs::exists(path.parent_path()))
    throw IoError("output directory does not exist: " + path.parent_path().string());
  std::ofstream os(path, mode | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  if (!fs::exists(path)) throw IoError("no such file: " + path.string());
  std::ifstream is(path, mode);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  return is;
}

double parse_cell(std::string_view cell, const std::string& where) {
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end)
    throw IoError(where + ": non-numeric cell '" + std::string(cell) + "'");
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

json read_meta(const fs::path& csv_path) {
  const auto meta = meta_path_for(csv_path);
  if (!fs::exists(meta)) return json::object();
  auto is = open_in(meta);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IoError(meta.string() + ": " + e.what());
  }
}

std::vector<std::size_t> shape_from_meta(const json& meta, const fs::path& path) {
  std::vector<std::size_t> shape;
  if (!meta.contains("shape")) return shape;
  try {
    shape = meta.at("shape").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw IoError(meta_path_for(path).string() + ": bad shape: " + e.what());
  }
  return shape;
}

void write_meta(const fs::path& csv_path, const json& meta) {
  const auto meta_file = meta_path_for(csv_path);
  if (meta.empty()) {
    std::error_code ec;
    fs::remove(meta_file, ec);
    return;
  }
  auto os = open_out(meta_file);
  os << meta.dump(2) << '\n';
}

}  // namespace

std::string format_double(double v) {
  std::array<char, 32> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), ptr);
}

DataFormat format_from_path(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return DataFormat::Csv;
  if (ext == ".bin") return DataFormat::Bin;
  throw ConfigError("cannot infer format from extension '" + ext + "' (expected .csv or .bin)");
}

fs::path meta_path_for(const fs::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

void write_block(std::ostream& os, const MatrixBlock& block) {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(block.values.rows()));
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(block.header.size()));
  put_le<std::uint8_t>(os, static_cast<std::uint8_t>(block.shape.size()));
  for (auto dim : block.shape) put_le<std::uint64_t>(os, dim);
  for (double v : block.header) put_le<double>(os, v);
  for (Eigen::Index r = 0; r < block.values.rows(); ++r)
    for (Eigen::Index c = 0; c < block.values.cols(); ++c) put_le<double>(os, block.values(r, c));
}

MatrixBlock read_block(std::istream& is, const std::string& source) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic)
    throw IoError(source + ": bad magic at offset " + std::to_string(static_cast<long long>(is.tellg()) - 4) +
                  " (expected RMX1)");
  const auto rows = get_le<std::uint64_t>(is, source);
  const auto cols = get_le<std::uint64_t>(is, source);
  const auto rank = get_le<std::uint8_t>(is, source);
  MatrixBlock block;
  for (int i = 0; i < rank; ++i) block.shape.push_back(static_cast<std::size_t>(get_le<std::uint64_t>(is, source)));
  if (cols > (1ULL << 32) || rows > (1ULL << 40)) throw IoError(source + ": implausible dimensions");
  block.header.resize(cols);
  for (auto& v : block.header) v = get_le<double>(is, source);
  block.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < block.values.rows(); ++r)
    for (Eigen::Index c = 0; c < block.values.cols(); ++c) block.values(r, c) = get_le<double>(is, source);
  return block;
}

void write_matrix_csv(const fs::path& path, const std::vector<double>& header, const RowMatrix& values) {
  auto os = open_out(path);
  for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << format_double(header[j]);
  os << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) os << (c ? "," : "") << format_double(values(r, c));
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

MatrixBlock read_matrix_csv(const fs::path& path) {
  auto is = open_in(path);
  const std::string src = path.string();
  std::string line;
  if (!std::getline(is, line) || line.empty() || line == "\r") throw IoError(src + ": malformed header (line 1 is empty)");
  MatrixBlock block;
  for (auto cell : split_commas(line)) {
    try {
      block.header.push_back(parse_cell(cell, src + ":1"));
    } catch (const IoError& e) {
      throw IoError(src + ": malformed header: " + e.what());
    }
  }
  std::vector<double> flat;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_commas(line);
    if (cells.size() != block.header.size()) {
      throw IoError(src + ": ragged row at line " + std::to_string(lineno) + " (" + std::to_string(cells.size()) +
                    " cells, header has " + std::to_string(block.header.size()) + ")");
    }
    for (std::size_t c = 0; c < cells.size(); ++c)
      flat.push_back(parse_cell(cells[c], src + ":" + std::to_string(lineno) + " column " + std::to_string(c + 1)));
    ++rows;
  }
  block.values = Eigen::Map<RowMatrix>(flat.data(), static_cast<Eigen::Index>(rows),
                                       static_cast<Eigen::Index>(block.header.size()));
  return block;
}

SpectralDataset load_dataset(const fs::path& path, DataFormat format) {
  MatrixBlock block;
  if (format == DataFormat::Bin) {
    auto is = open_in(path, std::ios::binary);
    block = read_block(is, path.string());
  } else {
    block = read_matrix_csv(path);
    block.shape = shape_from_meta(read_meta(path), path);
  }
  SpectralDataset d;
  try {
    d.axis = SpectralAxis(std::move(block.header));
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  d.intensities = std::move(block.values);
  d.shape = std::move(block.shape);
  const auto violations = validate_dataset(d);
  if (!violations.empty())
    throw IoError(path.string() + ": " + violations.front().invariant + " (" + violations.front().where + ")");
  return d;
}

SpectralDataset load_dataset(const fs::path& path) { return load_dataset(path, format_from_path(path)); }

void save_dataset(const SpectralDataset& d, const fs::path& path, DataFormat format) {
  require_valid(d);
  if (format == DataFormat::Bin) {
    auto os = open_out(path, std::ios::out | std::ios::binary);
    write_block(os, MatrixBlock{d.axis.values(), d.intensities, d.shape});
    if (!os) throw IoError("write failed: " + path.string());
    return;
  }
  write_matrix_csv(path, d.axis.values(), d.intensities);
  json meta = json::object();
  if (!d.shape.empty()) meta["shape"] = d.shape;
  write_meta(path, meta);
}

void save_dataset(const SpectralDataset& d, const fs::path& path) { save_dataset(d, path, format_from_path(path)); }

void save_ground_truth(const GroundTruth& gt, const fs::path& path) {
  auto os = open_out(path, std::ios::out | std::ios::binary);
  const RowMatrix signatures = gt.endmembers.signatures().transpose();
  write_block(os, MatrixBlock{gt.endmembers.axis().values(), signatures, {}});
  std::vector<double> components(gt.abundances.count());
  for (std::size_t j = 0; j < components.size(); ++j) components[j] = static_cast<double>(j);
  write_block(os, MatrixBlock{components, gt.abundances.values(), gt.shape});
  put_le<std::uint8_t>(os, gt.mixture_model == MixtureModel::Linear ? 0 : 1);
  put_le<std::uint8_t>(os, gt.abundances.asc_enforced() ? 1 : 0);
  if (!os) throw IoError("write failed: " + path.string());
}

GroundTruth load_ground_truth(const fs::path& path) {
  auto is = open_in(path, std::ios::binary);
  const std::string src = path.string();
  auto em = read_block(is, src);
  auto ab = read_block(is, src);
  const auto model = get_le<std::uint8_t>(is, src);
  const auto asc = get_le<std::uint8_t>(is, src);
  if (model > 1) throw IoError(src + ": unknown mixture model tag " + std::to_string(model));
  if (em.values.rows() != ab.values.cols())
    throw IoError(src + ": endmember count does not match abundance columns");
  GroundTruth gt;
  try {
    gt.endmembers = EndmemberMatrix(em.values.transpose(), SpectralAxis(std::move(em.header)));
    gt.abundances = AbundanceMatrix(std::move(ab.values), asc == 1);
  } catch (const ConfigError& e) {
    throw IoError(src + ": " + e.what());
  }
  gt.mixture_model = model == 0 ? MixtureModel::Linear : MixtureModel::BilinearFan;
  gt.shape = std::move(ab.shape);
  return gt;
}

void save_endmembers_csv(const EndmemberMatrix& m, const fs::path& path) {
  write_matrix_csv(path, m.axis().values(), m.signatures().transpose());
}

EndmemberMatrix load_endmembers_csv(const fs::path& path) {
  auto block = read_matrix_csv(path);
  try {
    return EndmemberMatrix(block.values.transpose(), SpectralAxis(std::move(block.header)));
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void save_abundances_csv(const AbundanceMatrix& a, const std::vector<std::size_t>& shape, const fs::path& path) {
  std::vector<double> header(a.count());
  for (std::size_t j = 0; j < header.size(); ++j) header[j] = static_cast<double>(j);
  write_matrix_csv(path, header, a.values());
  json meta = {{"asc_enforced", a.asc_enforced()}, {"physical", a.physical()}};
  if (!shape.empty()) meta["shape"] = shape;
  write_meta(path, meta);
}

AbundanceMatrix load_abundances_csv(const fs::path& path, std::vector<std::size_t>* shape) {
  auto block = read_matrix_csv(path);
  const auto meta = read_meta(path);
  if (shape) *shape = shape_from_meta(meta, path);
  const bool asc = meta.value("asc_enforced", false);
  const bool physical = meta.value("physical", true);
  try {
    return AbundanceMatrix(std::move(block.values), asc, physical);
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace ramanmix
