#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ramanmix/core/dataset.hpp"

namespace ramanmix {

enum class DataFormat { Csv, Bin };

/// Shortest text that round-trips to the same double.
std::string format_double(double v);

/// Picks the format from the extension (".csv" or ".bin").
DataFormat format_from_path(const std::filesystem::path& path);

/// csv: first row is the axis, then one spectrum per row; shape goes to the
/// sidecar `<stem>.meta.json`. bin: "RMX1" framing, see README.
SpectralDataset load_dataset(const std::filesystem::path& path, DataFormat format);
SpectralDataset load_dataset(const std::filesystem::path& path);
void save_dataset(const SpectralDataset& d, const std::filesystem::path& path, DataFormat format);
void save_dataset(const SpectralDataset& d, const std::filesystem::path& path);

/// Sidecar path for csv metadata: data.csv -> data.meta.json.
std::filesystem::path meta_path_for(const std::filesystem::path& csv_path);

/// One "RMX1" block: header values (axis), rows x header.size() payload and
/// optional shape. Blocks carry no semantic validation; callers do that.
struct MatrixBlock {
  std::vector<double> header;
  RowMatrix values;
  std::vector<std::size_t> shape;
};

void write_block(std::ostream& os, const MatrixBlock& block);
MatrixBlock read_block(std::istream& is, const std::string& source);

/// Ground truth as two consecutive blocks (endmember signatures one per row,
/// then abundances with component indices as header) followed by two u8
/// flags: mixture model (0 linear, 1 bilinear) and ASC.
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// Plain matrix csv with a numeric header row. Used for endmember and
/// abundance result files.
void write_matrix_csv(const std::filesystem::path& path, const std::vector<double>& header, const RowMatrix& values);
MatrixBlock read_matrix_csv(const std::filesystem::path& path);

void save_endmembers_csv(const EndmemberMatrix& m, const std::filesystem::path& path);
EndmemberMatrix load_endmembers_csv(const std::filesystem::path& path);
/// Writes the sidecar meta with the shape and the ASC flag when present.
void save_abundances_csv(const AbundanceMatrix& a, const std::vector<std::size_t>& shape,
                         const std::filesystem::path& path);
AbundanceMatrix load_abundances_csv(const std::filesystem::path& path, std::vector<std::size_t>* shape = nullptr);

}  // namespace ramanmix
