#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ramanmix {

/// Row-major dense matrix; one spectrum (or abundance vector) per row.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Strictly increasing, finite wavenumber grid (cm^-1) with at least two bands.
class SpectralAxis {
 public:
  SpectralAxis() = default;
  /// Throws ConfigError if the values violate the axis invariants.
  explicit SpectralAxis(std::vector<double> values);

  /// Axis 0, 1, ..., bands-1 used for synthetic data.
  static SpectralAxis band_indices(std::size_t bands);

  std::size_t size() const { return values_.size(); }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }

  friend bool operator==(const SpectralAxis&, const SpectralAxis&) = default;

 private:
  std::vector<double> values_;
};

/// N spectra over b bands. `shape` is optional spatial metadata: empty, (H, W)
/// or (H, W, Z), pixel order row-major with z outermost.
struct SpectralDataset {
  SpectralAxis axis;
  RowMatrix intensities;
  std::vector<std::size_t> shape;

  std::size_t size() const { return static_cast<std::size_t>(intensities.rows()); }
  std::size_t bands() const { return static_cast<std::size_t>(intensities.cols()); }
};

struct Violation {
  std::string invariant;
  std::string where;
};

/// Empty iff every SpectralDataset invariant holds.
std::vector<Violation> validate_dataset(const SpectralDataset& d);

/// Throws ConfigError carrying the first violation.
void require_valid(const SpectralDataset& d);

/// b x n matrix of non-negative endmember signatures, one per column.
class EndmemberMatrix {
 public:
  EndmemberMatrix() = default;
  /// Throws ConfigError for negative/non-finite entries, all-zero columns or
  /// an axis whose length differs from the row count.
  EndmemberMatrix(Eigen::MatrixXd signatures, SpectralAxis axis);

  const Eigen::MatrixXd& signatures() const { return signatures_; }
  const SpectralAxis& axis() const { return axis_; }
  std::size_t bands() const { return static_cast<std::size_t>(signatures_.rows()); }
  std::size_t count() const { return static_cast<std::size_t>(signatures_.cols()); }
  Eigen::VectorXd column(std::size_t j) const { return signatures_.col(static_cast<Eigen::Index>(j)); }

 private:
  Eigen::MatrixXd signatures_;
  SpectralAxis axis_;
};

/// N x n fractional abundances.
///
/// `asc_enforced` rows lie on the probability simplex. `physical == false`
/// marks non-physical baselines (PCA scores) that are exempt from the
/// non-negativity check.
class AbundanceMatrix {
 public:
  AbundanceMatrix() = default;
  AbundanceMatrix(RowMatrix values, bool asc_enforced, bool physical = true);

  const RowMatrix& values() const { return values_; }
  bool asc_enforced() const { return asc_enforced_; }
  bool physical() const { return physical_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t count() const { return static_cast<std::size_t>(values_.cols()); }

 private:
  RowMatrix values_;
  bool asc_enforced_ = false;
  bool physical_ = true;
};

enum class MixtureModel { Linear, BilinearFan };

std::string to_string(MixtureModel m);
MixtureModel mixture_model_from_string(const std::string& s);

struct GroundTruth {
  EndmemberMatrix endmembers;
  AbundanceMatrix abundances;
  MixtureModel mixture_model = MixtureModel::Linear;
  std::vector<std::size_t> shape;
};

/// Keeps bands with lo <= wavenumber <= hi. Throws ConfigError when lo >= hi
/// or no band falls in range.
SpectralDataset crop(const SpectralDataset& d, double lo, double hi);

}  // namespace ramanmix
