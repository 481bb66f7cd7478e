#include "ramanmix/core/dataset.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "ramanmix/core/error.hpp"

namespace ramanmix {

SpectralAxis::SpectralAxis(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2) throw ConfigError("axis must have at least 2 bands");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw ConfigError("axis value at band " + std::to_string(i) + " is not finite");
    if (i > 0 && !(values_[i] > values_[i - 1]))
      throw ConfigError("axis not strictly increasing at band " + std::to_string(i));
  }
}

SpectralAxis SpectralAxis::band_indices(std::size_t bands) {
  std::vector<double> v(bands);
  std::iota(v.begin(), v.end(), 0.0);
  return SpectralAxis(std::move(v));
}

std::vector<Violation> validate_dataset(const SpectralDataset& d) {
  std::vector<Violation> out;
  if (d.intensities.rows() < 1) out.push_back({"row count N >= 1", "N = 0"});
  if (static_cast<std::size_t>(d.intensities.cols()) != d.axis.size()) {
    out.push_back({"row length = b", "rows have " + std::to_string(d.intensities.cols()) +
                                         " bands, axis has " + std::to_string(d.axis.size())});
  }
  for (Eigen::Index r = 0; r < d.intensities.rows(); ++r) {
    for (Eigen::Index c = 0; c < d.intensities.cols(); ++c) {
      if (!std::isfinite(d.intensities(r, c))) {
        out.push_back({"all entries finite",
                       "row " + std::to_string(r) + ", band " + std::to_string(c)});
      }
    }
  }
  if (!d.shape.empty()) {
    if (d.shape.size() != 2 && d.shape.size() != 3) {
      out.push_back({"shape rank is 2 or 3", "rank " + std::to_string(d.shape.size())});
    }
    const std::size_t prod =
        std::accumulate(d.shape.begin(), d.shape.end(), std::size_t{1}, std::multiplies<>());
    if (prod != d.size()) {
      out.push_back({"shape product \xe2\x89\xa0 N", "product " + std::to_string(prod) +
                                                        " vs N = " + std::to_string(d.size())});
    }
  }
  return out;
}

void require_valid(const SpectralDataset& d) {
  const auto v = validate_dataset(d);
  if (!v.empty()) throw ConfigError("invalid dataset: " + v.front().invariant + " (" + v.front().where + ")");
}

EndmemberMatrix::EndmemberMatrix(Eigen::MatrixXd signatures, SpectralAxis axis)
    : signatures_(std::move(signatures)), axis_(std::move(axis)) {
  if (static_cast<std::size_t>(signatures_.rows()) != axis_.size())
    throw ConfigError("endmember rows do not match axis length");
  if (signatures_.cols() < 1) throw ConfigError("endmember matrix has no columns");
  for (Eigen::Index j = 0; j < signatures_.cols(); ++j) {
    bool nonzero = false;
    for (Eigen::Index i = 0; i < signatures_.rows(); ++i) {
      const double v = signatures_(i, j);
      if (!std::isfinite(v) || v < 0.0)
        throw ConfigError("endmember " + std::to_string(j) + " has a negative or non-finite entry at band " +
                          std::to_string(i));
      nonzero = nonzero || v > 0.0;
    }
    if (!nonzero) throw ConfigError("endmember " + std::to_string(j) + " is all zero");
  }
}

AbundanceMatrix::AbundanceMatrix(RowMatrix values, bool asc_enforced, bool physical)
    : values_(std::move(values)), asc_enforced_(asc_enforced), physical_(physical) {
  for (Eigen::Index r = 0; r < values_.rows(); ++r) {
    for (Eigen::Index c = 0; c < values_.cols(); ++c) {
      const double v = values_(r, c);
      if (!std::isfinite(v)) throw NumericalError("abundance row " + std::to_string(r) + " is not finite");
      if (physical_ && v < 0.0) throw ConfigError("abundance row " + std::to_string(r) + " violates ANC");
      if (asc_enforced_ && v > 1.0 + 1e-9)
        throw ConfigError("abundance row " + std::to_string(r) + " exceeds 1");
    }
    if (asc_enforced_ && std::abs(values_.row(r).sum() - 1.0) > 1e-6)
      throw ConfigError("abundance row " + std::to_string(r) + " violates ASC");
  }
}

std::string to_string(MixtureModel m) {
  return m == MixtureModel::Linear ? "linear" : "bilinear";
}

MixtureModel mixture_model_from_string(const std::string& s) {
  if (s == "linear") return MixtureModel::Linear;
  if (s == "bilinear" || s == "fan" || s == "bilinear-fan") return MixtureModel::BilinearFan;
  throw ConfigError("unknown mixture model '" + s + "'");
}

SpectralDataset crop(const SpectralDataset& d, double lo, double hi) {
  if (!(lo < hi)) throw ConfigError("crop requires lo < hi");
  std::vector<Eigen::Index> keep;
  std::vector<double> kept_axis;
  for (std::size_t j = 0; j < d.axis.size(); ++j) {
    if (d.axis[j] >= lo && d.axis[j] <= hi) {
      keep.push_back(static_cast<Eigen::Index>(j));
      kept_axis.push_back(d.axis[j]);
    }
  }
  if (keep.empty()) {
    throw ConfigError("crop to [" + std::to_string(lo) + ", " + std::to_string(hi) + "] leaves no bands");
  }
  if (keep.size() < 2) throw ConfigError("crop leaves a single band; an axis needs at least 2");
  SpectralDataset out;
  out.axis = SpectralAxis(std::move(kept_axis));
  out.intensities = d.intensities(Eigen::all, keep);
  out.shape = d.shape;
  return out;
}

}  // namespace ramanmix
