#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ramanmix::nn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::vector<std::size_t> dims, std::vector<double> data);
  static Tensor from_matrix(const RowMatrix& m);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const { return data_.size(); }
  std::size_t last_dim() const { return dims_.empty() ? 0 : dims_.back(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  /// Aligned to the widest vector unit, so Eigen reductions over equal data
  /// round identically whatever allocation they come from.
  using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

  Storage& values() { return data_; }
  const Storage& values() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  /// View as (size / last_dim) x last_dim.
  MatrixMap matrix();
  ConstMatrixMap matrix() const;
  Eigen::Map<Eigen::VectorXd> flat() { return {data_.data(), static_cast<Eigen::Index>(data_.size())}; }
  Eigen::Map<const Eigen::VectorXd> flat() const {
    return {data_.data(), static_cast<Eigen::Index>(data_.size())};
  }

  /// Same data, new dims; the element count must match.
  Tensor reshaped(std::vector<std::size_t> dims) const;
  void fill(double v);
  bool all_finite() const;

  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> dims_;
  Storage data_;
};

std::size_t product(const std::vector<std::size_t>& dims);

}  // namespace ramanmix::nn
