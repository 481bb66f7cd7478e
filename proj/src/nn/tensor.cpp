#include "ramanmix/nn/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "ramanmix/core/error.hpp"

namespace ramanmix::nn {

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : dims_(std::move(dims)), data_(product(dims_), fill) {}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(data.begin(), data.end()) {
  if (product(dims_) != data_.size()) throw ConfigError("tensor data length does not match " + shape_string());
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.matrix() = m;
  return t;
}

MatrixMap Tensor::matrix() {
  const auto cols = static_cast<Eigen::Index>(last_dim());
  return {data_.data(), cols == 0 ? 0 : static_cast<Eigen::Index>(data_.size()) / cols, cols};
}

ConstMatrixMap Tensor::matrix() const {
  const auto cols = static_cast<Eigen::Index>(last_dim());
  return {data_.data(), cols == 0 ? 0 : static_cast<Eigen::Index>(data_.size()) / cols, cols};
}

Tensor Tensor::reshaped(std::vector<std::size_t> dims) const {
  if (product(dims) != data_.size()) throw ConfigError("cannot reshape " + shape_string());
  Tensor out = *this;
  out.dims_ = std::move(dims);
  return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::string s = "(";
  for (std::size_t i = 0; i < dims_.size(); ++i) s += (i ? ", " : "") + std::to_string(dims_[i]);
  return s + ")";
}

}  // namespace ramanmix::nn
