#pragma once

#include <span>
#include <vector>

#include "ramanmix/nn/tensor.hpp"

namespace ramanmix::nn {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  /// Zero moments shaped like `params`.
  static AdamState for_parameters(const std::vector<Tensor*>& params, double lr = 1e-3);
};

void validate(const AdamState& s);

/// One bias-corrected Adam update of every parameter in place.
void adam_step(AdamState& state, const std::vector<Tensor*>& params, std::span<const Tensor> grads);

}  // namespace ramanmix::nn
