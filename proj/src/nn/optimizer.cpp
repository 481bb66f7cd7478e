#include "ramanmix/nn/optimizer.hpp"

#include <cmath>

#include "ramanmix/core/error.hpp"

namespace ramanmix::nn {

AdamState AdamState::for_parameters(const std::vector<Tensor*>& params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->dims());
    s.v.emplace_back(p->dims());
  }
  validate(s);
  return s;
}

void validate(const AdamState& s) {
  if (!(s.lr > 0)) throw ConfigError("Adam: learning rate must be positive");
  if (!(s.beta1 >= 0 && s.beta1 < 1) || !(s.beta2 >= 0 && s.beta2 < 1))
    throw ConfigError("Adam: beta1 and beta2 must lie in [0, 1)");
  if (!(s.eps > 0)) throw ConfigError("Adam: eps must be positive");
  if (s.t < 0) throw ConfigError("Adam: negative step count");
}

void adam_step(AdamState& s, const std::vector<Tensor*>& params, std::span<const Tensor> grads) {
  if (params.size() != grads.size() || params.size() != s.m.size() || params.size() != s.v.size())
    throw ConfigError("Adam: parameter, gradient and moment counts differ");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->dims() != grads[i].dims() || params[i]->dims() != s.m[i].dims())
      throw ConfigError("Adam: shape mismatch for parameter " + std::to_string(i));
  ++s.t;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = s.m[i].flat();
    auto v = s.v[i].flat();
    const auto g = grads[i].flat();
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseAbs2();
    params[i]->flat().array() -= s.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.eps);
  }
}

}  // namespace ramanmix::nn
