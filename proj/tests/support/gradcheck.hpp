#pragma once

// Central finite-difference oracle for layer and autoencoder gradients.

#include <algorithm>
#include <cmath>
#include <string>

#include "ramanmix/ae/autoencoder.hpp"
#include "ramanmix/nn/layers.hpp"

namespace ramanmix::testing {

struct GradReport {
  double max_rel_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

inline nn::Tensor random_tensor(std::vector<std::size_t> dims, Rng& rng, double scale = 1.0) {
  nn::Tensor t(std::move(dims));
  for (double& v : t.values()) v = rng.normal(0.0, scale);
  return t;
}

namespace detail {

inline void record(GradReport& r, double a, double n, const std::string& where) {
  const double e = rel_error(a, n);
  ++r.checked;
  if (e > r.max_rel_error) {
    r.max_rel_error = e;
    r.worst = where + " analytic=" + std::to_string(a) + " numeric=" + std::to_string(n);
  }
}

// At most `limit` coordinates, spread over the tensor.
inline std::vector<std::size_t> coords(std::size_t size, std::size_t limit) {
  std::vector<std::size_t> out;
  const std::size_t step = std::max<std::size_t>(1, size / limit);
  for (std::size_t i = 0; i < size && out.size() < limit; i += step) out.push_back(i);
  return out;
}

}  // namespace detail

/// Checks d(sum(weights .* layer(x)))/d(x, params). The rng is re-seeded for
/// every evaluation so dropout masks stay fixed.
inline GradReport check_layer(nn::Layer& layer, nn::Tensor x, nn::Mode mode, std::uint64_t seed,
                              double h = 1e-5, std::size_t limit = 120) {
  auto objective = [&](const nn::Tensor& in, const nn::Tensor& w) {
    Rng rng(seed);
    nn::Cache cache;
    return layer.forward(in, mode, rng, cache).flat().dot(w.flat());
  };
  Rng wrng(seed ^ 0x5bd1e995);
  nn::Cache cache;
  Rng rng(seed);
  const nn::Tensor y = layer.forward(x, mode, rng, cache);
  const nn::Tensor w = random_tensor(y.dims(), wrng);
  auto grads = nn::zero_gradients(layer);
  const nn::Tensor dx = layer.backward(cache, w, grads);

  GradReport r;
  for (std::size_t i : detail::coords(x.size(), limit)) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = objective(x, w);
    x[i] = keep - h;
    const double down = objective(x, w);
    x[i] = keep;
    detail::record(r, dx[i], (up - down) / (2 * h), "input[" + std::to_string(i) + "]");
  }
  auto params = layer.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    nn::Tensor& t = *params[p];
    for (std::size_t i : detail::coords(t.size(), limit)) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = objective(x, w);
      t[i] = keep - h;
      const double down = objective(x, w);
      t[i] = keep;
      detail::record(r, grads[p][i], (up - down) / (2 * h),
                     "param" + std::to_string(p) + "[" + std::to_string(i) + "]");
    }
  }
  return r;
}

/// Checks the full autoencoder loss gradient against every trainable parameter.
inline GradReport check_model(ae::AEModel& model, const nn::Tensor& x, const ae::LossSpec& loss, nn::Mode mode,
                              std::uint64_t seed, double h = 1e-5, std::size_t limit = 60) {
  Rng rng(seed);
  const ae::BatchLoss bl = ae::loss_and_gradients(model, x, loss, mode, rng);
  auto objective = [&] {
    Rng r(seed);
    return ae::batch_loss(model, x, loss, mode, r);
  };
  GradReport r;
  auto params = model.trainable_parameters();
  const auto names = model.trainable_names();
  for (std::size_t p = 0; p < params.size(); ++p) {
    nn::Tensor& t = *params[p];
    for (std::size_t i : detail::coords(t.size(), limit)) {
      const double keep = t[i];
      t[i] = keep + h;
      const double up = objective();
      t[i] = keep - h;
      const double down = objective();
      t[i] = keep;
      detail::record(r, bl.gradients[p][i], (up - down) / (2 * h), names[p] + "[" + std::to_string(i) + "]");
    }
  }
  return r;
}

}  // namespace ramanmix::testing
