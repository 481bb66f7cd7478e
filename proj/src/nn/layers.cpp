#include "ramanmix/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "ramanmix/core/error.hpp"

namespace ramanmix::nn {

namespace {

using Eigen::Index;

Tensor checked(Tensor t, const char* where) {
  if (!t.all_finite()) throw NumericalError(std::string("non-finite output in ") + where + " forward");
  return t;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

void require_grad_shape(const Tensor& grad, const std::vector<std::size_t>& dims, const char* where) {
  if (grad.dims() != dims) throw ConfigError(std::string(where) + " backward: gradient shape does not match cache");
}

std::vector<std::size_t> with_last(std::vector<std::size_t> dims, std::size_t last) {
  dims.back() = last;
  return dims;
}

ConstMatrixMap weights(const Tensor& t, std::size_t offset, std::size_t rows, std::size_t cols) {
  return {t.data() + offset, static_cast<Index>(rows), static_cast<Index>(cols)};
}

MatrixMap weights(Tensor& t, std::size_t offset, std::size_t rows, std::size_t cols) {
  return {t.data() + offset, static_cast<Index>(rows), static_cast<Index>(cols)};
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::Conv1D: return "Conv1D";
    case LayerKind::MultiHeadAttention: return "MultiHeadAttention";
    case LayerKind::LayerNorm: return "LayerNorm";
    case LayerKind::Dropout: return "Dropout";
    case LayerKind::Activation: return "Activation";
    case LayerKind::Reshape: return "Reshape";
    case LayerKind::Composite: return "Composite";
  }
  return "?";
}

std::vector<const Tensor*> Layer::parameters() const {
  auto ps = const_cast<Layer*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

nlohmann::json Layer::describe() const { return {{"kind", to_string(kind())}}; }

std::size_t Layer::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* p : parameters()) n += p->size();
  return n;
}

std::vector<Tensor> zero_gradients(const Layer& layer) {
  std::vector<Tensor> g;
  for (const Tensor* p : layer.parameters()) g.emplace_back(p->dims());
  return g;
}

void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values()) v = rng.uniform(-a, a);
}

Tensor clip_nonnegative(const Tensor& t) {
  Tensor out = t;
  clip_nonnegative_inplace(out);
  return out;
}

void clip_nonnegative_inplace(Tensor& t) {
  for (double& v : t.values()) v = std::max(v, 0.0);
}

// Dense

Dense::Dense(std::size_t in, std::size_t out, Rng& rng) : weight_({in, out}), bias_({out}) {
  require(in > 0 && out > 0, "Dense: dimensions must be positive");
  glorot_uniform(weight_, in, out, rng);
}

Dense::Dense(Tensor weight, Tensor bias) : weight_(std::move(weight)), bias_(std::move(bias)) {
  require(weight_.rank() == 2 && bias_.rank() == 1 && bias_.dim(0) == weight_.dim(1), "Dense: inconsistent weight shapes");
}

Tensor Dense::forward(const Tensor& x, Mode, Rng&, Cache& cache) const {
  const std::size_t in = weight_.dim(0), out = weight_.dim(1);
  if (x.rank() < 1 || x.last_dim() != in)
    throw ConfigError("Dense: expected last dimension " + std::to_string(in) + ", got " + x.shape_string());
  Tensor y(with_last(x.dims(), out));
  y.matrix().noalias() = x.matrix() * weight_.matrix();
  y.matrix().rowwise() += bias_.flat().transpose();
  cache.tensors = {x};
  return checked(std::move(y), "Dense");
}

Tensor Dense::backward(const Cache& cache, const Tensor& g, std::span<Tensor> grads) const {
  const Tensor& x = cache.tensors.at(0);
  require_grad_shape(g, with_last(x.dims(), weight_.dim(1)), "Dense");
  grads[0].matrix().noalias() += x.matrix().transpose() * g.matrix();
  grads[1].flat() += g.matrix().colwise().sum().transpose();
  Tensor dx(x.dims());
  dx.matrix().noalias() = g.matrix() * weight_.matrix().transpose();
  return dx;
}

nlohmann::json Dense::describe() const {
  return {{"kind", "Dense"}, {"in", weight_.dim(0)}, {"out", weight_.dim(1)}};
}

// Conv1D

Conv1D::Conv1D(std::size_t in_channels, std::size_t filters, std::size_t kernel_size, Rng& rng)
    : kernel_({kernel_size, in_channels, filters}), bias_({filters}) {
  require(in_channels > 0 && filters > 0 && kernel_size > 0, "Conv1D: dimensions must be positive");
  glorot_uniform(kernel_, kernel_size * in_channels, kernel_size * filters, rng);
}

Conv1D::Conv1D(Tensor kernel, Tensor bias) : kernel_(std::move(kernel)), bias_(std::move(bias)) {
  require(kernel_.rank() == 3 && bias_.rank() == 1 && bias_.dim(0) == kernel_.dim(2), "Conv1D: inconsistent kernel shapes");
}

namespace {

// Row range [lo, hi) of output positions that read input row l + offset.
std::pair<Index, Index> valid_rows(Index length, Index offset) {
  return {std::max<Index>(0, -offset), std::min<Index>(length, length - offset)};
}

}  // namespace

Tensor Conv1D::forward(const Tensor& x, Mode, Rng&, Cache& cache) const {
  const std::size_t K = kernel_.dim(0), cin = kernel_.dim(1), F = kernel_.dim(2);
  if (x.rank() != 3 || x.dim(2) != cin)
    throw ConfigError("Conv1D: expected (batch, length, " + std::to_string(cin) + "), got " + x.shape_string());
  const std::size_t B = x.dim(0), L = x.dim(1);
  const Index pad = static_cast<Index>((K - 1) / 2);
  Tensor y({B, L, F});
  auto Y = y.matrix();
  Y.rowwise() = bias_.flat().transpose();
  const auto X = x.matrix();
  for (std::size_t b = 0; b < B; ++b) {
    const Index base = static_cast<Index>(b * L);
    for (std::size_t k = 0; k < K; ++k) {
      const Index off = static_cast<Index>(k) - pad;
      const auto [lo, hi] = valid_rows(static_cast<Index>(L), off);
      if (hi <= lo) continue;
      Y.middleRows(base + lo, hi - lo).noalias() +=
          X.middleRows(base + lo + off, hi - lo) * weights(kernel_, k * cin * F, cin, F);
    }
  }
  cache.tensors = {x};
  return checked(std::move(y), "Conv1D");
}

Tensor Conv1D::backward(const Cache& cache, const Tensor& g, std::span<Tensor> grads) const {
  const Tensor& x = cache.tensors.at(0);
  const std::size_t K = kernel_.dim(0), cin = kernel_.dim(1), F = kernel_.dim(2);
  const std::size_t B = x.dim(0), L = x.dim(1);
  require_grad_shape(g, {B, L, F}, "Conv1D");
  const Index pad = static_cast<Index>((K - 1) / 2);
  Tensor dx(x.dims());
  auto dX = dx.matrix();
  const auto X = x.matrix();
  const auto G = g.matrix();
  for (std::size_t b = 0; b < B; ++b) {
    const Index base = static_cast<Index>(b * L);
    for (std::size_t k = 0; k < K; ++k) {
      const Index off = static_cast<Index>(k) - pad;
      const auto [lo, hi] = valid_rows(static_cast<Index>(L), off);
      if (hi <= lo) continue;
      weights(grads[0], k * cin * F, cin, F).noalias() +=
          X.middleRows(base + lo + off, hi - lo).transpose() * G.middleRows(base + lo, hi - lo);
      dX.middleRows(base + lo + off, hi - lo).noalias() +=
          G.middleRows(base + lo, hi - lo) * weights(kernel_, k * cin * F, cin, F).transpose();
    }
  }
  grads[1].flat() += G.colwise().sum().transpose();
  return dx;
}

nlohmann::json Conv1D::describe() const {
  return {{"kind", "Conv1D"}, {"in_channels", kernel_.dim(1)}, {"filters", kernel_.dim(2)},
          {"kernel_size", kernel_.dim(0)}, {"padding", "same"}};
}

// MultiHeadAttention

MultiHeadAttention::MultiHeadAttention(std::size_t model_dim, std::size_t heads, std::size_t head_dim, Rng& rng)
    : model_dim_(model_dim), heads_(heads), head_dim_(head_dim),
      wq_({model_dim, heads * head_dim}), bq_({heads * head_dim}),
      wk_({model_dim, heads * head_dim}), bk_({heads * head_dim}),
      wv_({model_dim, heads * head_dim}), bv_({heads * head_dim}),
      wo_({heads * head_dim, model_dim}), bo_({model_dim}) {
  require(model_dim > 0 && heads > 0 && head_dim > 0, "MultiHeadAttention: dimensions must be positive");
  for (Tensor* w : {&wq_, &wk_, &wv_}) glorot_uniform(*w, model_dim, heads * head_dim, rng);
  glorot_uniform(wo_, heads * head_dim, model_dim, rng);
}

namespace {

void attention_weights(const Eigen::Ref<const RowMatrix>& q, const Eigen::Ref<const RowMatrix>& k, double scale,
                       RowMatrix& p) {
  p.noalias() = q * k.transpose();
  p *= scale;
  for (Index r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
}

}  // namespace

Tensor MultiHeadAttention::forward(const Tensor& x, Mode, Rng&, Cache& cache) const {
  if (x.rank() != 3 || x.dim(2) != model_dim_)
    throw ConfigError("MultiHeadAttention: expected (batch, tokens, " + std::to_string(model_dim_) + "), got " +
                      x.shape_string());
  const std::size_t B = x.dim(0), T = x.dim(1), HD = heads_ * head_dim_;
  const auto X = x.matrix();
  Tensor q({B, T, HD}), k({B, T, HD}), v({B, T, HD}), o({B, T, HD});
  q.matrix().noalias() = X * wq_.matrix();
  q.matrix().rowwise() += bq_.flat().transpose();
  k.matrix().noalias() = X * wk_.matrix();
  k.matrix().rowwise() += bk_.flat().transpose();
  v.matrix().noalias() = X * wv_.matrix();
  v.matrix().rowwise() += bv_.flat().transpose();

  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  RowMatrix p(T, T);
  const auto Tn = static_cast<Index>(T), Dh = static_cast<Index>(head_dim_);
  for (std::size_t b = 0; b < B; ++b) {
    const Index r0 = static_cast<Index>(b * T);
    for (std::size_t h = 0; h < heads_; ++h) {
      const Index c0 = static_cast<Index>(h * head_dim_);
      attention_weights(q.matrix().block(r0, c0, Tn, Dh), k.matrix().block(r0, c0, Tn, Dh), scale, p);
      o.matrix().block(r0, c0, Tn, Dh).noalias() = p * v.matrix().block(r0, c0, Tn, Dh);
    }
  }
  Tensor y({B, T, model_dim_});
  y.matrix().noalias() = o.matrix() * wo_.matrix();
  y.matrix().rowwise() += bo_.flat().transpose();
  cache.tensors = {x, std::move(q), std::move(k), std::move(v), std::move(o)};
  return checked(std::move(y), "MultiHeadAttention");
}

Tensor MultiHeadAttention::backward(const Cache& cache, const Tensor& g, std::span<Tensor> grads) const {
  const Tensor& x = cache.tensors.at(0);
  const Tensor& q = cache.tensors.at(1);
  const Tensor& k = cache.tensors.at(2);
  const Tensor& v = cache.tensors.at(3);
  const Tensor& o = cache.tensors.at(4);
  const std::size_t B = x.dim(0), T = x.dim(1), HD = heads_ * head_dim_;
  require_grad_shape(g, x.dims(), "MultiHeadAttention");

  const auto G = g.matrix();
  grads[6].matrix().noalias() += o.matrix().transpose() * G;
  grads[7].flat() += G.colwise().sum().transpose();
  RowMatrix dO = G * wo_.matrix().transpose();

  Tensor dq({B, T, HD}), dk({B, T, HD}), dv({B, T, HD});
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  RowMatrix p(T, T), dp(T, T);
  const auto Tn = static_cast<Index>(T), Dh = static_cast<Index>(head_dim_);
  for (std::size_t b = 0; b < B; ++b) {
    const Index r0 = static_cast<Index>(b * T);
    for (std::size_t h = 0; h < heads_; ++h) {
      const Index c0 = static_cast<Index>(h * head_dim_);
      const auto qh = q.matrix().block(r0, c0, Tn, Dh);
      const auto kh = k.matrix().block(r0, c0, Tn, Dh);
      const auto vh = v.matrix().block(r0, c0, Tn, Dh);
      const auto doh = dO.block(r0, c0, Tn, Dh);
      attention_weights(qh, kh, scale, p);
      dv.matrix().block(r0, c0, Tn, Dh).noalias() = p.transpose() * doh;
      dp.noalias() = doh * vh.transpose();
      // softmax backward, row-wise
      const Eigen::VectorXd s = (dp.array() * p.array()).rowwise().sum();
      dp = p.array() * (dp.array().colwise() - s.array());
      dp *= scale;
      dq.matrix().block(r0, c0, Tn, Dh).noalias() = dp * kh;
      dk.matrix().block(r0, c0, Tn, Dh).noalias() = dp.transpose() * qh;
    }
  }
  const auto X = x.matrix();
  grads[0].matrix().noalias() += X.transpose() * dq.matrix();
  grads[1].flat() += dq.matrix().colwise().sum().transpose();
  grads[2].matrix().noalias() += X.transpose() * dk.matrix();
  grads[3].flat() += dk.matrix().colwise().sum().transpose();
  grads[4].matrix().noalias() += X.transpose() * dv.matrix();
  grads[5].flat() += dv.matrix().colwise().sum().transpose();

  Tensor dx(x.dims());
  dx.matrix().noalias() = dq.matrix() * wq_.matrix().transpose();
  dx.matrix().noalias() += dk.matrix() * wk_.matrix().transpose();
  dx.matrix().noalias() += dv.matrix() * wv_.matrix().transpose();
  return dx;
}

nlohmann::json MultiHeadAttention::describe() const {
  return {{"kind", "MultiHeadAttention"}, {"model_dim", model_dim_}, {"heads", heads_}, {"head_dim", head_dim_}};
}

// LayerNorm

LayerNorm::LayerNorm(std::size_t features, double epsilon)
    : epsilon_(epsilon), gamma_({features}, 1.0), beta_({features}, 0.0) {
  require(features > 0 && epsilon > 0, "LayerNorm: invalid settings");
}

Tensor LayerNorm::forward(const Tensor& x, Mode, Rng&, Cache& cache) const {
  const std::size_t F = gamma_.size();
  if (x.rank() < 1 || x.last_dim() != F)
    throw ConfigError("LayerNorm: expected last dimension " + std::to_string(F) + ", got " + x.shape_string());
  const auto X = x.matrix();
  Tensor xhat(x.dims());
  Tensor inv({static_cast<std::size_t>(X.rows())});
  auto H = xhat.matrix();
  for (Index r = 0; r < X.rows(); ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    inv[static_cast<std::size_t>(r)] = 1.0 / std::sqrt(var + epsilon_);
    H.row(r) = (X.row(r).array() - mu) * inv[static_cast<std::size_t>(r)];
  }
  Tensor y(x.dims());
  y.matrix() = (H.array().rowwise() * gamma_.flat().transpose().array()).rowwise() + beta_.flat().transpose().array();
  cache.tensors = {std::move(xhat), std::move(inv)};
  return checked(std::move(y), "LayerNorm");
}

Tensor LayerNorm::backward(const Cache& cache, const Tensor& g, std::span<Tensor> grads) const {
  const Tensor& xhat = cache.tensors.at(0);
  const Tensor& inv = cache.tensors.at(1);
  require_grad_shape(g, xhat.dims(), "LayerNorm");
  const auto H = xhat.matrix();
  const auto G = g.matrix();
  grads[0].flat() += (G.array() * H.array()).colwise().sum().transpose().matrix();
  grads[1].flat() += G.colwise().sum().transpose();
  const double n = static_cast<double>(gamma_.size());
  Tensor dx(xhat.dims());
  auto DX = dx.matrix();
  for (Index r = 0; r < G.rows(); ++r) {
    const Eigen::RowVectorXd dh = G.row(r).cwiseProduct(gamma_.flat().transpose());
    const double s1 = dh.sum();
    const double s2 = dh.dot(H.row(r));
    DX.row(r) = (inv[static_cast<std::size_t>(r)] / n) * (n * dh.array() - s1 - H.row(r).array() * s2);
  }
  return dx;
}

nlohmann::json LayerNorm::describe() const {
  return {{"kind", "LayerNorm"}, {"features", gamma_.size()}, {"epsilon", epsilon_}};
}

// Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  require(rate >= 0.0 && rate < 1.0, "Dropout: rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const {
  cache.tensors.clear();
  if (mode == Mode::Infer || rate_ == 0.0) return x;
  Tensor mask(x.dims());
  const double keep = 1.0 / (1.0 - rate_);
  for (double& m : mask.values()) m = rng.bernoulli(rate_) ? 0.0 : keep;
  Tensor y(x.dims());
  y.flat() = x.flat().cwiseProduct(mask.flat());
  cache.tensors = {std::move(mask)};
  return checked(std::move(y), "Dropout");
}

Tensor Dropout::backward(const Cache& cache, const Tensor& g, std::span<Tensor>) const {
  if (cache.tensors.empty()) return g;
  const Tensor& mask = cache.tensors.front();
  require_grad_shape(g, mask.dims(), "Dropout");
  Tensor dx(g.dims());
  dx.flat() = g.flat().cwiseProduct(mask.flat());
  return dx;
}

nlohmann::json Dropout::describe() const { return {{"kind", "Dropout"}, {"rate", rate_}}; }

// Activation

std::string to_string(const ActivationSpec& a) {
  switch (a.kind) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::Softmax: return "softmax";
    case ActivationKind::SoftRectTanh: return "soft_rect_tanh";
  }
  return "?";
}

double soft_rect_tanh(double x, double gamma) { return softplus(gamma * std::tanh(x)) / gamma; }

Tensor activation(const ActivationSpec& spec, const Tensor& x) {
  Tensor y = x;
  switch (spec.kind) {
    case ActivationKind::ReLU:
      for (double& v : y.values()) v = std::max(v, 0.0);
      break;
    case ActivationKind::LeakyReLU:
      for (double& v : y.values()) v = v > 0 ? v : spec.parameter * v;
      break;
    case ActivationKind::SoftRectTanh:
      for (double& v : y.values()) v = soft_rect_tanh(v, spec.parameter);
      break;
    case ActivationKind::Softmax: {
      auto Y = y.matrix();
      for (Index r = 0; r < Y.rows(); ++r) {
        auto row = Y.row(r);
        row.array() = (row.array() - row.maxCoeff()).exp();
        row /= row.sum();
      }
      break;
    }
  }
  return y;
}

Tensor Activation::forward(const Tensor& x, Mode, Rng&, Cache& cache) const {
  if (x.size() == 0) throw ConfigError("Activation: empty input");
  Tensor y = activation(spec_, x);
  cache.tensors = {x, y};
  return checked(std::move(y), "Activation");
}

Tensor Activation::backward(const Cache& cache, const Tensor& g, std::span<Tensor>) const {
  const Tensor& x = cache.tensors.at(0);
  const Tensor& y = cache.tensors.at(1);
  require_grad_shape(g, x.dims(), "Activation");
  Tensor dx(x.dims());
  switch (spec_.kind) {
    case ActivationKind::ReLU:
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0 ? g[i] : 0.0;
      break;
    case ActivationKind::LeakyReLU:
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0 ? g[i] : spec_.parameter * g[i];
      break;
    case ActivationKind::SoftRectTanh:
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double t = std::tanh(x[i]);
        dx[i] = g[i] * sigmoid(spec_.parameter * t) * (1.0 - t * t);
      }
      break;
    case ActivationKind::Softmax: {
      const auto Y = y.matrix();
      const auto G = g.matrix();
      const Eigen::VectorXd s = (G.array() * Y.array()).rowwise().sum();
      dx.matrix() = Y.array() * (G.array().colwise() - s.array());
      break;
    }
  }
  return dx;
}

nlohmann::json Activation::describe() const {
  nlohmann::json j = {{"kind", "Activation"}, {"function", to_string(spec_)}};
  if (spec_.kind == ActivationKind::LeakyReLU) j["slope"] = spec_.parameter;
  if (spec_.kind == ActivationKind::SoftRectTanh) j["gamma"] = spec_.parameter;
  return j;
}

// Reshape

Tensor Reshape::forward(const Tensor& x, Mode, Rng&, Cache& cache) const {
  if (x.rank() < 1) throw ConfigError("Reshape: input needs a batch dimension");
  std::vector<std::size_t> dims{x.dim(0)};
  dims.insert(dims.end(), trailing_.begin(), trailing_.end());
  if (product(dims) != x.size()) throw ConfigError("Reshape: cannot reshape " + x.shape_string());
  std::vector<double> in_dims(x.dims().begin(), x.dims().end());
  const std::size_t rank = in_dims.size();
  cache.tensors = {Tensor({rank}, std::move(in_dims))};
  return x.reshaped(std::move(dims));
}

Tensor Reshape::backward(const Cache& cache, const Tensor& g, std::span<Tensor>) const {
  const Tensor& d = cache.tensors.at(0);
  std::vector<std::size_t> dims;
  for (double v : d.values()) dims.push_back(static_cast<std::size_t>(v));
  return g.reshaped(std::move(dims));
}

nlohmann::json Reshape::describe() const { return {{"kind", "Reshape"}, {"trailing", trailing_}}; }

// Sequential

Sequential::Sequential(const Sequential& other) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

Tensor Sequential::forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const {
  cache.children.resize(layers_.size());
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, mode, rng, cache.children[i]);
  return h;
}

Tensor Sequential::backward(const Cache& cache, const Tensor& g, std::span<Tensor> grads) const {
  if (cache.children.size() != layers_.size()) throw ConfigError("Sequential backward: stale cache");
  std::vector<std::size_t> offsets{0};
  for (const auto& l : layers_) offsets.push_back(offsets.back() + l->parameters().size());
  Tensor d = g;
  for (std::size_t i = layers_.size(); i-- > 0;)
    d = layers_[i]->backward(cache.children[i], d, grads.subspan(offsets[i], offsets[i + 1] - offsets[i]));
  return d;
}

std::vector<Tensor*> Sequential::parameters() {
  std::vector<Tensor*> ps;
  for (auto& l : layers_) {
    auto p = l->parameters();
    ps.insert(ps.end(), p.begin(), p.end());
  }
  return ps;
}

std::vector<std::string> Sequential::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (const auto& n : layers_[i]->parameter_names()) names.push_back(std::to_string(i) + "." + n);
  return names;
}

nlohmann::json Sequential::describe() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back(l->describe());
  return {{"kind", "Sequential"}, {"layers", layers}};
}

// Residual

Tensor Residual::forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const {
  cache.children.resize(1);
  Tensor y = inner_->forward(x, mode, rng, cache.children[0]);
  if (y.dims() != x.dims()) throw ConfigError("Residual: inner layer changed shape " + x.shape_string());
  y.flat() += x.flat();
  return y;
}

Tensor Residual::backward(const Cache& cache, const Tensor& g, std::span<Tensor> grads) const {
  Tensor d = inner_->backward(cache.children.at(0), g, grads);
  d.flat() += g.flat();
  return d;
}

nlohmann::json Residual::describe() const { return {{"kind", "Residual"}, {"inner", inner_->describe()}}; }

// Parallel

Parallel::Parallel(const Parallel& other) {
  for (const auto& b : other.branches_) branches_.push_back(b->clone());
}

Tensor Parallel::forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const {
  if (branches_.empty()) throw ConfigError("Parallel: no branches");
  cache.children.resize(branches_.size());
  std::vector<Tensor> outs;
  std::vector<double> widths;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    outs.push_back(branches_[i]->forward(x, mode, rng, cache.children[i]));
    if (outs.back().matrix().rows() != outs.front().matrix().rows())
      throw ConfigError("Parallel: branch outputs disagree in leading dimensions");
    widths.push_back(static_cast<double>(outs.back().last_dim()));
  }
  std::size_t width = 0;
  for (const Tensor& o : outs) width += o.last_dim();
  Tensor y(with_last(outs.front().dims(), width));
  Index col = 0;
  for (const Tensor& o : outs) {
    y.matrix().middleCols(col, o.matrix().cols()) = o.matrix();
    col += o.matrix().cols();
  }
  const std::size_t branches = widths.size();
  cache.tensors = {Tensor({branches}, std::move(widths))};
  return y;
}

Tensor Parallel::backward(const Cache& cache, const Tensor& g, std::span<Tensor> grads) const {
  const Tensor& widths = cache.tensors.at(0);
  Tensor d;
  Index col = 0;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const auto w = static_cast<std::size_t>(widths[i]);
    Tensor gi(with_last(g.dims(), w));
    gi.matrix() = g.matrix().middleCols(col, static_cast<Index>(w));
    col += static_cast<Index>(w);
    const std::size_t np = branches_[i]->parameters().size();
    Tensor di = branches_[i]->backward(cache.children.at(i), gi, grads.subspan(offset, np));
    offset += np;
    if (i == 0)
      d = std::move(di);
    else
      d.flat() += di.flat();
  }
  return d;
}

std::vector<Tensor*> Parallel::parameters() {
  std::vector<Tensor*> ps;
  for (auto& b : branches_) {
    auto p = b->parameters();
    ps.insert(ps.end(), p.begin(), p.end());
  }
  return ps;
}

std::vector<std::string> Parallel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < branches_.size(); ++i)
    for (const auto& n : branches_[i]->parameter_names()) names.push_back("branch" + std::to_string(i) + "." + n);
  return names;
}

nlohmann::json Parallel::describe() const {
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& b : branches_) bs.push_back(b->describe());
  return {{"kind", "Parallel"}, {"branches", bs}};
}

}  // namespace ramanmix::nn
