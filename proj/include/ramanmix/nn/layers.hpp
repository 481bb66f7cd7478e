#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ramanmix/core/rng.hpp"
#include "ramanmix/nn/tensor.hpp"

namespace ramanmix::nn {

enum class Mode { Train, Infer };

enum class LayerKind { Dense, Conv1D, MultiHeadAttention, LayerNorm, Dropout, Activation, Reshape, Composite };

std::string to_string(LayerKind k);

/// Whatever a forward pass must hand to the matching backward pass.
struct Cache {
  std::vector<Tensor> tensors;
  std::vector<Cache> children;
};

/// A differentiable layer. forward/backward are const so one parameter set
/// can serve concurrent inference; per-call state lives in the Cache.
///
/// backward() adds parameter gradients into `grads`, which is aligned with
/// parameters() and must be pre-sized (see zero_gradients()).
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const = 0;
  virtual Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const = 0;

  virtual std::vector<Tensor*> parameters() { return {}; }
  std::vector<const Tensor*> parameters() const;
  virtual std::vector<std::string> parameter_names() const { return {}; }
  /// Kind-specific settings for the model manifest.
  virtual nlohmann::json describe() const;
  virtual std::unique_ptr<Layer> clone() const = 0;

  std::size_t parameter_count() const;
};

/// Zero tensors shaped like the layer's parameters.
std::vector<Tensor> zero_gradients(const Layer& layer);

/// Glorot/Xavier uniform: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// y = x W + b over the last axis; W is in x out.
class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, Rng& rng);
  Dense(Tensor weight, Tensor bias);

  LayerKind kind() const override { return LayerKind::Dense; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  using Layer::parameters;
  std::vector<Tensor*> parameters() override { return {&weight_, &bias_}; }
  std::vector<std::string> parameter_names() const override { return {"weight", "bias"}; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

/// Length-preserving 1-D convolution with zero padding.
/// Input (batch, length, in_channels) -> (batch, length, filters).
/// Kernel layout (kernel_size, in_channels, filters).
class Conv1D final : public Layer {
 public:
  Conv1D(std::size_t in_channels, std::size_t filters, std::size_t kernel_size, Rng& rng);
  Conv1D(Tensor kernel, Tensor bias);

  LayerKind kind() const override { return LayerKind::Conv1D; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  using Layer::parameters;
  std::vector<Tensor*> parameters() override { return {&kernel_, &bias_}; }
  std::vector<std::string> parameter_names() const override { return {"kernel", "bias"}; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1D>(*this); }

 private:
  Tensor kernel_;
  Tensor bias_;
};

/// Scaled dot-product self-attention with `heads` heads of size `head_dim`.
/// Input and output (batch, tokens, model_dim). Attention weights are
/// recomputed in backward rather than cached (memory is O(tokens) per head).
class MultiHeadAttention final : public Layer {
 public:
  MultiHeadAttention(std::size_t model_dim, std::size_t heads, std::size_t head_dim, Rng& rng);

  LayerKind kind() const override { return LayerKind::MultiHeadAttention; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  using Layer::parameters;
  std::vector<Tensor*> parameters() override { return {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_, &wo_, &bo_}; }
  std::vector<std::string> parameter_names() const override {
    return {"query_weight", "query_bias", "key_weight", "key_bias",
            "value_weight", "value_bias", "output_weight", "output_bias"};
  }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MultiHeadAttention>(*this); }

 private:
  std::size_t model_dim_, heads_, head_dim_;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
};

/// Normalizes over the last axis, then scales by gamma and shifts by beta.
class LayerNorm final : public Layer {
 public:
  explicit LayerNorm(std::size_t features, double epsilon = 1e-5);

  LayerKind kind() const override { return LayerKind::LayerNorm; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  using Layer::parameters;
  std::vector<Tensor*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<std::string> parameter_names() const override { return {"gamma", "beta"}; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LayerNorm>(*this); }

 private:
  double epsilon_;
  Tensor gamma_;
  Tensor beta_;
};

/// Inverted dropout: Train mode zeroes each unit with probability `rate` and
/// scales survivors by 1 / (1 - rate); Infer mode is the identity.
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate);

  LayerKind kind() const override { return LayerKind::Dropout; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

  double rate() const { return rate_; }

 private:
  double rate_;
};

enum class ActivationKind { ReLU, LeakyReLU, Softmax, SoftRectTanh };

struct ActivationSpec {
  ActivationKind kind = ActivationKind::ReLU;
  /// LeakyReLU slope or SoftRectTanh sharpness gamma.
  double parameter = 0.0;

  static ActivationSpec relu() { return {ActivationKind::ReLU, 0.0}; }
  static ActivationSpec leaky_relu(double slope) { return {ActivationKind::LeakyReLU, slope}; }
  static ActivationSpec softmax() { return {ActivationKind::Softmax, 0.0}; }
  static ActivationSpec soft_rect_tanh(double gamma) { return {ActivationKind::SoftRectTanh, gamma}; }
};

std::string to_string(const ActivationSpec& a);

/// Element-wise activation; Softmax acts along the last axis.
Tensor activation(const ActivationSpec& spec, const Tensor& x);

/// (1/gamma) log(1 + exp(gamma tanh x)); maps R into (0, log(1 + e^gamma) / gamma).
double soft_rect_tanh(double x, double gamma);

class Activation final : public Layer {
 public:
  explicit Activation(ActivationSpec spec) : spec_(spec) {}

  LayerKind kind() const override { return LayerKind::Activation; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Activation>(*this); }

  const ActivationSpec& spec() const { return spec_; }

 private:
  ActivationSpec spec_;
};

/// Reinterprets trailing dimensions; the leading (batch) dimension is kept.
class Reshape final : public Layer {
 public:
  explicit Reshape(std::vector<std::size_t> trailing) : trailing_(std::move(trailing)) {}

  LayerKind kind() const override { return LayerKind::Reshape; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }

 private:
  std::vector<std::size_t> trailing_;
};

/// Chain of layers; parameters are the concatenation of the children's.
class Sequential : public Layer {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) = default;
  Sequential& operator=(Sequential&&) = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto p = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *p;
    layers_.push_back(std::move(p));
    return ref;
  }

  LayerKind kind() const override { return LayerKind::Composite; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  using Layer::parameters;
  std::vector<Tensor*> parameters() override;
  std::vector<std::string> parameter_names() const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sequential>(*this); }

  std::size_t size() const { return layers_.size(); }
  const Layer& at(std::size_t i) const { return *layers_.at(i); }
  Layer& at(std::size_t i) { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// x + inner(x); inner must preserve shape.
class Residual final : public Layer {
 public:
  explicit Residual(std::unique_ptr<Layer> inner) : inner_(std::move(inner)) {}
  Residual(const Residual& other) : inner_(other.inner_->clone()) {}

  LayerKind kind() const override { return LayerKind::Composite; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  using Layer::parameters;
  std::vector<Tensor*> parameters() override { return inner_->parameters(); }
  std::vector<std::string> parameter_names() const override { return inner_->parameter_names(); }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Residual>(*this); }

 private:
  std::unique_ptr<Layer> inner_;
};

/// Runs branches on the same input and concatenates their outputs along the
/// last axis.
class Parallel final : public Layer {
 public:
  Parallel() = default;
  Parallel(const Parallel& other);

  void add(std::unique_ptr<Layer> branch) { branches_.push_back(std::move(branch)); }

  LayerKind kind() const override { return LayerKind::Composite; }
  Tensor forward(const Tensor& x, Mode mode, Rng& rng, Cache& cache) const override;
  Tensor backward(const Cache& cache, const Tensor& grad_out, std::span<Tensor> grads) const override;
  using Layer::parameters;
  std::vector<Tensor*> parameters() override;
  std::vector<std::string> parameter_names() const override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Parallel>(*this); }

 private:
  std::vector<std::unique_ptr<Layer>> branches_;
};

/// max(0, t) element-wise.
Tensor clip_nonnegative(const Tensor& t);
void clip_nonnegative_inplace(Tensor& t);

}  // namespace ramanmix::nn
