#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ramanmix/core/dataset.hpp"
#include "ramanmix/core/rng.hpp"
#include "ramanmix/nn/layers.hpp"

namespace ramanmix::ae {

enum class EncoderKind { Dense, DeepDense, Convolutional, Transformer, ConvTransformer };
enum class DecoderKind { Linear, BilinearFan };

std::string to_string(EncoderKind k);
std::string to_string(DecoderKind k);
EncoderKind encoder_kind_from_string(const std::string& s);
DecoderKind decoder_kind_from_string(const std::string& s);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::Dense;
  std::size_t bands = 0;
  std::size_t latent = 0;
};

struct DecoderSpec {
  DecoderKind kind = DecoderKind::Linear;
  /// Non-blind mode: W is pinned to these signatures and never trained.
  std::optional<EndmemberMatrix> fixed_endmembers;
};

struct ConstraintConfig {
  /// Softmax latent (sum-to-one) when set, soft-rectified tanh otherwise.
  bool asc = true;
  double gamma = 10.0;
};

void validate(const EncoderSpec& e);
void validate(const EncoderSpec& e, const DecoderSpec& d, const ConstraintConfig& c);

struct AEModel {
  EncoderSpec encoder_spec;
  DecoderSpec decoder_spec;
  ConstraintConfig constraints;
  /// Ends with the latent activation, so its output is the abundance vector.
  nn::Sequential encoder;
  /// b x m, element-wise non-negative.
  nn::Tensor decoder_weight;
  SpectralAxis axis;

  bool decoder_trainable() const { return !decoder_spec.fixed_endmembers.has_value(); }
  std::vector<nn::Tensor*> trainable_parameters();
  std::vector<std::string> trainable_names() const;
  /// Encoder plus decoder weights, trainable or not.
  std::size_t parameter_count() const;
};

AEModel build_model(const EncoderSpec& enc, const DecoderSpec& dec, const ConstraintConfig& cons, Rng& rng);

/// Encoder layer stack without the latent activation.
nn::Sequential build_encoder(const EncoderSpec& spec, Rng& rng);

/// Reconstruction of one latent vector.
Eigen::VectorXd decode(const AEModel& model, const Eigen::VectorXd& z);

/// Batched decoder: z is (batch, m), result (batch, b).
nn::Tensor decode_batch(const nn::Tensor& weight, DecoderKind kind, const nn::Tensor& z);
/// Returns dL/dz and adds dL/dW into grad_weight (if non-null).
nn::Tensor decode_backward(const nn::Tensor& weight, DecoderKind kind, const nn::Tensor& z, const nn::Tensor& grad_out,
                           nn::Tensor* grad_weight);

/// Spectral angle in radians. Throws NumericalError on a zero-norm input.
double sad_loss(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xhat);
/// SAD + lambda * mean squared error.
double combined_loss(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xhat,
                     double lambda);

struct LossSpec {
  /// 0 gives pure SAD.
  double mse_weight = 0.0;
};

struct BatchLoss {
  double loss = 0.0;
  /// Aligned with AEModel::trainable_parameters().
  std::vector<nn::Tensor> gradients;
};

/// Mean per-spectrum loss over the batch x (batch, b) and its gradient.
BatchLoss loss_and_gradients(const AEModel& model, const nn::Tensor& x, const LossSpec& loss, nn::Mode mode, Rng& rng);
double batch_loss(const AEModel& model, const nn::Tensor& x, const LossSpec& loss, nn::Mode mode, Rng& rng);

struct TrainConfig {
  int epochs = 10;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  LossSpec loss;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& c);

struct TrainResult {
  /// Mean training loss per epoch.
  std::vector<double> epoch_loss;
  double seconds = 0.0;
  long steps = 0;
};

/// Mini-batch Adam. The decoder weight is clipped at zero after every step.
/// Throws NumericalError naming the batch if the loss turns non-finite.
TrainResult train(AEModel& model, const SpectralDataset& d, const TrainConfig& cfg);

/// Decoder columns. Throws NumericalError if one has collapsed to zero.
EndmemberMatrix extract_endmembers(const AEModel& model);
/// Encoder outputs in inference mode.
AbundanceMatrix predict_abundances(const AEModel& model, const SpectralDataset& d);

nlohmann::json describe(const AEModel& model);
void save_model(const std::filesystem::path& path, const AEModel& model);
AEModel load_model(const std::filesystem::path& path);

}  // namespace ramanmix::ae
