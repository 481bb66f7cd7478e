#include "ramanmix/ae/autoencoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ramanmix/core/error.hpp"
#include "ramanmix/nn/optimizer.hpp"
#include "ramanmix/nn/serialize.hpp"

namespace ramanmix::ae {

using nn::Tensor;
using Eigen::Index;

namespace {

constexpr std::size_t kHidden = 128;
constexpr double kLeakySlope = 0.02;
constexpr std::size_t kConvFilters = 16;
constexpr std::size_t kEmbed = 32;
constexpr std::size_t kHeads = 2;
constexpr std::size_t kHeadDim = 32;
constexpr std::size_t kFeedForward = 64;
constexpr double kDropout = 0.1;
constexpr double kCosineGuard = 1e-12;

void add_dense_head(nn::Sequential& s, std::size_t in, std::size_t m, Rng& rng) {
  s.emplace<nn::Dense>(in, kHidden, rng);
  s.emplace<nn::Activation>(nn::ActivationSpec::leaky_relu(kLeakySlope));
  s.emplace<nn::Dense>(kHidden, m, rng);
}

void add_conv_block(nn::Sequential& s, std::size_t b, Rng& rng) {
  s.emplace<nn::Reshape>(std::vector<std::size_t>{b, 1});
  auto par = std::make_unique<nn::Parallel>();
  for (std::size_t k : {3, 5}) {
    auto branch = std::make_unique<nn::Sequential>();
    branch->emplace<nn::Conv1D>(1, kConvFilters, k, rng);
    branch->emplace<nn::Activation>(nn::ActivationSpec::relu());
    par->add(std::move(branch));
  }
  s.add(std::move(par));
  // per-band merge of the 32 channels
  s.emplace<nn::Dense>(2 * kConvFilters, 1, rng);
  s.emplace<nn::Reshape>(std::vector<std::size_t>{b});
}

void add_transformer(nn::Sequential& s, std::size_t b, std::size_t m, Rng& rng) {
  s.emplace<nn::Reshape>(std::vector<std::size_t>{b, 1});
  s.emplace<nn::Dense>(1, kEmbed, rng);

  auto attn = std::make_unique<nn::Sequential>();
  attn->emplace<nn::MultiHeadAttention>(kEmbed, kHeads, kHeadDim, rng);
  attn->emplace<nn::Dropout>(kDropout);
  s.emplace<nn::Residual>(std::move(attn));
  s.emplace<nn::LayerNorm>(kEmbed);

  auto ff = std::make_unique<nn::Sequential>();
  ff->emplace<nn::Dense>(kEmbed, kFeedForward, rng);
  ff->emplace<nn::Activation>(nn::ActivationSpec::relu());
  ff->emplace<nn::Dense>(kFeedForward, kEmbed, rng);
  ff->emplace<nn::Dropout>(kDropout);
  s.emplace<nn::Residual>(std::move(ff));
  s.emplace<nn::LayerNorm>(kEmbed);

  s.emplace<nn::Reshape>(std::vector<std::size_t>{b * kEmbed});
  s.emplace<nn::Dense>(b * kEmbed, m, rng);
}

nn::ActivationSpec latent_activation(const ConstraintConfig& c) {
  return c.asc ? nn::ActivationSpec::softmax() : nn::ActivationSpec::soft_rect_tanh(c.gamma);
}

}  // namespace

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::Dense: return "dense";
    case EncoderKind::DeepDense: return "deep-dense";
    case EncoderKind::Convolutional: return "conv";
    case EncoderKind::Transformer: return "transformer";
    case EncoderKind::ConvTransformer: return "conv-transformer";
  }
  return "?";
}

std::string to_string(DecoderKind k) { return k == DecoderKind::Linear ? "linear" : "bilinear"; }

EncoderKind encoder_kind_from_string(const std::string& s) {
  for (auto k : {EncoderKind::Dense, EncoderKind::DeepDense, EncoderKind::Convolutional, EncoderKind::Transformer,
                 EncoderKind::ConvTransformer})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown encoder '" + s + "'");
}

DecoderKind decoder_kind_from_string(const std::string& s) {
  if (s == "linear") return DecoderKind::Linear;
  if (s == "bilinear") return DecoderKind::BilinearFan;
  throw ConfigError("unknown decoder '" + s + "'");
}

void validate(const EncoderSpec& e) {
  if (e.bands < 2) throw ConfigError("encoder: need at least 2 bands");
  if (e.latent < 1 || e.latent > e.bands) throw ConfigError("encoder: latent dimension must be in [1, bands]");
}

void validate(const EncoderSpec& e, const DecoderSpec& d, const ConstraintConfig& c) {
  validate(e);
  if (c.gamma <= 0 || !std::isfinite(c.gamma)) throw ConfigError("constraints: gamma must be positive");
  if (d.fixed_endmembers) {
    if (d.fixed_endmembers->bands() != e.bands || d.fixed_endmembers->count() != e.latent)
      throw ConfigError("decoder: fixed endmembers must be " + std::to_string(e.bands) + " x " +
                        std::to_string(e.latent));
  }
}

nn::Sequential build_encoder(const EncoderSpec& spec, Rng& rng) {
  validate(spec);
  const std::size_t b = spec.bands, m = spec.latent;
  nn::Sequential s;
  switch (spec.kind) {
    case EncoderKind::Dense:
      add_dense_head(s, b, m, rng);
      break;
    case EncoderKind::DeepDense: {
      std::size_t in = b;
      for (std::size_t width : {512, 256, 128, 64, 32}) {
        s.emplace<nn::Dense>(in, width, rng);
        s.emplace<nn::Activation>(nn::ActivationSpec::leaky_relu(kLeakySlope));
        in = width;
      }
      s.emplace<nn::Dense>(in, m, rng);
      break;
    }
    case EncoderKind::Convolutional:
      add_conv_block(s, b, rng);
      add_dense_head(s, b, m, rng);
      break;
    case EncoderKind::Transformer:
      add_transformer(s, b, m, rng);
      break;
    case EncoderKind::ConvTransformer:
      add_conv_block(s, b, rng);
      add_transformer(s, b, m, rng);
      break;
  }
  return s;
}

std::vector<Tensor*> AEModel::trainable_parameters() {
  auto ps = encoder.parameters();
  if (decoder_trainable()) ps.push_back(&decoder_weight);
  return ps;
}

std::vector<std::string> AEModel::trainable_names() const {
  auto names = encoder.parameter_names();
  for (auto& n : names) n = "encoder." + n;
  if (decoder_trainable()) names.push_back("decoder.weight");
  return names;
}

std::size_t AEModel::parameter_count() const { return encoder.parameter_count() + decoder_weight.size(); }

AEModel build_model(const EncoderSpec& enc, const DecoderSpec& dec, const ConstraintConfig& cons, Rng& rng) {
  validate(enc, dec, cons);
  AEModel model;
  model.encoder_spec = enc;
  model.decoder_spec = dec;
  model.constraints = cons;
  model.encoder = build_encoder(enc, rng);
  model.encoder.emplace<nn::Activation>(latent_activation(cons));
  model.decoder_weight = Tensor({enc.bands, enc.latent});
  if (dec.fixed_endmembers) {
    model.decoder_weight.matrix() = dec.fixed_endmembers->signatures();
    model.axis = dec.fixed_endmembers->axis();
  } else {
    // U(0, a) with the Glorot limit a of a b x m layer
    const double a = std::sqrt(6.0 / static_cast<double>(enc.bands + enc.latent));
    for (double& w : model.decoder_weight.values()) w = rng.uniform(0.0, a);
    nn::clip_nonnegative_inplace(model.decoder_weight);
    model.axis = SpectralAxis::band_indices(enc.bands);
  }
  return model;
}

// Decoder. With U = Z W', the bilinear reconstruction is
// U + U.*U - (Z.*Z)(W.*W)', i.e. every ordered pair k != l of z_k w_k .* z_l w_l.

Tensor decode_batch(const Tensor& weight, DecoderKind kind, const Tensor& z) {
  if (z.rank() != 2 || z.dim(1) != weight.dim(1))
    throw ConfigError("decoder: expected latent (batch, " + std::to_string(weight.dim(1)) + "), got " +
                      z.shape_string());
  const auto W = weight.matrix();
  const auto Z = z.matrix();
  Tensor out({z.dim(0), weight.dim(0)});
  auto X = out.matrix();
  X.noalias() = Z * W.transpose();
  // one column has no pairs
  if (kind == DecoderKind::BilinearFan && weight.dim(1) > 1) {
    const RowMatrix w2 = W.cwiseAbs2();
    const RowMatrix z2 = Z.cwiseAbs2();
    X.array() += X.array().square();
    X.noalias() -= z2 * w2.transpose();
  }
  return out;
}

Tensor decode_backward(const Tensor& weight, DecoderKind kind, const Tensor& z, const Tensor& grad_out,
                       Tensor* grad_weight) {
  const auto W = weight.matrix();
  const auto Z = z.matrix();
  const auto G = grad_out.matrix();
  if (G.rows() != Z.rows() || G.cols() != W.rows()) throw ConfigError("decoder backward: gradient shape mismatch");
  Tensor dz(z.dims());
  auto dZ = dz.matrix();
  if (kind == DecoderKind::Linear || W.cols() == 1) {
    dZ.noalias() = G * W;
    if (grad_weight) grad_weight->matrix().noalias() += G.transpose() * Z;
    return dz;
  }
  const RowMatrix U = Z * W.transpose();
  const RowMatrix dU = G.array() + 2.0 * U.array() * G.array();
  const RowMatrix w2 = W.cwiseAbs2();
  dZ.noalias() = dU * W;
  dZ.array() -= 2.0 * Z.array() * (G * w2).array();
  if (grad_weight) {
    auto dW = grad_weight->matrix();
    dW.noalias() += dU.transpose() * Z;
    const RowMatrix gz2 = G.transpose() * Z.cwiseAbs2();
    dW.array() -= 2.0 * W.array() * gz2.array();
  }
  return dz;
}

Eigen::VectorXd decode(const AEModel& model, const Eigen::VectorXd& z) {
  if (static_cast<std::size_t>(z.size()) != model.encoder_spec.latent)
    throw ConfigError("decode: latent vector has length " + std::to_string(z.size()) + ", model expects " +
                      std::to_string(model.encoder_spec.latent));
  Tensor zt({1, static_cast<std::size_t>(z.size())});
  zt.flat() = z;
  return decode_batch(model.decoder_weight, model.decoder_spec.kind, zt).flat();
}

// Losses

namespace {

struct SadTerms {
  double value;
  double cosine;
  double nx, nxh;
};

SadTerms sad_terms(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xhat) {
  if (x.size() != xhat.size()) throw ConfigError("SAD: length mismatch");
  const double nx = x.norm(), nxh = xhat.norm();
  if (nx == 0.0 || nxh == 0.0) throw NumericalError("SAD: zero-norm spectrum");
  const double c = std::clamp(x.dot(xhat) / (nx * nxh), -1.0 + kCosineGuard, 1.0 - kCosineGuard);
  return {std::acos(c), c, nx, nxh};
}

}  // namespace

double sad_loss(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xhat) {
  if (x.size() != xhat.size()) throw ConfigError("SAD: length mismatch");
  const double nx = x.norm(), nxh = xhat.norm();
  if (nx == 0.0 || nxh == 0.0) throw NumericalError("SAD: zero-norm spectrum");
  return std::acos(std::clamp(x.dot(xhat) / (nx * nxh), -1.0, 1.0));
}

double combined_loss(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& xhat,
                     double lambda) {
  if (lambda < 0) throw ConfigError("loss: lambda must be non-negative");
  return sad_loss(x, xhat) + lambda * (x - xhat).squaredNorm() / static_cast<double>(x.size());
}

namespace {

// Mean loss over rows and, if grad != nullptr, d(mean loss)/d(xhat).
double reconstruction_loss(const Tensor& x, const Tensor& xhat, const LossSpec& loss, Tensor* grad) {
  const auto X = x.matrix();
  const auto Xh = xhat.matrix();
  const double inv_batch = 1.0 / static_cast<double>(X.rows());
  const double bands = static_cast<double>(X.cols());
  double total = 0.0;
  for (Index r = 0; r < X.rows(); ++r) {
    const Eigen::VectorXd xr = X.row(r).transpose();
    const Eigen::VectorXd hr = Xh.row(r).transpose();
    const SadTerms t = sad_terms(xr, hr);
    total += t.value;
    if (loss.mse_weight > 0) total += loss.mse_weight * (xr - hr).squaredNorm() / bands;
    if (grad) {
      // d acos(c) / d xhat = -(x / (|x||xh|) - c xhat / |xh|^2) / sqrt(1 - c^2)
      const double k = -1.0 / std::sqrt(1.0 - t.cosine * t.cosine);
      Eigen::VectorXd g = k * (xr / (t.nx * t.nxh) - t.cosine * hr / (t.nxh * t.nxh));
      if (loss.mse_weight > 0) g += loss.mse_weight * 2.0 * (hr - xr) / bands;
      grad->matrix().row(r) = (inv_batch * g).transpose();
    }
  }
  return total * inv_batch;
}

void require_batch(const AEModel& model, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != model.encoder_spec.bands)
    throw ConfigError("autoencoder: expected batch (n, " + std::to_string(model.encoder_spec.bands) + "), got " +
                      x.shape_string());
}

}  // namespace

BatchLoss loss_and_gradients(const AEModel& model, const Tensor& x, const LossSpec& loss, nn::Mode mode, Rng& rng) {
  require_batch(model, x);
  nn::Cache cache;
  const Tensor z = model.encoder.forward(x, mode, rng, cache);
  const Tensor xhat = decode_batch(model.decoder_weight, model.decoder_spec.kind, z);
  Tensor g(xhat.dims());
  BatchLoss out;
  out.loss = reconstruction_loss(x, xhat, loss, &g);

  out.gradients = nn::zero_gradients(model.encoder);
  Tensor gw(model.decoder_weight.dims());
  const Tensor dz = decode_backward(model.decoder_weight, model.decoder_spec.kind, z, g,
                                    model.decoder_trainable() ? &gw : nullptr);
  model.encoder.backward(cache, dz, out.gradients);
  if (model.decoder_trainable()) out.gradients.push_back(std::move(gw));
  return out;
}

double batch_loss(const AEModel& model, const Tensor& x, const LossSpec& loss, nn::Mode mode, Rng& rng) {
  require_batch(model, x);
  nn::Cache cache;
  const Tensor z = model.encoder.forward(x, mode, rng, cache);
  return reconstruction_loss(x, decode_batch(model.decoder_weight, model.decoder_spec.kind, z), loss, nullptr);
}

// Training

void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!(c.lr > 0)) throw ConfigError("train: learning rate must be positive");
  if (c.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(c.loss.mse_weight >= 0)) throw ConfigError("train: lambda must be non-negative");
}

TrainResult train(AEModel& model, const SpectralDataset& d, const TrainConfig& cfg) {
  validate(cfg);
  require_valid(d);
  if (d.bands() != model.encoder_spec.bands)
    throw ConfigError("train: dataset has " + std::to_string(d.bands()) + " bands, model expects " +
                      std::to_string(model.encoder_spec.bands));
  for (Index r = 0; r < d.intensities.rows(); ++r)
    if (d.intensities.row(r).squaredNorm() == 0.0)
      throw NumericalError("train: spectrum " + std::to_string(r) + " is all zeros");
  if (model.decoder_trainable()) model.axis = d.axis;

  const auto start = std::chrono::steady_clock::now();
  Rng shuffle = Rng::stream(cfg.seed, "shuffle");
  Rng dropout = Rng::stream(cfg.seed, "dropout");
  auto params = model.trainable_parameters();
  nn::AdamState adam = nn::AdamState::for_parameters(params, cfg.lr);

  const std::size_t n = d.size(), b = d.bands();
  std::vector<std::size_t> order(n);
  TrainResult result;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    double epoch_total = 0.0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      Tensor x({hi - lo, b});
      auto X = x.matrix();
      for (std::size_t i = lo; i < hi; ++i) X.row(static_cast<Index>(i - lo)) = d.intensities.row(static_cast<Index>(order[i]));

      BatchLoss bl;
      try {
        bl = loss_and_gradients(model, x, cfg.loss, nn::Mode::Train, dropout);
      } catch (const NumericalError& e) {
        throw NumericalError("train: epoch " + std::to_string(epoch) + ", batch starting at shuffled position " +
                             std::to_string(lo) + ": " + e.what());
      }
      if (!std::isfinite(bl.loss))
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch starting at shuffled position " + std::to_string(lo));
      nn::adam_step(adam, params, bl.gradients);
      nn::clip_nonnegative_inplace(model.decoder_weight);
      ++result.steps;
      epoch_total += bl.loss * static_cast<double>(hi - lo);
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(n));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

EndmemberMatrix extract_endmembers(const AEModel& model) {
  if (model.decoder_spec.fixed_endmembers) return *model.decoder_spec.fixed_endmembers;
  const Eigen::MatrixXd w = model.decoder_weight.matrix();
  for (Index j = 0; j < w.cols(); ++j)
    if (w.col(j).maxCoeff() <= 0.0)
      throw NumericalError("decoder column " + std::to_string(j) + " collapsed to zero during training");
  return EndmemberMatrix(w, model.axis);
}

AbundanceMatrix predict_abundances(const AEModel& model, const SpectralDataset& d) {
  if (d.bands() != model.encoder_spec.bands) throw ConfigError("predict: band count mismatch");
  constexpr std::size_t chunk = 256;
  RowMatrix out(d.intensities.rows(), static_cast<Index>(model.encoder_spec.latent));
  Rng unused(0);
  for (std::size_t lo = 0; lo < d.size(); lo += chunk) {
    const std::size_t hi = std::min(d.size(), lo + chunk);
    Tensor x({hi - lo, d.bands()});
    x.matrix() = d.intensities.middleRows(static_cast<Index>(lo), static_cast<Index>(hi - lo));
    nn::Cache cache;
    out.middleRows(static_cast<Index>(lo), static_cast<Index>(hi - lo)) =
        model.encoder.forward(x, nn::Mode::Infer, unused, cache).matrix();
  }
  return AbundanceMatrix(std::move(out), model.constraints.asc);
}

// Persistence

nlohmann::json describe(const AEModel& model) {
  return {{"encoder", to_string(model.encoder_spec.kind)},
          {"bands", model.encoder_spec.bands},
          {"latent", model.encoder_spec.latent},
          {"decoder", to_string(model.decoder_spec.kind)},
          {"non_blind", !model.decoder_trainable()},
          {"asc", model.constraints.asc},
          {"gamma", model.constraints.gamma},
          {"parameter_count", model.parameter_count()},
          {"architecture", model.encoder.describe()}};
}

void save_model(const std::filesystem::path& path, const AEModel& model) {
  nlohmann::json manifest = describe(model);
  manifest["axis"] = model.axis.values();
  auto ps = model.encoder.parameters();
  ps.push_back(&model.decoder_weight);
  auto names = model.encoder.parameter_names();
  names.push_back("decoder.weight");
  nn::save_parameters(path, manifest, ps, names);
}

AEModel load_model(const std::filesystem::path& path) {
  nn::LoadedParameters loaded = nn::load_parameters(path);
  const auto& m = loaded.manifest;
  AEModel model;
  try {
    EncoderSpec enc{encoder_kind_from_string(m.at("encoder")), m.at("bands"), m.at("latent")};
    ConstraintConfig cons{m.at("asc"), m.at("gamma")};
    DecoderSpec dec{decoder_kind_from_string(m.at("decoder")), std::nullopt};
    Rng rng(0);
    model = build_model(enc, dec, cons, rng);
    model.axis = SpectralAxis(m.at("axis").get<std::vector<double>>());
    auto ps = model.encoder.parameters();
    ps.push_back(&model.decoder_weight);
    nn::assign_parameters(ps, loaded.tensors);
    if (m.at("non_blind").get<bool>())
      model.decoder_spec.fixed_endmembers = EndmemberMatrix(model.decoder_weight.matrix(), model.axis);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": bad model manifest: " + e.what());
  }
  return model;
}

}  // namespace ramanmix::ae
