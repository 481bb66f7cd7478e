#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gradcheck.hpp"
#include "ramanmix/core/error.hpp"
#include "ramanmix/nn/layers.hpp"
#include "ramanmix/nn/optimizer.hpp"
#include "ramanmix/nn/serialize.hpp"

using namespace ramanmix;
using namespace ramanmix::nn;
using ramanmix::testing::check_layer;
using ramanmix::testing::random_tensor;

namespace {

constexpr double kFdLimit = 1e-4;

void randomize(Layer& layer, std::uint64_t seed) {
  Rng rng(seed);
  for (Tensor* p : layer.parameters())
    for (double& v : p->values()) v = rng.normal(0.0, 0.5);
}

Tensor run(const Layer& layer, const Tensor& x, Mode mode = Mode::Infer, std::uint64_t seed = 1) {
  Rng rng(seed);
  Cache cache;
  return layer.forward(x, mode, rng, cache);
}

}  // namespace

TEST(Tensor, ShapeAndReshape) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.matrix().rows(), 2);
  EXPECT_EQ(t.reshaped({3, 2}).dims(), (std::vector<std::size_t>{3, 2}));
  EXPECT_THROW(t.reshaped({4, 2}), Error);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), Error);
  t[4] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Dense, IdentityWeights) {
  Tensor w({3, 3});
  w.matrix().setIdentity();
  const Dense d(w, Tensor({3}));
  Rng rng(1);
  const Tensor x = random_tensor({4, 3}, rng);
  EXPECT_EQ(run(d, x), x);
}

TEST(Dense, ScalarChainRule) {
  const Dense d(Tensor({1, 1}, std::vector<double>{2.0}), Tensor({1}, std::vector<double>{0.5}));
  Rng rng(1);
  Cache cache;
  const Tensor x({1, 1}, std::vector<double>{3.0});
  EXPECT_EQ(d.forward(x, Mode::Infer, rng, cache)[0], 6.5);
  auto grads = zero_gradients(d);
  const Tensor gx = d.backward(cache, Tensor({1, 1}, std::vector<double>{-0.7}), grads);
  EXPECT_DOUBLE_EQ(grads[0][0], 3.0 * -0.7);
  EXPECT_DOUBLE_EQ(grads[1][0], -0.7);
  EXPECT_DOUBLE_EQ(gx[0], 2.0 * -0.7);
}

TEST(Dense, ShapeMismatchThrows) {
  Rng rng(1);
  const Dense d(4, 2, rng);
  EXPECT_THROW(run(d, Tensor({3, 5})), ConfigError);
}

TEST(Dense, NonFiniteOutputThrows) {
  Rng rng(1);
  const Dense d(2, 2, rng);
  Tensor x({1, 2});
  x[0] = INFINITY;
  EXPECT_THROW(run(d, x), NumericalError);
}

TEST(Activation, LeakyRelu) {
  const Tensor y = activation(ActivationSpec::leaky_relu(0.02), Tensor({2}, std::vector<double>{-1.0, 3.0}));
  EXPECT_DOUBLE_EQ(y[0], -0.02);
  EXPECT_DOUBLE_EQ(y[1], 3.0);
  const Tensor r = activation(ActivationSpec::relu(), Tensor({2}, std::vector<double>{-1.0, 3.0}));
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 3.0);
}

TEST(Activation, Softmax) {
  const Tensor y = activation(ActivationSpec::softmax(), Tensor({1, 3}));
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(y[i], 1.0 / 3.0);
  Rng rng(2);
  const Tensor x = random_tensor({50, 7}, rng, 20.0);
  const Tensor s = activation(ActivationSpec::softmax(), x);
  for (Eigen::Index r = 0; r < 50; ++r) {
    EXPECT_NEAR(s.matrix().row(r).sum(), 1.0, 1e-12);
    EXPECT_GT(s.matrix().row(r).minCoeff(), 0.0);
    // oracle: exp(x_i) / sum exp(x_j) with the row maximum factored out
    const auto row = x.matrix().row(r);
    const Eigen::RowVectorXd e = (row.array() - row.maxCoeff()).exp();
    EXPECT_LT((s.matrix().row(r) - e / e.sum()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Activation, SoftRectTanhValues) {
  EXPECT_NEAR(soft_rect_tanh(0.0, 10.0), std::log(2.0) / 10.0, 1e-15);
  EXPECT_NEAR(soft_rect_tanh(0.0, 10.0), 0.069315, 1e-6);
  EXPECT_NEAR(soft_rect_tanh(50.0, 10.0), std::log1p(std::exp(10.0)) / 10.0, 1e-15);
  EXPECT_NEAR(soft_rect_tanh(50.0, 10.0), 1.0000045, 1e-7);
  EXPECT_NEAR(soft_rect_tanh(-50.0, 10.0), std::log1p(std::exp(-10.0)) / 10.0, 1e-18);
  EXPECT_NEAR(soft_rect_tanh(-50.0, 10.0), 4.54e-6, 1e-8);
  double prev = -1.0;
  for (double x = -8; x <= 8; x += 0.01) {
    const double v = soft_rect_tanh(x, 10.0);
    ASSERT_GT(v, 0.0);
    ASSERT_LT(v, 1.00001);
    ASSERT_GE(v, prev);
    prev = v;
  }
}

TEST(Activation, Gradients) {
  Rng rng(3);
  for (ActivationSpec spec : {ActivationSpec::relu(), ActivationSpec::leaky_relu(0.02), ActivationSpec::softmax(),
                              ActivationSpec::soft_rect_tanh(10.0), ActivationSpec::soft_rect_tanh(1.0)}) {
    Activation a(spec);
    const auto r = check_layer(a, random_tensor({4, 6}, rng), Mode::Train, 7);
    EXPECT_LT(r.max_rel_error, kFdLimit) << to_string(spec) << " " << r.worst;
  }
}

TEST(Conv1D, DeltaKernelIsIdentity) {
  Tensor k({3, 1, 1});
  k[1] = 1.0;
  const Conv1D c(k, Tensor({1}));
  Rng rng(1);
  const Tensor x = random_tensor({2, 9, 1}, rng);
  EXPECT_EQ(run(c, x), x);
}

TEST(Conv1D, MatchesDirectSum) {
  Rng rng(4);
  Conv1D c(2, 3, 5, rng);
  randomize(c, 9);
  const Tensor x = random_tensor({2, 8, 2}, rng);
  const Tensor y = run(c, x);
  const Tensor& k = *c.parameters()[0];
  const Tensor& b = *c.parameters()[1];
  // zero padding of 2 on each side, cross-correlation
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t t = 0; t < 8; ++t)
      for (std::size_t f = 0; f < 3; ++f) {
        double s = b[f];
        for (std::size_t j = 0; j < 5; ++j) {
          const long src = static_cast<long>(t + j) - 2;
          if (src < 0 || src >= 8) continue;
          for (std::size_t ci = 0; ci < 2; ++ci)
            s += k[(j * 2 + ci) * 3 + f] * x[(n * 8 + static_cast<std::size_t>(src)) * 2 + ci];
        }
        EXPECT_NEAR(y[(n * 8 + t) * 3 + f], s, 1e-12);
      }
}

TEST(Conv1D, Gradients) {
  Rng rng(5);
  for (std::size_t k : {1u, 3u, 5u}) {
    Conv1D c(3, 4, k, rng);
    randomize(c, k);
    const auto r = check_layer(c, random_tensor({2, 10, 3}, rng), Mode::Train, 11);
    EXPECT_LT(r.max_rel_error, kFdLimit) << k << " " << r.worst;
  }
}

TEST(Dense, Gradients) {
  Rng rng(6);
  Dense d(5, 3, rng);
  randomize(d, 1);
  for (const auto& dims : {std::vector<std::size_t>{4, 5}, std::vector<std::size_t>{2, 3, 5}}) {
    const auto r = check_layer(d, random_tensor(dims, rng), Mode::Train, 3);
    EXPECT_LT(r.max_rel_error, kFdLimit) << r.worst;
  }
}

TEST(Attention, MatchesDirectFormula) {
  Rng rng(7);
  MultiHeadAttention mha(4, 2, 3, rng);
  randomize(mha, 2);
  const Tensor x = random_tensor({2, 5, 4}, rng);
  const Tensor y = run(mha, x);
  const auto p = mha.parameters();
  const auto& wq = p[0]->matrix();
  const auto& wk = p[2]->matrix();
  const auto& wv = p[4]->matrix();
  const auto& wo = p[6]->matrix();
  for (std::size_t b = 0; b < 2; ++b) {
    const Eigen::MatrixXd xb = x.matrix().middleRows(static_cast<Eigen::Index>(b * 5), 5);
    Eigen::MatrixXd q = xb * wq, k = xb * wk, v = xb * wv;
    q.rowwise() += p[1]->flat().transpose();
    k.rowwise() += p[3]->flat().transpose();
    v.rowwise() += p[5]->flat().transpose();
    Eigen::MatrixXd concat(5, 6);
    for (int h = 0; h < 2; ++h) {
      Eigen::MatrixXd s = q.middleCols(3 * h, 3) * k.middleCols(3 * h, 3).transpose() / std::sqrt(3.0);
      for (int i = 0; i < 5; ++i) {
        double z = 0;
        for (int j = 0; j < 5; ++j) z += std::exp(s(i, j));
        for (int j = 0; j < 5; ++j) s(i, j) = std::exp(s(i, j)) / z;
      }
      concat.middleCols(3 * h, 3) = s * v.middleCols(3 * h, 3);
    }
    Eigen::MatrixXd out = concat * wo;
    out.rowwise() += p[7]->flat().transpose();
    EXPECT_LT((out - y.matrix().middleRows(static_cast<Eigen::Index>(b * 5), 5)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Attention, Gradients) {
  Rng rng(8);
  MultiHeadAttention mha(4, 2, 3, rng);
  randomize(mha, 3);
  const auto r = check_layer(mha, random_tensor({2, 5, 4}, rng), Mode::Train, 5);
  EXPECT_LT(r.max_rel_error, kFdLimit) << r.worst;
}

TEST(LayerNorm, MatchesDirectFormula) {
  LayerNorm ln(6);
  Rng rng(9);
  const Tensor x = random_tensor({3, 6}, rng, 4.0);
  const Tensor y = run(ln, x);
  for (Eigen::Index r = 0; r < 3; ++r) {
    const auto row = x.matrix().row(r);
    const double mean = row.mean();
    const double var = (row.array() - mean).square().mean();
    for (Eigen::Index c = 0; c < 6; ++c)
      EXPECT_NEAR(y.matrix()(r, c), (row(c) - mean) / std::sqrt(var + 1e-5), 1e-12);
  }
}

TEST(LayerNorm, Gradients) {
  Rng rng(10);
  LayerNorm ln(6);
  randomize(ln, 4);
  const auto r = check_layer(ln, random_tensor({2, 3, 6}, rng), Mode::Train, 5);
  EXPECT_LT(r.max_rel_error, kFdLimit) << r.worst;
}

TEST(Dropout, InferIsIdentity) {
  const Dropout d(0.1);
  Rng rng(1);
  const Tensor x = random_tensor({5, 5}, rng);
  Cache cache;
  EXPECT_EQ(d.forward(x, Mode::Infer, rng, cache), x);
  auto grads = zero_gradients(d);
  EXPECT_EQ(d.backward(cache, x, grads), x);
}

TEST(Dropout, TrainPreservesExpectation) {
  const Dropout d(0.1);
  const Tensor y = run(d, Tensor({200000}, 1.0), Mode::Train, 3);
  // survivors are 1/0.9, so Var = 0.1 / 0.9 per element
  EXPECT_NEAR(y.flat().mean(), 1.0, 5 * std::sqrt(0.1 / 0.9 / 200000));
  for (double v : y.values()) ASSERT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.9) < 1e-15);
  EXPECT_EQ(run(d, Tensor({100}, 1.0), Mode::Train, 3), run(d, Tensor({100}, 1.0), Mode::Train, 3));
}

TEST(Dropout, Gradients) {
  Dropout d(0.3);
  Rng rng(11);
  const auto r = check_layer(d, random_tensor({4, 8}, rng), Mode::Train, 13);
  EXPECT_LT(r.max_rel_error, kFdLimit) << r.worst;
}

TEST(Composite, GradientsThroughSequentialResidualParallel) {
  Rng rng(12);
  Sequential s;
  s.emplace<Reshape>(std::vector<std::size_t>{6, 1});
  auto par = std::make_unique<Parallel>();
  {
    auto a = std::make_unique<Sequential>();
    a->emplace<Conv1D>(1, 2, 3, rng);
    a->emplace<Activation>(ActivationSpec::relu());
    par->add(std::move(a));
    par->add(std::make_unique<Conv1D>(1, 3, 5, rng));
  }
  s.add(std::move(par));
  {
    auto inner = std::make_unique<Sequential>();
    inner->emplace<Dense>(5, 5, rng);
    inner->emplace<Activation>(ActivationSpec::leaky_relu(0.02));
    inner->emplace<Dropout>(0.2);
    s.emplace<Residual>(std::move(inner));
  }
  s.emplace<LayerNorm>(5);
  s.emplace<Reshape>(std::vector<std::size_t>{30});
  s.emplace<Dense>(30, 3, rng);
  s.emplace<Activation>(ActivationSpec::softmax());
  randomize(s, 6);
  const Tensor x = random_tensor({3, 6}, rng);
  EXPECT_EQ(run(s, x).dims(), (std::vector<std::size_t>{3, 3}));
  for (Mode mode : {Mode::Train, Mode::Infer}) {
    const auto r = check_layer(s, x, mode, 17);
    EXPECT_LT(r.max_rel_error, kFdLimit) << r.worst;
  }
  const auto clone = s.clone();
  EXPECT_EQ(run(*clone, x), run(s, x));
  EXPECT_EQ(clone->parameter_count(), s.parameter_count());
}

TEST(Clip, Examples) {
  Tensor t({3}, std::vector<double>{-1.0, 0.0, 2.0});
  const Tensor c = clip_nonnegative(t);
  EXPECT_EQ(c, Tensor({3}, std::vector<double>({0.0, 0.0, 2.0})));
  EXPECT_EQ(clip_nonnegative(c), c);
  const Tensor pos({2}, std::vector<double>{0.5, 3.0});
  EXPECT_EQ(clip_nonnegative(pos), pos);
  clip_nonnegative_inplace(t);
  EXPECT_EQ(t, c);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p({3}, std::vector<double>{1.0, -2.0, 0.5});
  const Tensor before = p;
  std::vector<Tensor*> params{&p};
  auto s = AdamState::for_parameters(params);
  const std::vector<Tensor> g{Tensor({3})};
  for (int i = 0; i < 5; ++i) adam_step(s, params, g);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.t, 5);
}

TEST(Adam, MatchesHandRecursion) {
  Tensor p({2}, std::vector<double>{0.0, 0.0});
  std::vector<Tensor*> params{&p};
  auto s = AdamState::for_parameters(params, 1e-3);
  const double g0 = 0.3, g1 = -4.0;
  const std::vector<Tensor> g{Tensor({2}, std::vector<double>{g0, g1})};
  adam_step(s, params, g);
  // first step: m_hat = g, v_hat = g^2
  EXPECT_NEAR(p[0], -1e-3 * g0 / (std::abs(g0) + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -1e-3 * g1 / (std::abs(g1) + 1e-8), 1e-15);
  const double first = std::abs(p[0]);
  adam_step(s, params, g);
  EXPECT_LE(std::abs(p[0]) - first, first + 1e-8);
  // explicit recursion for three steps on coordinate 1
  double m = 0, v = 0, x = 0;
  for (int t = 1; t <= 3; ++t) {
    m = 0.9 * m + 0.1 * g1;
    v = 0.999 * v + 0.001 * g1 * g1;
    x -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  adam_step(s, params, g);
  EXPECT_NEAR(p[1], x, 1e-15);
}

TEST(Adam, RejectsBadState) {
  Tensor p({2});
  std::vector<Tensor*> params{&p};
  auto s = AdamState::for_parameters(params);
  EXPECT_THROW(adam_step(s, params, std::vector<Tensor>{Tensor({3})}), Error);
  s.beta1 = 1.0;
  EXPECT_THROW(validate(s), ConfigError);
  s.beta1 = 0.9;
  s.lr = 0.0;
  EXPECT_THROW(validate(s), ConfigError);
}

TEST(Serialize, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "ramanmix_test_params.bin";
  Rng rng(1);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4}, rng);
  save_parameters(path, nlohmann::json{{"note", "x"}}, {&a, &b}, {"w", "b"});
  const auto loaded = load_parameters(path);
  EXPECT_EQ(loaded.manifest.at("note"), "x");
  ASSERT_EQ(loaded.tensors.size(), 2u);
  EXPECT_EQ(loaded.tensors[0], a);
  EXPECT_EQ(loaded.tensors[1], b);
  Tensor c({3, 4}), d({4});
  assign_parameters({&c, &d}, loaded.tensors);
  EXPECT_EQ(c, a);
  Tensor wrong({4, 3});
  EXPECT_THROW(assign_parameters({&wrong, &d}, loaded.tensors), Error);
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  EXPECT_THROW(load_parameters(path), IoError);
  std::filesystem::remove(path);
}
