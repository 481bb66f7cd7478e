#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ramanmix/core/error.hpp"
#include "ramanmix/preprocess/baseline.hpp"
#include "ramanmix/preprocess/filters.hpp"
#include "ramanmix/preprocess/pipeline.hpp"

using namespace ramanmix;
using namespace ramanmix::preprocess;

namespace {

Eigen::VectorXd arctan_baseline(int b, double h) {
  Eigen::VectorXd v(b);
  for (int j = 1; j <= b; ++j) v(j - 1) = h * std::atan(std::numbers::pi * j / b);
  return v;
}

const double kCenters[] = {120.0, 310.0, 480.0, 650.0, 870.0};

Eigen::VectorXd peaks(int b) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(b);
  for (double c : kCenters)
    for (int j = 0; j < b; ++j) v(j) += 5.0 * std::exp(-0.5 * std::pow((j - c) / 3.0, 2));
  return v;
}

double offpeak_rmse(const Eigen::VectorXd& est, const Eigen::VectorXd& truth) {
  double sum = 0;
  int n = 0;
  for (int j = 0; j < est.size(); ++j) {
    bool near = false;
    for (double c : kCenters) near = near || std::abs(j - c) < 15.0;
    if (near) continue;
    sum += std::pow(est(j) - truth(j), 2);
    ++n;
  }
  return std::sqrt(sum / n);
}

// Dense reference: iterate (W + lambda D'D) z = W s with the AsLS weight rule.
Eigen::VectorXd dense_asls(const Eigen::VectorXd& s, double lambda, double p, int order, int iters) {
  const int b = static_cast<int>(s.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(b, b);
  for (int k = 0; k < order; ++k) {
    Eigen::MatrixXd next(d.rows() - 1, b);
    for (int r = 0; r < next.rows(); ++r) next.row(r) = d.row(r + 1) - d.row(r);
    d = next;
  }
  const Eigen::MatrixXd pen = lambda * d.transpose() * d;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(b), z;
  for (int it = 0; it < iters; ++it) {
    Eigen::MatrixXd a = pen;
    a.diagonal() += w;
    z = a.ldlt().solve(w.cwiseProduct(s));
    Eigen::VectorXd nw(b);
    for (int i = 0; i < b; ++i) nw(i) = s(i) > z(i) ? p : 1 - p;
    if (nw == w) break;
    w = nw;
  }
  return z;
}

}  // namespace

TEST(Asls, MatchesDenseSolver) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> noise(0.0, 0.05);
  Eigen::VectorXd s(80);
  for (int j = 0; j < 80; ++j) s(j) = 0.02 * j + std::sin(j / 9.0) + noise(gen) + (j == 40 ? 3.0 : 0.0);
  for (int order : {1, 2, 3}) {
    BaselineParams p{1e3, 0.05, order, 200, 1e-12};
    const auto r = asls_baseline(s, p);
    const auto ref = dense_asls(s, 1e3, 0.05, order, 200);
    EXPECT_LT((r.baseline - ref).cwiseAbs().maxCoeff(), 1e-8) << order;
    EXPECT_EQ(r.corrected, s - r.baseline);
  }
}

// Bias of the smoother at angular frequency w is about lambda w^4 / p, so with
// lambda = 1e6 and p = 0.01 "slowly varying" means w well under 1.5e-3 rad/band.
Eigen::VectorXd slow_wave() {
  Eigen::VectorXd s(1000);
  for (int j = 0; j < 1000; ++j) s(j) = 1.0 + 0.5 * std::sin(j / 1000.0);
  return s;
}

TEST(Asls, LinearInputExact) {
  const Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(400, 0.5, 3.0);
  for (int order : {2, 3}) {
    BaselineParams p;
    p.diff_order = order;
    // exact in arithmetic; condition number is about 16 lambda / p = 1.6e9
    EXPECT_LT(asls_baseline(s, p).corrected.cwiseAbs().maxCoeff(), 1.6e9 * 1e-16 * 3.0 * 10);
  }
}

TEST(Asls, SmoothInputReproduced) {
  const auto s = slow_wave();
  const auto r = asls_baseline(s, {});
  EXPECT_LT(r.corrected.cwiseAbs().maxCoeff(), 1e-3 * s.maxCoeff());
}

TEST(Asls, RecoversArctanBaseline) {
  const auto truth = arctan_baseline(1000, 2.0);
  const auto r = asls_baseline(truth + peaks(1000), {});
  EXPECT_LT(offpeak_rmse(r.baseline, truth), 0.05 * 2.0);
}

TEST(Asls, ZeroIsFixedPoint) {
  const auto r = asls_baseline(Eigen::VectorXd::Zero(50), {});
  EXPECT_EQ(r.baseline.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(r.corrected.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Asls, RejectsBadParams) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(20);
  EXPECT_THROW(asls_baseline(s, {-1.0}), ConfigError);
  EXPECT_THROW(asls_baseline(s, {1e3, 1.0}), ConfigError);
  EXPECT_THROW(asls_baseline(s, {1e3, 0.1, 4}), ConfigError);
  EXPECT_THROW(asls_baseline(s, {1e3, 0.1, 2, 0}), ConfigError);
  EXPECT_THROW(asls_baseline(Eigen::VectorXd::Ones(3), {}), NumericalError);
}

TEST(Aspls, SmoothInputReproduced) {
  const auto s = slow_wave();
  BaselineParams p{1e5, 0.01, 2, 100, 1e-3};
  const auto r = aspls_baseline(s, p);
  EXPECT_LT(r.corrected.cwiseAbs().maxCoeff(), 1e-3 * s.maxCoeff());
}

TEST(Aspls, RecoversArctanBaselineAndAgreesWithAsls) {
  const auto truth = arctan_baseline(1000, 2.0);
  const Eigen::VectorXd s = truth + peaks(1000);
  const auto a = aspls_baseline(s, {1e5, 0.01, 2, 100, 1e-3});
  EXPECT_LT(offpeak_rmse(a.baseline, truth), 0.05 * 2.0);
  const auto b = asls_baseline(s, {});
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1000);
  EXPECT_LT(offpeak_rmse(a.baseline - b.baseline, zero), 0.1 * 2.0);
}

TEST(Savgol, ReproducesCubic) {
  Eigen::VectorXd s(40);
  for (int j = 0; j < 40; ++j) {
    const double x = j / 10.0;
    s(j) = 0.3 * x * x * x - x * x + 2 * x - 4;
  }
  EXPECT_LT((savgol(s, 7, 3) - s).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Savgol, ConstantUnchanged) {
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(30, 2.5);
  EXPECT_LT((savgol(s, 7, 3) - s).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Savgol, ReducesNoise) {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> noise(0.0, 0.1);
  Eigen::VectorXd clean(500), s(500);
  for (int j = 0; j < 500; ++j) {
    clean(j) = std::sin(j / 25.0);
    s(j) = clean(j) + noise(gen);
  }
  EXPECT_LT((savgol(s, 7, 3) - clean).squaredNorm(), (s - clean).squaredNorm());
}

TEST(Savgol, ClassicCoefficients) {
  // 7-point cubic smoothing weights (-2, 3, 6, 7, 6, 3, -2) / 21
  Eigen::VectorXd s = Eigen::VectorXd::Zero(21);
  s(10) = 21.0;
  const auto out = savgol(s, 7, 3);
  const double w[] = {-2, 3, 6, 7, 6, 3, -2};
  for (int k = -3; k <= 3; ++k) EXPECT_NEAR(out(10 + k), w[3 - k], 1e-12);
}

TEST(Savgol, RejectsBadWindow) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(5);
  EXPECT_THROW(savgol(s, 7, 3), ConfigError);
  EXPECT_THROW(savgol(Eigen::VectorXd::Ones(20), 6, 3), ConfigError);
  EXPECT_THROW(savgol(Eigen::VectorXd::Ones(20), 5, 5), ConfigError);
}

TEST(Despike, SingleSpike) {
  Eigen::VectorXd s = Eigen::VectorXd::Ones(100);
  s(50) = 100.0;
  const auto out = despike(s, {});
  EXPECT_NEAR(out(50), 1.0, 1e-12);
  for (int j = 0; j < 100; ++j)
    if (j != 50) {
      EXPECT_EQ(out(j), s(j));
    }
}

TEST(Despike, SmoothUnchangedAndIdempotent) {
  Eigen::VectorXd s(200);
  for (int j = 0; j < 200; ++j) s(j) = std::sin(j / 15.0) + 0.001 * j;
  EXPECT_EQ(despike(s, {}), s);
  Eigen::VectorXd spiky = s;
  spiky(77) += 40.0;
  const auto once = despike(spiky, {});
  EXPECT_EQ(despike(once, {}), once);
}

TEST(Despike, AdjacentSpikesUseUnflaggedNeighbours) {
  Eigen::VectorXd s(100);
  for (int j = 0; j < 100; ++j) s(j) = 1.0 + 0.01 * j;
  s(40) = 80.0;
  s(41) = 90.0;
  const auto out = despike(s, {});
  EXPECT_LT(out(40), 2.0);
  EXPECT_LT(out(41), 2.0);
  EXPECT_GT(out(40), 1.3);
  EXPECT_GT(out(41), 1.3);
}

TEST(Despike, ModifiedZ) {
  // a ramp has constant differences, so every score is zero
  const auto z = modified_z_scores(Eigen::VectorXd::LinSpaced(6, 0, 5));
  EXPECT_EQ(z.size(), 6);
  EXPECT_EQ(z.cwiseAbs().maxCoeff(), 0.0);
  Eigen::VectorXd s(8);
  s << 0, 1, 3, 4, 6, 7, 9, 30;
  // per-band differences (band 0 repeats band 1): 1 1 2 1 2 1 2 21
  // median 1.5, absolute deviations .5 x7 and 19.5, MAD .5
  const auto y = modified_z_scores(s);
  EXPECT_NEAR(y(7), 0.6745 * 19.5 / 0.5, 1e-12);
  EXPECT_NEAR(y(0), -0.6745, 1e-12);
  EXPECT_NEAR(y(2), 0.6745, 1e-12);
}

TEST(Despike, RejectsBadParams) {
  EXPECT_THROW(despike(Eigen::VectorXd::Ones(10), {4, 8.0}), ConfigError);
  EXPECT_THROW(despike(Eigen::VectorXd::Ones(10), {3, 0.0}), ConfigError);
}

namespace {
SpectralDataset small_dataset() {
  SpectralDataset d;
  d.axis = SpectralAxis::band_indices(4);
  d.intensities.resize(2, 4);
  d.intensities << 1, 3, 2, 8, 0.5, 4, 6, 2;
  return d;
}
}  // namespace

TEST(Normalize, MinMax) {
  const auto d = small_dataset();
  const auto n = normalize(d, NormalizeMode::GlobalMinMax);
  EXPECT_EQ(n.intensities.minCoeff(), 0.0);
  EXPECT_EQ(n.intensities.maxCoeff(), 1.0);
  EXPECT_EQ(normalize(n, NormalizeMode::GlobalMinMax).intensities, n.intensities);
}

TEST(Normalize, VectorAndScaleInvariance) {
  auto d = small_dataset();
  const auto n = normalize(d, NormalizeMode::GlobalVector);
  EXPECT_EQ(n.intensities.maxCoeff(), 1.0);
  EXPECT_DOUBLE_EQ(n.intensities(0, 1) / n.intensities(1, 1), 3.0 / 4.0);
  d.intensities *= 7.5;
  EXPECT_LT((normalize(d, NormalizeMode::GlobalVector).intensities - n.intensities).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Normalize, DegenerateThrows) {
  SpectralDataset d;
  d.axis = SpectralAxis::band_indices(3);
  d.intensities = RowMatrix::Constant(2, 3, 1.0);
  EXPECT_THROW(normalize(d, NormalizeMode::GlobalMinMax), Error);
  d.intensities.setZero();
  EXPECT_THROW(normalize(d, NormalizeMode::GlobalVector), Error);
}

TEST(Pipeline, Presets) {
  const auto thp1 = thp1_preset();
  ASSERT_EQ(thp1.size(), 5u);
  EXPECT_EQ(std::get<CropStep>(thp1[0]).lo, 700.0);
  EXPECT_EQ(std::get<CropStep>(thp1[0]).hi, 1800.0);
  EXPECT_EQ(std::get<DespikeStep>(thp1[1]).params.kernel, 3);
  EXPECT_EQ(std::get<DespikeStep>(thp1[1]).params.z_threshold, 8.0);
  EXPECT_EQ(std::get<SavgolStep>(thp1[2]).window, 7);
  EXPECT_EQ(std::get<SavgolStep>(thp1[2]).degree, 3);
  const auto& asls = std::get<AslsStep>(thp1[3]).params;
  EXPECT_EQ(asls.lambda, 1e6);
  EXPECT_EQ(asls.p, 0.01);
  EXPECT_EQ(asls.diff_order, 2);
  EXPECT_EQ(asls.max_iter, 50);
  EXPECT_EQ(asls.tol, 1e-3);
  EXPECT_EQ(std::get<NormalizeStep>(thp1[4]).mode, NormalizeMode::GlobalMinMax);

  const auto sugar = preset("sugar");
  ASSERT_EQ(sugar.size(), 3u);
  EXPECT_EQ(std::get<CropStep>(sugar[0]).lo, 400.0);
  EXPECT_EQ(std::get<CropStep>(sugar[0]).hi, 1800.0);
  const auto& aspls = std::get<AsplsStep>(sugar[1]).params;
  EXPECT_EQ(aspls.lambda, 1e5);
  EXPECT_EQ(aspls.diff_order, 2);
  EXPECT_EQ(aspls.max_iter, 100);
  EXPECT_EQ(aspls.tol, 1e-3);
  EXPECT_EQ(std::get<NormalizeStep>(sugar[2]).mode, NormalizeMode::GlobalVector);
  EXPECT_THROW(preset("raman"), ConfigError);
}

TEST(Pipeline, EmptyIsIdentity) {
  const auto d = small_dataset();
  EXPECT_EQ(run_pipeline(d, {}).intensities, d.intensities);
}

TEST(Pipeline, RunsThp1OnSyntheticAxis) {
  SpectralDataset d;
  std::vector<double> axis(1200);
  for (int j = 0; j < 1200; ++j) axis[j] = 600.0 + j;
  d.axis = SpectralAxis(axis);
  d.intensities.resize(3, 1200);
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 1200; ++j) d.intensities(r, j) = 1 + r + std::exp(-0.5 * std::pow((j - 600.0) / 4, 2));
  d.intensities(1, 500) += 50;
  const auto out = run_pipeline(d, thp1_preset());
  EXPECT_EQ(out.bands(), 1100u);
  EXPECT_EQ(out.axis[0], 700.0);
  EXPECT_EQ(out.intensities.minCoeff(), 0.0);
  EXPECT_EQ(out.intensities.maxCoeff(), 1.0);
}

TEST(Pipeline, ErrorsCarryStepIndex) {
  const auto d = small_dataset();
  try {
    run_pipeline(d, {NormalizeStep{}, CropStep{100.0, 200.0}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(Pipeline, JsonRoundTrip) {
  const auto steps = thp1_preset();
  const auto back = steps_from_json(to_json(steps));
  EXPECT_EQ(to_json(back), to_json(steps));
  EXPECT_EQ(to_json(steps_from_json(nlohmann::json{{"preset", "sugar"}})), to_json(sugar_preset()));
  EXPECT_THROW(steps_from_json(nlohmann::json{{"steps", {{{"op", "wavelet"}}}}}), ConfigError);
}
