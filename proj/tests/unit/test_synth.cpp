#include <cmath>
#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "ramanmix/core/error.hpp"
#include "ramanmix/synth/generator.hpp"

using namespace ramanmix;
using namespace ramanmix::synth;

TEST(Peak, MaximumEqualsHeight) {
  const Peak p{3.7, 412.0, 0.8};
  EXPECT_DOUBLE_EQ(evaluate_peak(p, 412.0), 3.7);
  EXPECT_LT(evaluate_peak(p, 413.0), 3.7);
}

TEST(Peak, AreaMatchesClosedForm) {
  // Poisson summation: the band sum of a Gaussian with sigma >= 1 matches
  // its integral to better than exp(-2 pi^2 sigma^2).
  for (const Peak p : {Peak{2.0, 500.3, 1.0}, Peak{0.5, 250.7, 1.8}}) {
    double sum = 0;
    for (int j = 0; j < 1000; ++j) sum += evaluate_peak(p, j);
    EXPECT_NEAR(sum, p.height * p.width * std::sqrt(2 * std::numbers::pi), 1e-6);
  }
}

TEST(Peak, SamplingLaws) {
  Rng rng(9);
  for (int i = 0; i < 5000; ++i) {
    const Peak major = sample_peak(1000, false, rng);
    ASSERT_GE(major.center, 10.0);
    ASSERT_LE(major.center, 990.0);
    ASSERT_GE(major.width, 0.1);
    ASSERT_LE(major.width, 1.0);
    // h1 in [1, 6], h2 in [0.1, 1]
    ASSERT_GE(major.height, 0.1);
    ASSERT_LE(major.height, 6.0);
    const Peak minor = sample_peak(1000, true, rng);
    ASSERT_GE(minor.width, 0.2);
    ASSERT_LE(minor.width, 2.0);
    ASSERT_LE(minor.height, 1.0 / 3.0 + 1e-15);
  }
}

TEST(Endmembers, MajorPeakCountsUniformOnFiveToNine) {
  std::map<std::size_t, int> freq;
  const int draws = 1000;
  for (int s = 0; s < draws; ++s) {
    Rng rng = Rng::stream(static_cast<std::uint64_t>(s), "endmembers");
    Rng minor = Rng::stream(static_cast<std::uint64_t>(s), "minor_peaks");
    PeakRecord rec;
    generate_endmembers({1, 100, EndmemberStyle::Clean}, rng, minor, &rec);
    const auto c = rec.major[0].size();
    ASSERT_GE(c, 5u);
    ASSERT_LE(c, 9u);
    ++freq[c];
  }
  const double sd = std::sqrt(draws * 0.2 * 0.8);
  for (std::size_t c = 5; c <= 9; ++c) EXPECT_NEAR(freq[c], draws * 0.2, 5 * sd) << c;
}

TEST(Endmembers, NoisyAddsMinorPeaksOnTopOfClean) {
  Rng a = Rng::stream(4, "endmembers"), am = Rng::stream(4, "minor_peaks");
  Rng b = Rng::stream(4, "endmembers"), bm = Rng::stream(4, "minor_peaks");
  PeakRecord rec;
  const auto clean = generate_endmembers({3, 300, EndmemberStyle::Clean}, a, am);
  const auto noisy = generate_endmembers({3, 300, EndmemberStyle::Noisy}, b, bm, &rec);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_GE(rec.minor[i].size(), 50u);
    EXPECT_LE(rec.minor[i].size(), 99u);
  }
  EXPECT_TRUE(((noisy.signatures() - clean.signatures()).array() >= -1e-12).all());
  EXPECT_GT((noisy.signatures() - clean.signatures()).maxCoeff(), 0.0);
}

TEST(Scene, ChessboardPatches) {
  Rng rng(1);
  const auto a = generate_scene({SceneKind::Chessboard, 100, 100, 5, 20}, rng);
  ASSERT_EQ(a.size(), 10000u);
  for (Eigen::Index r = 0; r < 10000; ++r) {
    ASSERT_EQ(a.values().row(r).maxCoeff(), 1.0);
    ASSERT_EQ(a.values().row(r).sum(), 1.0);
  }
  for (int pr = 0; pr < 20; ++pr)
    for (int pc = 0; pc < 20; ++pc) {
      const auto first = a.values().row(pr * 5 * 100 + pc * 5);
      int same = 0;
      for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) same += a.values().row((pr * 5 + r) * 100 + pc * 5 + c) == first;
      EXPECT_EQ(same, 25);
    }
}

TEST(Scene, ChessboardRequiresDivisibility) {
  Rng rng(1);
  EXPECT_THROW(generate_scene({SceneKind::Chessboard, 30, 30, 5, 20}, rng), ConfigError);
  EXPECT_NO_THROW(generate_scene({SceneKind::Chessboard, 50, 50, 5, 10}, rng));
}

TEST(Scene, RowsOnSimplex) {
  for (SceneKind k : {SceneKind::Chessboard, SceneKind::Gaussian, SceneKind::Dirichlet}) {
    Rng rng(2);
    const auto a = generate_scene({k, 40, 40, 4, 20}, rng);
    EXPECT_TRUE(a.asc_enforced());
    for (Eigen::Index r = 0; r < a.values().rows(); ++r) {
      ASSERT_NEAR(a.values().row(r).sum(), 1.0, 1e-9);
      ASSERT_GE(a.values().row(r).minCoeff(), 0.0);
    }
  }
}

TEST(Scene, GaussianPeaksAlongDiagonal) {
  Rng rng(0);
  const auto a = generate_scene({SceneKind::Gaussian, 100, 100, 5, 20}, rng);
  for (int k = 0; k < 5; ++k) {
    const int p = 20 * k + 10;
    Eigen::Index arg;
    a.values().row(p * 100 + p).maxCoeff(&arg);
    EXPECT_EQ(arg, k);
  }
}

TEST(Scene, DirichletMeans) {
  Rng rng(3);
  const std::size_t n = 5;
  const auto a = generate_scene({SceneKind::Dirichlet, 100, 100, n, 20}, rng);
  // Dirichlet(1..1): Var(a_k) = (n - 1) / (n^2 (n + 1))
  const double nd = static_cast<double>(n);
  const double sd = std::sqrt((nd - 1) / (nd * nd * (nd + 1)) / 10000.0);
  for (Eigen::Index k = 0; k < 5; ++k) EXPECT_NEAR(a.values().col(k).mean(), 1.0 / nd, 3 * sd);
}

TEST(Mix, OneHotGivesColumn) {
  Rng rng(5);
  const auto m = generate_endmembers({3, 50, EndmemberStyle::Clean}, rng);
  RowMatrix a(3, 3);
  a.setIdentity();
  const auto d = mix(m, AbundanceMatrix(a, true), MixtureModel::Linear);
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(d.intensities.row(i).transpose(), m.signatures().col(i));
}

TEST(Mix, FanExample) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 1, 1, 0;
  RowMatrix a(1, 2);
  a << 0.5, 0.5;
  const EndmemberMatrix em(m, SpectralAxis::band_indices(2));
  const auto d = mix(em, AbundanceMatrix(a, true), MixtureModel::BilinearFan);
  EXPECT_DOUBLE_EQ(d.intensities(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(d.intensities(0, 1), 0.5);
}

TEST(Mix, FanWithOneEndmemberIsLinear) {
  Eigen::MatrixXd m(3, 1);
  m << 1, 2, 3;
  RowMatrix a(2, 1);
  a << 1, 1;
  const EndmemberMatrix em(m, SpectralAxis::band_indices(3));
  EXPECT_EQ(mix(em, AbundanceMatrix(a, true), MixtureModel::BilinearFan).intensities,
            mix(em, AbundanceMatrix(a, true), MixtureModel::Linear).intensities);
}

TEST(Mix, BilinearDominatesLinear) {
  Rng rng(6);
  const auto m = generate_endmembers({4, 80, EndmemberStyle::Noisy}, rng);
  const auto a = generate_scene({SceneKind::Dirichlet, 10, 10, 4, 20}, rng);
  const auto lin = mix(m, a, MixtureModel::Linear);
  const auto bil = mix(m, a, MixtureModel::BilinearFan);
  EXPECT_TRUE(((bil.intensities - lin.intensities).array() >= 0).all());
}

TEST(Artifacts, DisabledIsIdentity) {
  SpectralDataset d;
  d.axis = SpectralAxis::band_indices(30);
  d.intensities = RowMatrix::Constant(8, 30, 0.5);
  Rng rng(1);
  EXPECT_EQ(add_artifacts(d, {0.0, 0.0, 2.0, 0.0, 5.0}, rng).intensities, d.intensities);
}

TEST(Artifacts, BaselineFormula) {
  SpectralDataset d;
  d.axis = SpectralAxis::band_indices(1000);
  d.intensities = RowMatrix::Zero(1, 1000);
  Rng rng(1);
  const auto out = add_artifacts(d, {0.0, 1.0, 2.0, 0.0, 5.0}, rng);
  EXPECT_NEAR(out.intensities(0, 999), 2.0 * std::atan(std::numbers::pi), 1e-12);
  EXPECT_NEAR(out.intensities(0, 999), 2.52525, 1e-5);
  EXPECT_NEAR(out.intensities(0, 0), 2.0 * std::atan(std::numbers::pi / 1000), 1e-15);
}

TEST(Artifacts, SpikeOccupiesOneBandInRange) {
  SpectralDataset d;
  d.axis = SpectralAxis::band_indices(50);
  d.intensities = RowMatrix::Zero(2000, 50);
  Rng rng(8);
  const auto out = add_artifacts(d, {0.0, 0.0, 2.0, 1.0, 5.0}, rng);
  for (Eigen::Index r = 0; r < out.intensities.rows(); ++r) {
    const auto row = out.intensities.row(r);
    ASSERT_EQ((row.array() != 0).count(), 1);
    Eigen::Index band;
    const double s = row.maxCoeff(&band);
    // bands 2..b-2 in 1-based numbering
    ASSERT_GE(band, 1);
    ASSERT_LE(band, 47);
    ASSERT_GE(s, 3.75);
    ASSERT_LE(s, 6.25);
  }
}

TEST(Artifacts, IncidenceRates) {
  SpectralDataset d;
  d.axis = SpectralAxis::band_indices(20);
  d.intensities = RowMatrix::Zero(10000, 20);
  Rng rng(12);
  ArtifactRecord rec;
  add_artifacts(d, ArtifactConfig{}, rng, &rec);
  const double nb = std::count(rec.baseline.begin(), rec.baseline.end(), true);
  const double ns = std::count(rec.spike.begin(), rec.spike.end(), true);
  EXPECT_NEAR(nb / 1e4, 0.25, 3 * std::sqrt(0.25 * 0.75 / 1e4));
  EXPECT_NEAR(ns / 1e4, 0.10, 3 * std::sqrt(0.10 * 0.90 / 1e4));
}

TEST(Dataset, DefaultSize) {
  DatasetSpec spec;
  spec.seed = 77;
  const auto [d, gt] = generate_dataset(spec);
  EXPECT_EQ(d.size(), 10000u);
  EXPECT_EQ(d.bands(), 1000u);
  EXPECT_EQ(d.shape, (std::vector<std::size_t>{100, 100}));
  EXPECT_TRUE(validate_dataset(d).empty());
  // ideal Chessboard: every spectrum is one of the endmembers
  for (Eigen::Index r = 0; r < 10000; r += 97) {
    bool found = false;
    for (Eigen::Index j = 0; j < 5; ++j) found = found || d.intensities.row(r).transpose() == gt.endmembers.signatures().col(j);
    ASSERT_TRUE(found) << r;
  }
}

TEST(Dataset, DeterministicAndArtifactsLeaveTruthAlone) {
  DatasetSpec spec;
  spec.endmembers = {4, 200, EndmemberStyle::Noisy};
  spec.scene = {SceneKind::Dirichlet, 20, 20, 4, 20};
  spec.seed = 5;
  const auto a = generate_dataset(spec);
  const auto b = generate_dataset(spec);
  EXPECT_EQ(a.first.intensities, b.first.intensities);
  spec.artifacts = ArtifactConfig{};
  const auto c = generate_dataset(spec);
  EXPECT_EQ(c.second.endmembers.signatures(), a.second.endmembers.signatures());
  EXPECT_EQ(c.second.abundances.values(), a.second.abundances.values());
  EXPECT_NE(c.first.intensities, a.first.intensities);
}

TEST(Dataset, SceneCountMustMatch) {
  DatasetSpec spec;
  spec.scene.n = 4;
  EXPECT_THROW(generate_dataset(spec), ConfigError);
}
