#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "ramanmix/core/dataset.hpp"
#include "ramanmix/core/error.hpp"
#include "ramanmix/core/io.hpp"
#include "ramanmix/core/rng.hpp"

using namespace ramanmix;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ramanmix_core_test";
  fs::create_directories(dir);
  return dir / name;
}

SpectralDataset small_dataset(std::size_t n, std::size_t b, std::uint64_t seed = 1) {
  Rng rng(seed);
  SpectralDataset d;
  std::vector<double> axis(b);
  for (std::size_t j = 0; j < b; ++j) axis[j] = 400.0 + 1.5 * static_cast<double>(j);
  d.axis = SpectralAxis(axis);
  d.intensities = RowMatrix(n, b);
  for (Eigen::Index i = 0; i < d.intensities.size(); ++i) d.intensities.data()[i] = rng.normal();
  return d;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  os << s;
}

}  // namespace

TEST(Rng, SameKeySameStream) {
  Rng a = Rng::stream(42, "scene"), b = Rng::stream(42, "scene");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, TagsGiveDistinctStreams) {
  Rng a = Rng::stream(42, "scene"), b = Rng::stream(42, "artifacts");
  EXPECT_NE(a.key(), b.key());
  EXPECT_NE(a.next_u64(), b.next_u64());
}

TEST(Rng, OutputIsFunctionOfCounter) {
  Rng r(7);
  r.next_u64();
  r.next_u64();
  const std::uint64_t third = r.next_u64();
  EXPECT_EQ(third, splitmix64_mix(7 + 3 * 0x9E3779B97F4A7C15ULL));
}

TEST(Rng, UniformMoments) {
  Rng r(3);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 0.005);
  EXPECT_NEAR(s2 / n - 0.25, 1.0 / 12, 0.002);
}

TEST(Rng, UniformIntCoversClosedRange) {
  Rng r(5);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) {
    const auto v = r.uniform_int(5, 9);
    ASSERT_GE(v, 5);
    ASSERT_LE(v, 9);
    ++counts[static_cast<std::size_t>(v - 5)];
  }
  for (int c : counts) EXPECT_NEAR(c / 50000.0, 0.2, 0.01);
}

TEST(Rng, NormalAndExponentialMoments) {
  Rng r(11);
  const int n = 200000;
  double s = 0, s2 = 0, e = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    e += r.exponential();
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.01);
  EXPECT_NEAR(e / n, 1.0, 0.01);
}

TEST(Dataset, WellFormedHasNoViolations) {
  EXPECT_TRUE(validate_dataset(small_dataset(10, 100)).empty());
}

TEST(Dataset, NanNamesRowAndBand) {
  auto d = small_dataset(10, 100);
  d.intensities(3, 17) = std::nan("");
  const auto v = validate_dataset(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].where.find("row 3"), std::string::npos);
  EXPECT_NE(v[0].where.find("band 17"), std::string::npos);
}

TEST(Dataset, ShapeProductMismatch) {
  auto d = small_dataset(10, 20);
  d.shape = {3, 3};
  const auto v = validate_dataset(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].invariant, "shape product \xe2\x89\xa0 N");
}

TEST(Dataset, AxisMustIncrease) {
  EXPECT_THROW(SpectralAxis({1.0, 3.0, 2.0}), ConfigError);
  EXPECT_THROW(SpectralAxis({1.0}), ConfigError);
}

TEST(Dataset, EndmemberInvariants) {
  const auto axis = SpectralAxis::band_indices(3);
  Eigen::MatrixXd m(3, 2);
  m << 1, 0, 2, 1, 0, 0;
  EXPECT_NO_THROW(EndmemberMatrix(m, axis));
  m(0, 1) = -0.1;
  EXPECT_THROW(EndmemberMatrix(m, axis), ConfigError);
  m.col(1).setZero();
  EXPECT_THROW(EndmemberMatrix(m, axis), ConfigError);
}

TEST(Dataset, AbundanceAscCheck) {
  RowMatrix a(2, 2);
  a << 0.5, 0.5, 0.2, 0.7;
  EXPECT_THROW(AbundanceMatrix(a, true), ConfigError);
  EXPECT_NO_THROW(AbundanceMatrix(a, false));
  a(1, 0) = -0.2;
  EXPECT_THROW(AbundanceMatrix(a, false), ConfigError);
  EXPECT_NO_THROW(AbundanceMatrix(a, false, false));
}

TEST(Crop, KeepsBandsInRange) {
  SpectralDataset d;
  std::vector<double> axis;
  for (double w = 142.0; w <= 3684.8; w += 3.2) axis.push_back(w);
  d.axis = SpectralAxis(axis);
  d.intensities = RowMatrix::Ones(4, static_cast<Eigen::Index>(axis.size()));
  d.shape = {2, 2};
  const auto c = crop(d, 400, 1800);
  for (double w : c.axis.values()) {
    EXPECT_GE(w, 400.0);
    EXPECT_LE(w, 1800.0);
  }
  EXPECT_EQ(c.shape, d.shape);
  std::size_t expected = 0;
  for (double w : axis) expected += (w >= 400 && w <= 1800);
  EXPECT_EQ(c.bands(), expected);
  EXPECT_EQ(crop(c, 400, 1800).axis, c.axis);
}

TEST(Crop, IdentityAndEmpty) {
  const auto d = small_dataset(3, 30);
  const auto same = crop(d, d.axis.front(), d.axis.back());
  EXPECT_EQ(same.axis, d.axis);
  EXPECT_EQ(same.intensities, d.intensities);
  EXPECT_THROW(crop(d, 1e6, 2e6), ConfigError);
  EXPECT_THROW(crop(d, 500, 400), ConfigError);
}

TEST(Io, BinRoundTripIsBitExact) {
  auto d = small_dataset(5, 50);
  d.shape = {5, 1};
  const auto p = scratch("rt.bin");
  save_dataset(d, p);
  const auto back = load_dataset(p);
  EXPECT_EQ(back.axis, d.axis);
  EXPECT_EQ(back.intensities, d.intensities);
  EXPECT_EQ(back.shape, d.shape);
}

TEST(Io, CsvRoundTrip) {
  auto d = small_dataset(6, 40);
  d.shape = {2, 3};
  const auto p = scratch("rt.csv");
  save_dataset(d, p);
  const auto back = load_dataset(p);
  EXPECT_EQ(back.shape, d.shape);
  for (Eigen::Index i = 0; i < d.intensities.size(); ++i)
    EXPECT_NEAR(back.intensities.data()[i], d.intensities.data()[i], 1e-12 * std::abs(d.intensities.data()[i]));
}

TEST(Io, CsvDecreasingAxis) {
  const auto p = scratch("dec.csv");
  write_text(p, "3,2,1\n1,2,3\n");
  try {
    load_dataset(p);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("axis not strictly increasing"), std::string::npos);
  }
}

TEST(Io, CsvRaggedRowNamesLine) {
  const auto p = scratch("ragged.csv");
  write_text(p, "1,2,3\n1,2,3\n1,2\n");
  try {
    load_dataset(p);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Io, CsvNonNumericAndBadHeader) {
  const auto p = scratch("bad.csv");
  write_text(p, "1,2,3\n1,x,3\n");
  EXPECT_THROW(load_dataset(p), IoError);
  write_text(p, "a,b\n1,2\n");
  EXPECT_THROW(load_dataset(p), IoError);
}

TEST(Io, MissingFileAndBadMagic) {
  EXPECT_THROW(load_dataset(scratch("nope.bin")), IoError);
  const auto p = scratch("magic.bin");
  write_text(p, "XXXXgarbage");
  EXPECT_THROW(load_dataset(p), IoError);
  EXPECT_THROW(format_from_path("data.txt"), ConfigError);
}

TEST(Io, GroundTruthRoundTrip) {
  Eigen::MatrixXd m(4, 2);
  m << 1, 0, 2, 1, 0, 3, 1, 1;
  RowMatrix a(3, 2);
  a << 1, 0, 0.25, 0.75, 0.5, 0.5;
  GroundTruth gt{EndmemberMatrix(m, SpectralAxis::band_indices(4)), AbundanceMatrix(a, true),
                 MixtureModel::BilinearFan, {3, 1}};
  const auto p = scratch("gt.gt.bin");
  save_ground_truth(gt, p);
  const auto back = load_ground_truth(p);
  EXPECT_EQ(back.endmembers.signatures(), m);
  EXPECT_EQ(back.abundances.values(), a);
  EXPECT_TRUE(back.abundances.asc_enforced());
  EXPECT_EQ(back.mixture_model, MixtureModel::BilinearFan);
  EXPECT_EQ(back.shape, gt.shape);
}

TEST(Io, ResultCsvRoundTrip) {
  Eigen::MatrixXd m(3, 2);
  m << 1, 0.5, 2, 0, 0, 3;
  const EndmemberMatrix em(m, SpectralAxis({100, 200, 300}));
  save_endmembers_csv(em, scratch("em.csv"));
  const auto em2 = load_endmembers_csv(scratch("em.csv"));
  EXPECT_EQ(em2.signatures(), m);
  EXPECT_EQ(em2.axis(), em.axis());

  RowMatrix a(2, 2);
  a << 0.3, 0.7, 1, 0;
  save_abundances_csv(AbundanceMatrix(a, true), {2, 1}, scratch("ab.csv"));
  std::vector<std::size_t> shape;
  const auto a2 = load_abundances_csv(scratch("ab.csv"), &shape);
  EXPECT_EQ(a2.values(), a);
  EXPECT_TRUE(a2.asc_enforced());
  EXPECT_EQ(shape, (std::vector<std::size_t>{2, 1}));
}
