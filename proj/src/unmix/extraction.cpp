#include "ramanmix/unmix/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ramanmix/core/error.hpp"

namespace ramanmix::unmix {

namespace {

constexpr double kRankTol = 1e-10;

EndmemberMatrix rows_as_endmembers(const SpectralDataset& d, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(d.bands()), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j)
    m.col(static_cast<Eigen::Index>(j)) = d.intensities.row(static_cast<Eigen::Index>(idx[j])).transpose().cwiseMax(0.0);
  return EndmemberMatrix(std::move(m), d.axis);
}

void check_counts(const SpectralDataset& d, std::size_t n, const char* who) {
  if (n < 2) throw ConfigError(std::string(who) + ": need n >= 2 endmembers");
  if (d.size() < n) {
    throw ConfigError(std::string(who) + ": dataset has " + std::to_string(d.size()) + " spectra, fewer than n = " +
                      std::to_string(n));
  }
}

double log_factorial(std::size_t k) { return std::lgamma(static_cast<double>(k) + 1.0); }

// Cofactors of column `col` of the square matrix e: det(e with column col
// replaced by v) = cofactors . v. Well defined for singular e.
Eigen::VectorXd column_cofactors(const Eigen::MatrixXd& e, Eigen::Index col) {
  const Eigen::Index n = e.rows();
  Eigen::VectorXd c(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::MatrixXd minor(n - 1, n - 1);
    for (Eigen::Index i = 0, mi = 0; i < n; ++i) {
      if (i == r) continue;
      for (Eigen::Index j = 0, mj = 0; j < n; ++j) {
        if (j == col) continue;
        minor(mi, mj++) = e(i, j);
      }
      ++mi;
    }
    const double det = n == 1 ? 1.0 : minor.partialPivLu().determinant();
    c(r) = ((r + col) % 2 == 0 ? 1.0 : -1.0) * det;
  }
  return c;
}

}  // namespace

PrincipalAxes principal_axes(const RowMatrix& x, std::size_t k, bool center) {
  const auto b = x.cols();
  PrincipalAxes pa;
  pa.mean = center ? Eigen::RowVectorXd(x.colwise().mean()) : Eigen::RowVectorXd::Zero(b);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(b, b);
  if (center) {
    const RowMatrix xc = x.rowwise() - pa.mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
  } else {
    cov.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  }
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
  cov /= static_cast<double>(x.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const auto kk = static_cast<Eigen::Index>(std::min<std::size_t>(k, static_cast<std::size_t>(b)));
  pa.axes = eig.eigenvectors().rightCols(kk).rowwise().reverse();
  pa.variances = eig.eigenvalues().tail(kk).reverse().cwiseMax(0.0);
  pa.total_variance = eig.eigenvalues().cwiseMax(0.0).sum();
  // Fix the sign so the largest-magnitude loading is positive (deterministic output).
  for (Eigen::Index j = 0; j < pa.axes.cols(); ++j) {
    Eigen::Index arg;
    pa.axes.col(j).cwiseAbs().maxCoeff(&arg);
    if (pa.axes(arg, j) < 0.0) pa.axes.col(j) *= -1.0;
  }
  return pa;
}

double simplex_log_volume(const Eigen::MatrixXd& reduced, const std::vector<std::size_t>& indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Eigen::MatrixXd e(n, n);
  e.row(0).setOnes();
  for (Eigen::Index j = 0; j < n; ++j)
    e.block(1, j, n - 1, 1) = reduced.row(static_cast<Eigen::Index>(indices[static_cast<std::size_t>(j)])).transpose();
  const double det = std::abs(e.fullPivLu().determinant());
  return det > 0.0 ? std::log(det) - log_factorial(indices.size() - 1) : -std::numeric_limits<double>::infinity();
}

ExtractionResult nfindr(const SpectralDataset& d, std::size_t n, Rng& rng, const NfindrOptions& opts) {
  check_counts(d, n, "N-FINDR");
  const auto dims = n - 1;
  const PrincipalAxes pa = principal_axes(d.intensities, dims, true);
  if (pa.variances.size() < static_cast<Eigen::Index>(dims) ||
      pa.variances(static_cast<Eigen::Index>(dims) - 1) <= kRankTol * std::max(pa.variances(0), 1e-300)) {
    throw NumericalError("N-FINDR: data rank is below n - 1 = " + std::to_string(dims) + " (degenerate simplex)");
  }
  const Eigen::MatrixXd reduced = (d.intensities.rowwise() - pa.mean) * pa.axes;
  const auto npix = static_cast<Eigen::Index>(d.size());

  // Random distinct initial pixels (partial Fisher-Yates).
  std::vector<std::size_t> perm(d.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(d.size()) - 1));
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::size_t> idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));

  const auto ni = static_cast<Eigen::Index>(n);
  auto simplex_matrix = [&] {
    Eigen::MatrixXd e(ni, ni);
    e.row(0).setOnes();
    for (Eigen::Index j = 0; j < ni; ++j)
      e.block(1, j, ni - 1, 1) = reduced.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)])).transpose();
    return e;
  };

  ExtractionResult res;
  res.meta["initial_log_volume"] = simplex_log_volume(reduced, idx);
  double current = std::abs(simplex_matrix().fullPivLu().determinant());
  int sweeps = 0;
  int replacements = 0;
  for (; sweeps < opts.max_sweeps;) {
    ++sweeps;
    bool changed = false;
    for (Eigen::Index pos = 0; pos < ni; ++pos) {
      const Eigen::VectorXd cof = column_cofactors(simplex_matrix(), pos);
      // det with pixel p in column pos = cof(0) + cof.tail . reduced(p)
      const Eigen::VectorXd dets = (reduced * cof.tail(ni - 1)).array() + cof(0);
      Eigen::Index best;
      const double best_det = dets.cwiseAbs().maxCoeff(&best);
      if (best_det > current * (1.0 + 1e-12) && best_det > 0.0) {
        idx[static_cast<std::size_t>(pos)] = static_cast<std::size_t>(best);
        current = best_det;
        changed = true;
        ++replacements;
      }
    }
    if (!changed) break;
  }
  (void)npix;
  if (!(current > 0.0)) throw NumericalError("N-FINDR: could not find a non-degenerate simplex");
  res.meta["final_log_volume"] = simplex_log_volume(reduced, idx);
  res.meta["sweeps"] = sweeps;
  res.meta["replacements"] = replacements;
  res.indices = idx;
  res.endmembers = rows_as_endmembers(d, idx);
  return res;
}

ExtractionResult vca(const SpectralDataset& d, std::size_t n, Rng& rng) {
  check_counts(d, n, "VCA");
  const auto r = static_cast<Eigen::Index>(n);
  const auto npix = static_cast<Eigen::Index>(d.size());
  const auto bands = static_cast<double>(d.bands());
  const RowMatrix& y = d.intensities;  // N x L

  // SNR estimate from the centered rank-n projection.
  const PrincipalAxes centered = principal_axes(y, n, true);
  const RowMatrix x_p = (y.rowwise() - centered.mean) * centered.axes;  // N x n
  const double p_y = y.squaredNorm() / static_cast<double>(npix);
  const double p_x = x_p.squaredNorm() / static_cast<double>(npix) + centered.mean.squaredNorm();
  const double num = p_x - static_cast<double>(n) / bands * p_y;
  const double den = p_y - p_x;
  const double snr = den > 0.0 && num > 0.0 ? 10.0 * std::log10(num / den)
                                            : (den <= 0.0 ? std::numeric_limits<double>::infinity()
                                                          : -std::numeric_limits<double>::infinity());
  const double snr_threshold = 15.0 + 10.0 * std::log10(static_cast<double>(n));
  const bool projective = snr >= snr_threshold;

  // Rows of `proj` are the n-dimensional coordinates used for the search.
  RowMatrix proj(npix, r);
  if (!projective) {
    const auto dims = r - 1;
    if (centered.variances(dims - 1) <= kRankTol * std::max(centered.variances(0), 1e-300))
      throw NumericalError("VCA: data rank below the required subspace dimension");
    proj.leftCols(dims) = x_p.leftCols(dims);
    const double c = std::sqrt(x_p.leftCols(dims).rowwise().squaredNorm().maxCoeff());
    proj.col(dims).setConstant(c);
  } else {
    const PrincipalAxes raw = principal_axes(y, n, false);
    if (raw.variances(r - 1) <= kRankTol * std::max(raw.variances(0), 1e-300))
      throw NumericalError("VCA: data rank below the required subspace dimension");
    const RowMatrix xr = y * raw.axes;
    const Eigen::RowVectorXd u = xr.colwise().mean();
    const Eigen::VectorXd scale = xr * u.transpose();
    for (Eigen::Index i = 0; i < npix; ++i) {
      if (std::abs(scale(i)) < 1e-300) throw NumericalError("VCA: projective scaling hit a zero pixel");
      proj.row(i) = xr.row(i) / scale(i);
    }
  }

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(r, r);
  a(r - 1, 0) = 1.0;
  std::vector<std::size_t> idx(n);
  for (Eigen::Index i = 0; i < r; ++i) {
    Eigen::VectorXd w(r);
    for (Eigen::Index k = 0; k < r; ++k) w(k) = rng.uniform();
    const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
    Eigen::VectorXd f = w - a * (pinv * w);
    const double fn = f.norm();
    if (!(fn > 1e-14)) throw NumericalError("VCA: random direction collapsed onto the found subspace");
    f /= fn;
    const Eigen::VectorXd v = proj * f;
    Eigen::Index best;
    const double vmax = v.cwiseAbs().maxCoeff(&best);
    if (!(vmax > 0.0)) throw NumericalError("VCA: data rank below the required subspace dimension");
    idx[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    a.col(i) = proj.row(best).transpose();
  }

  ExtractionResult res;
  res.indices = idx;
  res.endmembers = rows_as_endmembers(d, idx);
  res.meta["snr_db"] = snr;
  res.meta["snr_threshold_db"] = snr_threshold;
  res.meta["projective"] = projective ? 1.0 : 0.0;
  return res;
}

PcaUnmixResult pca_unmix(const SpectralDataset& d, std::size_t n) {
  if (n < 1) throw ConfigError("PCA: need n >= 1");
  if (d.size() < n) throw ConfigError("PCA: dataset has fewer spectra than n");
  if (n > d.bands()) throw ConfigError("PCA: n exceeds the band count");
  PrincipalAxes pa = principal_axes(d.intensities, n, true);
  const double top = std::max(pa.variances(0), 1e-300);
  std::size_t centered_rank = 0;
  for (Eigen::Index j = 0; j < pa.variances.size(); ++j)
    if (pa.variances(j) > kRankTol * top) ++centered_rank;
  // Uncentered rank is at most centered rank + 1.
  if (centered_rank + 1 < n) {
    throw NumericalError("PCA: requested n = " + std::to_string(n) + " exceeds the data rank");
  }
  const RowMatrix scores = (d.intensities.rowwise() - pa.mean) * pa.axes;
  Eigen::MatrixXd em = (pa.axes.colwise() + pa.mean.transpose()).cwiseMax(0.0);
  for (Eigen::Index j = 0; j < em.cols(); ++j) {
    // An axis pointing entirely against the mean clips to zero; fall back to the clipped mean.
    if (!(em.col(j).maxCoeff() > 0.0)) em.col(j) = pa.mean.transpose().cwiseMax(0.0);
    if (!(em.col(j).maxCoeff() > 0.0)) em.col(j).setConstant(1.0);
  }
  PcaUnmixResult res{EndmemberMatrix(std::move(em), d.axis), AbundanceMatrix(scores, false, false), std::move(pa), {}};
  res.meta["non_physical"] = 1.0;
  res.meta["explained_variance"] = res.pca.variances.sum() / std::max(res.pca.total_variance, 1e-300);
  return res;
}

RowMatrix pca_reconstruct(const PcaUnmixResult& r) {
  RowMatrix x = r.abundances.values() * r.pca.axes.transpose();
  x.rowwise() += r.pca.mean;
  return x;
}

}  // namespace ramanmix::unmix
