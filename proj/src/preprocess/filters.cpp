#include "ramanmix/preprocess/filters.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ramanmix/core/error.hpp"

namespace ramanmix::preprocess {

namespace {

// Rows of the returned matrix map window samples to the fitted polynomial
// evaluated at every window position.
Eigen::MatrixXd savgol_projection(int window, int degree) {
  const int half = window / 2;
  Eigen::MatrixXd v(window, degree + 1);
  for (int i = 0; i < window; ++i) {
    const double t = static_cast<double>(i - half);
    double p = 1.0;
    for (int k = 0; k <= degree; ++k, p *= t) v(i, k) = p;
  }
  // Hat matrix V (V'V)^-1 V' via QR for conditioning.
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(v).householderQ() *
                            Eigen::MatrixXd::Identity(window, degree + 1);
  return q * q.transpose();
}

double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    m = 0.5 * (m + lower);
  }
  return m;
}

}  // namespace

Eigen::VectorXd savgol(const Eigen::VectorXd& s, int window, int degree) {
  if (window < 1 || window % 2 == 0) throw ConfigError("savgol window must be odd and positive");
  if (degree < 0 || degree >= window) throw ConfigError("savgol degree must be in [0, window)");
  if (window > s.size()) {
    throw ConfigError("savgol window " + std::to_string(window) + " exceeds spectrum length " +
                      std::to_string(s.size()));
  }
  const Eigen::MatrixXd hat = savgol_projection(window, degree);
  const int half = window / 2;
  const Eigen::Index n = s.size();
  Eigen::VectorXd out(n);
  const Eigen::RowVectorXd center = hat.row(half);
  for (Eigen::Index i = half; i < n - half; ++i) out(i) = center.dot(s.segment(i - half, window));
  const Eigen::VectorXd head = hat * s.head(window);
  const Eigen::VectorXd tail = hat * s.tail(window);
  for (int i = 0; i < half; ++i) {
    out(i) = head(i);
    out(n - half + i) = tail(window - half + i);
  }
  return out;
}

void validate(const DespikeParams& params) {
  if (params.kernel < 3 || params.kernel % 2 == 0) throw ConfigError("despike kernel must be odd and >= 3");
  if (!(params.z_threshold > 0.0)) throw ConfigError("despike z_threshold must be > 0");
}

Eigen::VectorXd modified_z_scores(const Eigen::VectorXd& s) {
  const Eigen::Index n = s.size();
  if (n < 2) return Eigen::VectorXd::Zero(n);
  // d_i = s_i - s_{i-1}; band 0 reuses d_1.
  std::vector<double> diff(static_cast<std::size_t>(n));
  for (Eigen::Index i = 1; i < n; ++i) diff[static_cast<std::size_t>(i)] = s(i) - s(i - 1);
  diff[0] = diff[1];
  const double med = median(diff);
  std::vector<double> dev(diff.size());
  for (std::size_t i = 0; i < diff.size(); ++i) dev[i] = std::abs(diff[i] - med);
  const double mad = median(dev);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = diff[static_cast<std::size_t>(i)] - med;
    if (mad > 0.0) {
      z(i) = 0.6745 * d / mad;
    } else {
      // MAD = 0 (piecewise-flat input): any deviation from the median is infinitely unusual.
      z(i) = d == 0.0 ? 0.0 : std::copysign(INFINITY, d);
    }
  }
  return z;
}

Eigen::VectorXd despike(const Eigen::VectorXd& s, const DespikeParams& params) {
  validate(params);
  const Eigen::Index n = s.size();
  const Eigen::VectorXd z = modified_z_scores(s);
  std::vector<bool> flagged(static_cast<std::size_t>(n));
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    flagged[static_cast<std::size_t>(i)] = std::abs(z(i)) > params.z_threshold;
    count += flagged[static_cast<std::size_t>(i)];
  }
  if (count == 0) return s;
  if (count == n) throw NumericalError("despike flagged every band (degenerate input)");

  Eigen::VectorXd out = s;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!flagged[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index half = params.kernel / 2;; ++half) {
      double total = 0.0;
      int used = 0;
      for (Eigen::Index j = std::max<Eigen::Index>(0, i - half); j <= std::min(n - 1, i + half); ++j) {
        if (!flagged[static_cast<std::size_t>(j)]) {
          total += s(j);
          ++used;
        }
      }
      if (used > 0) {
        out(i) = total / used;
        break;
      }
    }
  }
  return out;
}

SpectralDataset normalize(const SpectralDataset& d, NormalizeMode mode) {
  SpectralDataset out = d;
  if (mode == NormalizeMode::GlobalVector) {
    const double scale = d.intensities.cwiseAbs().maxCoeff();
    if (!(scale > 0.0)) throw NumericalError("vector normalization of an all-zero dataset");
    out.intensities /= scale;
  } else {
    const double lo = d.intensities.minCoeff();
    const double hi = d.intensities.maxCoeff();
    if (!(hi > lo)) throw NumericalError("min-max normalization of a constant dataset");
    out.intensities = (d.intensities.array() - lo) / (hi - lo);
  }
  return out;
}

}  // namespace ramanmix::preprocess
