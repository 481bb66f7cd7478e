#pragma once

#include <Eigen/Dense>

#include "ramanmix/core/dataset.hpp"

namespace ramanmix::preprocess {

/// Savitzky-Golay smoothing. The first and last window/2 bands are taken
/// from a polynomial fitted to the first (last) `window` samples.
Eigen::VectorXd savgol(const Eigen::VectorXd& s, int window, int degree);

struct DespikeParams {
  /// Window in bands (odd); replacements average the unflagged bands within it.
  int kernel = 3;
  double z_threshold = 8.0;
};

void validate(const DespikeParams& params);

/// Modified z-score of first differences, 0.6745 (d - median) / MAD.
Eigen::VectorXd modified_z_scores(const Eigen::VectorXd& s);

/// Whitaker-Hayes cosmic spike removal. Bands whose |modified z| exceeds the
/// threshold are replaced by the mean of unflagged bands inside the kernel;
/// if the kernel holds none, it is widened symmetrically until one appears.
/// Throws NumericalError when every band is flagged.
Eigen::VectorXd despike(const Eigen::VectorXd& s, const DespikeParams& params);

enum class NormalizeMode { GlobalVector, GlobalMinMax };

SpectralDataset normalize(const SpectralDataset& d, NormalizeMode mode);

}  // namespace ramanmix::preprocess
