#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ramanmix/core/dataset.hpp"
#include "ramanmix/core/rng.hpp"

namespace ramanmix::unmix {

struct ExtractionResult {
  EndmemberMatrix endmembers;
  /// Selected pixels. Column j of `endmembers` is row indices[j] of the data,
  /// clipped at zero.
  std::vector<std::size_t> indices;
  std::map<std::string, double> meta;
};

/// Leading eigenpairs of the (optionally centered) second-moment matrix.
struct PrincipalAxes {
  Eigen::RowVectorXd mean;   ///< zero when not centered
  Eigen::MatrixXd axes;      ///< b x k, orthonormal columns
  Eigen::VectorXd variances; ///< descending, length k
  double total_variance = 0.0;
};

PrincipalAxes principal_axes(const RowMatrix& x, std::size_t k, bool center);

struct NfindrOptions {
  int max_sweeps = 3;
};

/// Simplex-volume maximization in the (n-1)-dimensional PCA subspace.
/// meta: sweeps, replacements, initial_log_volume, final_log_volume.
ExtractionResult nfindr(const SpectralDataset& d, std::size_t n, Rng& rng, const NfindrOptions& opts = {});

/// Log of the simplex volume spanned by the given rows of `reduced`
/// (N x (n-1)); -inf when degenerate.
double simplex_log_volume(const Eigen::MatrixXd& reduced, const std::vector<std::size_t>& indices);

/// Vertex component analysis (Nascimento & Bioucas-Dias 2005), including the
/// SNR-driven choice between projective and affine projection.
/// meta: snr_db, snr_threshold_db, projective (1/0).
ExtractionResult vca(const SpectralDataset& d, std::size_t n, Rng& rng);

struct PcaUnmixResult {
  EndmemberMatrix endmembers;  ///< max(0, mean + axis_j)
  AbundanceMatrix abundances;  ///< scores on the centered axes; non-physical
  PrincipalAxes pca;
  std::map<std::string, double> meta;
};

PcaUnmixResult pca_unmix(const SpectralDataset& d, std::size_t n);

/// mean + scores * axes', the rank-n PCA reconstruction.
RowMatrix pca_reconstruct(const PcaUnmixResult& r);

}  // namespace ramanmix::unmix
