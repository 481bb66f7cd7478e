#pragma once

#include <Eigen/Dense>

#include "ramanmix/core/dataset.hpp"

namespace ramanmix::unmix {

struct NnlsOptions {
  /// A coordinate enters the passive set only if its dual exceeds
  /// tol * (1 + |A'y|_inf).
  double tol = 1e-12;
  /// Outer-iteration cap as a multiple of the number of unknowns.
  int max_iter_factor = 3;
};

struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
};

/// Lawson-Hanson active-set solver for min |Ax - y|^2 subject to x >= 0.
/// Throws NumericalError if the iteration cap is hit.
NnlsResult solve_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const NnlsOptions& opts = {});

/// Lawson-Hanson active set for min |Ax - y|^2 subject to x >= 0 and
/// sum(x) = 1. Each passive-set solve eliminates one coordinate through the
/// equality and uses a column-pivoted QR. Starts from the closest column.
NnlsResult solve_fcls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const NnlsOptions& opts = {});

Eigen::VectorXd nnls(const EndmemberMatrix& m, const Eigen::VectorXd& x);
/// ANC + ASC.
Eigen::VectorXd fcls(const EndmemberMatrix& m, const Eigen::VectorXd& x);

enum class AbundanceMethod { NNLS, FCLS };

/// Per-spectrum NNLS or FCLS. The b x n problem is compressed once to its
/// n x n triangular factor, so each spectrum costs O(b n) plus an n x n solve.
AbundanceMatrix estimate_abundances(const EndmemberMatrix& m, const SpectralDataset& d, AbundanceMethod method);

}  // namespace ramanmix::unmix
