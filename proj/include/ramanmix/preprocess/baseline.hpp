#pragma once

#include <Eigen/Dense>

namespace ramanmix::preprocess {

struct BaselineParams {
  double lambda = 1e6;
  /// Asymmetry weight; AsLS only.
  double p = 0.01;
  int diff_order = 2;
  int max_iter = 50;
  double tol = 1e-3;
  /// Steepness k of the ASPLS logistic weight 1 / (1 + exp(k (d - s) / s)).
  double asymmetric_coef = 0.5;
};

struct BaselineResult {
  Eigen::VectorXd baseline;
  Eigen::VectorXd corrected;
  int iterations = 0;
  bool converged = false;
};

void validate(const BaselineParams& params, bool asymmetric);

/// Asymmetric least squares (Eilers & Boelens): minimizes
/// sum w_i (s_i - z_i)^2 + lambda |D^k z|^2 with w_i = p above the baseline
/// and 1 - p below, re-weighting until the relative weight change < tol.
BaselineResult asls_baseline(const Eigen::VectorXd& s, const BaselineParams& params);

/// Adaptive smoothness penalized least squares (Zhang et al. 2020): solves
/// (W + lambda * diag(alpha) * D'D) z = W s where alpha_i = |d_i| / max|d|
/// and the weights are logistic in the residual d scaled by the standard
/// deviation of the negative residuals.
BaselineResult aspls_baseline(const Eigen::VectorXd& s, const BaselineParams& params);

}  // namespace ramanmix::preprocess
