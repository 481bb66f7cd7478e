#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ramanmix/core/dataset.hpp"

namespace ramanmix::eval {

/// Spectral angle in radians, in [0, pi]. Throws ConfigError on zero norm.
double sad(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);
/// 1 - Pearson correlation, in [0, 2]. Throws ConfigError on constant input.
double pcc_dist(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

enum class MseVariant {
  /// Mean of squared differences over every entry.
  Squared,
  /// Per pixel |a - a_hat|_2 / n, averaged over pixels (unsquared norm).
  LiteralNorm,
};

double abundance_mse(const RowMatrix& truth, const RowMatrix& estimate, MseVariant v = MseVariant::Squared);

/// Minimum-cost perfect assignment on a square matrix; result[i] is the column
/// given to row i. O(n^3).
std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost);

struct MatchAssignment {
  /// (truth index, estimate index), sorted by truth index.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> unmatched_estimates;
  double cost = 0.0;
};

/// Minimum total-cost injection between rows and columns of a rectangular
/// cost matrix (rows = truths).
MatchAssignment match_cost(const Eigen::MatrixXd& cost);
/// SAD cost between every truth and estimate column.
Eigen::MatrixXd sad_matrix(const EndmemberMatrix& truth, const EndmemberMatrix& estimate);
MatchAssignment match(const EndmemberMatrix& truth, const EndmemberMatrix& estimate);

struct PairDetail {
  std::size_t truth = 0;
  std::size_t estimate = 0;
  double sad = 0.0;
  double pcc = 0.0;
  double mse = 0.0;
};

struct MetricReport {
  double endmember_sad = 0.0;
  double abundance_mse = 0.0;
  double endmember_pcc = 0.0;
  std::vector<PairDetail> detail;
  std::vector<std::size_t> unmatched_estimates;
  double runtime = 0.0;
};

MetricReport evaluate(const EndmemberMatrix& endmembers, const AbundanceMatrix& abundances, const GroundTruth& gt,
                      MseVariant v = MseVariant::Squared);

}  // namespace ramanmix::eval
