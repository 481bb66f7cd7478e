#include "ramanmix/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ramanmix/core/error.hpp"

namespace ramanmix::eval {

using Eigen::Index;

double sad(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw ConfigError("sad: length mismatch");
  // Owned copies: vectorized reductions over a column block round according
  // to where the block starts, and results must not depend on column order.
  const Eigen::VectorXd x = a, y = b;
  const double na = x.norm(), nb = y.norm();
  if (na == 0.0 || nb == 0.0) throw ConfigError("sad: zero-norm vector");
  return std::acos(std::clamp(x.dot(y) / (na * nb), -1.0, 1.0));
}

double pcc_dist(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() != b.size()) throw ConfigError("pcc: length mismatch");
  const Eigen::ArrayXd x = a, y = b;
  const Eigen::ArrayXd da = x - x.mean();
  const Eigen::ArrayXd db = y - y.mean();
  const double sa = std::sqrt(da.square().sum()), sb = std::sqrt(db.square().sum());
  if (sa == 0.0 || sb == 0.0) throw ConfigError("pcc: constant vector");
  return 1.0 - std::clamp((da * db).sum() / (sa * sb), -1.0, 1.0);
}

double abundance_mse(const RowMatrix& truth, const RowMatrix& estimate, MseVariant v) {
  if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols())
    throw ConfigError("abundance_mse: shape mismatch");
  if (truth.size() == 0) throw ConfigError("abundance_mse: empty input");
  if (v == MseVariant::Squared) return (truth - estimate).squaredNorm() / static_cast<double>(truth.size());
  return (truth - estimate).rowwise().norm().mean() / static_cast<double>(truth.cols());
}

// Shortest augmenting path formulation with row/column potentials.
std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ConfigError("hungarian: cost matrix must be square");
  const auto n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Index>(i0 - 1), static_cast<Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

MatchAssignment match_cost(const Eigen::MatrixXd& cost) {
  if (cost.rows() == 0 || cost.cols() == 0) throw ConfigError("match: empty cost matrix");
  if (!cost.allFinite()) throw ConfigError("match: non-finite cost");
  const Index nt = cost.rows(), ne = cost.cols(), k = std::max(nt, ne);
  const double top = cost.maxCoeff();
  const double sentinel = 10.0 * (top > 0 ? top : 1.0);
  Eigen::MatrixXd square = Eigen::MatrixXd::Constant(k, k, sentinel);
  square.topLeftCorner(nt, ne) = cost;
  const auto assign = hungarian(square);

  MatchAssignment m;
  std::vector<bool> used(static_cast<std::size_t>(ne), false);
  for (Index i = 0; i < nt; ++i) {
    const auto j = static_cast<Index>(assign[static_cast<std::size_t>(i)]);
    if (j >= ne) continue;
    m.pairs.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    m.cost += cost(i, j);
    used[static_cast<std::size_t>(j)] = true;
  }
  for (std::size_t j = 0; j < used.size(); ++j)
    if (!used[j]) m.unmatched_estimates.push_back(j);
  return m;
}

Eigen::MatrixXd sad_matrix(const EndmemberMatrix& truth, const EndmemberMatrix& estimate) {
  if (truth.bands() != estimate.bands())
    throw ConfigError("match: truth has " + std::to_string(truth.bands()) + " bands, estimate " +
                      std::to_string(estimate.bands()));
  Eigen::MatrixXd c(truth.count(), estimate.count());
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j) c(i, j) = sad(truth.signatures().col(i), estimate.signatures().col(j));
  return c;
}

MatchAssignment match(const EndmemberMatrix& truth, const EndmemberMatrix& estimate) {
  return match_cost(sad_matrix(truth, estimate));
}

MetricReport evaluate(const EndmemberMatrix& endmembers, const AbundanceMatrix& abundances, const GroundTruth& gt,
                      MseVariant v) {
  if (abundances.size() != gt.abundances.size())
    throw ConfigError("evaluate: result has " + std::to_string(abundances.size()) + " pixels, ground truth " +
                      std::to_string(gt.abundances.size()));
  if (abundances.count() != endmembers.count())
    throw ConfigError("evaluate: endmember and abundance counts differ");
  const MatchAssignment m = match(gt.endmembers, endmembers);
  MetricReport r;
  r.unmatched_estimates = m.unmatched_estimates;
  const auto& A = gt.abundances.values();
  const auto& Ah = abundances.values();
  RowMatrix t(A.rows(), static_cast<Index>(m.pairs.size())), e(A.rows(), static_cast<Index>(m.pairs.size()));
  for (std::size_t k = 0; k < m.pairs.size(); ++k) {
    const auto [ti, ei] = m.pairs[k];
    PairDetail d;
    d.truth = ti;
    d.estimate = ei;
    d.sad = sad(gt.endmembers.signatures().col(static_cast<Index>(ti)), endmembers.signatures().col(static_cast<Index>(ei)));
    d.pcc = pcc_dist(gt.endmembers.signatures().col(static_cast<Index>(ti)),
                     endmembers.signatures().col(static_cast<Index>(ei)));
    d.mse = (A.col(static_cast<Index>(ti)) - Ah.col(static_cast<Index>(ei))).squaredNorm() / static_cast<double>(A.rows());
    t.col(static_cast<Index>(k)) = A.col(static_cast<Index>(ti));
    e.col(static_cast<Index>(k)) = Ah.col(static_cast<Index>(ei));
    r.endmember_sad += d.sad;
    r.endmember_pcc += d.pcc;
    r.detail.push_back(d);
  }
  const double np = static_cast<double>(m.pairs.size());
  r.endmember_sad /= np;
  r.endmember_pcc /= np;
  r.abundance_mse = abundance_mse(t, e, v);
  return r;
}

}  // namespace ramanmix::eval
