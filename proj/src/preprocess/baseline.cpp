#include "ramanmix/preprocess/baseline.hpp"

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "ramanmix/core/error.hpp"

namespace ramanmix::preprocess {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;

// D'D for the k-th order difference operator, a banded matrix with
// bandwidth k.
SparseMatrix difference_penalty(Eigen::Index n, int order) {
  // Coefficients of the k-th difference: (-1)^(k-i) C(k, i).
  std::vector<double> coef(static_cast<std::size_t>(order) + 1);
  for (int i = 0; i <= order; ++i) {
    double c = 1.0;
    for (int j = 0; j < i; ++j) c = c * (order - j) / (j + 1);
    coef[static_cast<std::size_t>(i)] = ((order - i) % 2 == 0 ? 1.0 : -1.0) * c;
  }
  SparseMatrix d(n - order, n);
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index r = 0; r < n - order; ++r)
    for (int i = 0; i <= order; ++i) triplets.emplace_back(r, r + i, coef[static_cast<std::size_t>(i)]);
  d.setFromTriplets(triplets.begin(), triplets.end());
  return SparseMatrix(d.transpose() * d);
}

double relative_difference(const Eigen::VectorXd& old_v, const Eigen::VectorXd& new_v) {
  const double denom = std::max(old_v.norm(), std::numeric_limits<double>::min());
  return (new_v - old_v).norm() / denom;
}

SparseMatrix with_diagonal(const SparseMatrix& a, const Eigen::VectorXd& diag) {
  SparseMatrix out = a;
  for (Eigen::Index i = 0; i < diag.size(); ++i) out.coeffRef(i, i) += diag(i);
  return out;
}

void check_input(const Eigen::VectorXd& s, const BaselineParams& params, bool asymmetric) {
  validate(params, asymmetric);
  if (s.size() < params.diff_order + 2) {
    throw NumericalError("spectrum of length " + std::to_string(s.size()) + " is too short for difference order " +
                         std::to_string(params.diff_order) + " (singular system)");
  }
  if (!s.allFinite()) throw NumericalError("baseline input contains non-finite values");
}

}  // namespace

void validate(const BaselineParams& params, bool asymmetric) {
  if (!(params.lambda > 0.0)) throw ConfigError("baseline lambda must be > 0");
  if (asymmetric && !(params.p > 0.0 && params.p < 1.0)) throw ConfigError("baseline p must be in (0, 1)");
  if (params.diff_order < 1 || params.diff_order > 3) throw ConfigError("baseline diff_order must be 1, 2 or 3");
  if (params.max_iter < 1) throw ConfigError("baseline max_iter must be >= 1");
  if (!(params.tol > 0.0)) throw ConfigError("baseline tol must be > 0");
  if (!(params.asymmetric_coef > 0.0)) throw ConfigError("baseline asymmetric_coef must be > 0");
}

BaselineResult asls_baseline(const Eigen::VectorXd& s, const BaselineParams& params) {
  check_input(s, params, true);
  const Eigen::Index n = s.size();
  const SparseMatrix penalty = params.lambda * difference_penalty(n, params.diff_order);
  Eigen::SimplicialLDLT<SparseMatrix> solver;
  solver.analyzePattern(with_diagonal(penalty, Eigen::VectorXd::Ones(n)));

  BaselineResult r;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (r.iterations = 1; r.iterations <= params.max_iter; ++r.iterations) {
    solver.factorize(with_diagonal(penalty, w));
    if (solver.info() != Eigen::Success) throw NumericalError("AsLS system is singular");
    r.baseline = solver.solve(w.cwiseProduct(s));
    Eigen::VectorXd next(n);
    for (Eigen::Index i = 0; i < n; ++i) next(i) = s(i) > r.baseline(i) ? params.p : 1.0 - params.p;
    const double change = relative_difference(w, next);
    w = std::move(next);
    if (change < params.tol) {
      r.converged = true;
      break;
    }
  }
  r.iterations = std::min(r.iterations, params.max_iter);
  r.corrected = s - r.baseline;
  return r;
}

BaselineResult aspls_baseline(const Eigen::VectorXd& s, const BaselineParams& params) {
  check_input(s, params, false);
  const Eigen::Index n = s.size();
  const SparseMatrix penalty = params.lambda * difference_penalty(n, params.diff_order);
  Eigen::SparseLU<SparseMatrix> solver;
  solver.analyzePattern(with_diagonal(penalty, Eigen::VectorXd::Ones(n)));

  BaselineResult r;
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd alpha = Eigen::VectorXd::Ones(n);
  for (r.iterations = 1; r.iterations <= params.max_iter; ++r.iterations) {
    const SparseMatrix lhs = with_diagonal(SparseMatrix(alpha.asDiagonal() * penalty), w);
    solver.factorize(lhs);
    if (solver.info() != Eigen::Success) throw NumericalError("ASPLS system is singular");
    r.baseline = solver.solve(w.cwiseProduct(s));
    const Eigen::VectorXd residual = s - r.baseline;

    double mean = 0.0;
    Eigen::Index negatives = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (residual(i) < 0.0) {
        mean += residual(i);
        ++negatives;
      }
    // Fewer than two points below the baseline leaves the weight law undefined;
    // the current baseline is final.
    if (negatives < 2) {
      r.converged = true;
      break;
    }
    mean /= static_cast<double>(negatives);
    double var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (residual(i) < 0.0) var += (residual(i) - mean) * (residual(i) - mean);
    const double sd = std::sqrt(var / static_cast<double>(negatives - 1));
    if (!(sd > 0.0)) {
      r.converged = true;
      break;
    }

    Eigen::VectorXd next(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = params.asymmetric_coef * (residual(i) - sd) / sd;
      next(i) = t > 0.0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
    }
    const double change = relative_difference(w, next);
    w = std::move(next);
    const double max_abs = residual.cwiseAbs().maxCoeff();
    alpha = residual.cwiseAbs() / max_abs;
    if (change < params.tol) {
      r.converged = true;
      break;
    }
  }
  r.iterations = std::min(r.iterations, params.max_iter);
  r.corrected = s - r.baseline;
  return r;
}

}  // namespace ramanmix::preprocess
