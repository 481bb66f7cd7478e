#include "ramanmix/unmix/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ramanmix/core/error.hpp"

namespace ramanmix::unmix {

namespace {

Eigen::VectorXd passive_lstsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const std::vector<bool>& passive) {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < passive.size(); ++j)
    if (passive[j]) cols.push_back(static_cast<Eigen::Index>(j));
  Eigen::VectorXd z = Eigen::VectorXd::Zero(a.cols());
  if (cols.empty()) return z;
  const Eigen::MatrixXd sub = a(Eigen::all, cols);
  const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(y);
  for (std::size_t k = 0; k < cols.size(); ++k) z(cols[k]) = sol(static_cast<Eigen::Index>(k));
  return z;
}

// Least squares on the passive set with sum(x) = 1: the last passive
// coordinate is 1 minus the others.
Eigen::VectorXd simplex_lstsq(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const std::vector<bool>& passive) {
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < passive.size(); ++j)
    if (passive[j]) cols.push_back(static_cast<Eigen::Index>(j));
  Eigen::VectorXd z = Eigen::VectorXd::Zero(a.cols());
  const Eigen::Index last = cols.back();
  cols.pop_back();
  if (cols.empty()) {
    z(last) = 1.0;
    return z;
  }
  const Eigen::MatrixXd sub = a(Eigen::all, cols).colwise() - a.col(last);
  const Eigen::VectorXd sol = sub.colPivHouseholderQr().solve(y - a.col(last));
  for (std::size_t k = 0; k < cols.size(); ++k) z(cols[k]) = sol(static_cast<Eigen::Index>(k));
  z(last) = 1.0 - sol.sum();
  return z;
}

}  // namespace

NnlsResult solve_nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const NnlsOptions& opts) {
  if (a.rows() != y.size()) throw ConfigError("nnls: matrix has " + std::to_string(a.rows()) +
                                              " rows but target has " + std::to_string(y.size()));
  const Eigen::Index n = a.cols();
  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const Eigen::VectorXd aty = a.transpose() * y;
  const double tol = opts.tol * (1.0 + (n > 0 ? aty.cwiseAbs().maxCoeff() : 0.0));
  const int cap = std::max(1, opts.max_iter_factor * static_cast<int>(n));

  Eigen::VectorXd w = aty;
  while (true) {
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best) {
        best = w(j);
        t = j;
      }
    }
    if (t < 0) break;
    if (++res.iterations > cap) {
      throw NumericalError("NNLS did not converge within " + std::to_string(cap) + " iterations");
    }
    passive[static_cast<std::size_t>(t)] = true;

    for (int inner = 0;; ++inner) {
      if (inner > 10 * (n + 1)) throw NumericalError("NNLS inner loop did not terminate");
      Eigen::VectorXd z = passive_lstsq(a, y, passive);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
      if (feasible) {
        res.x = z;
        break;
      }
      // Step toward z until the first passive coordinate hits zero.
      double step = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          const double denom = res.x(j) - z(j);
          if (denom > 0.0) step = std::min(step, res.x(j) / denom);
        }
      }
      res.x += step * (z - res.x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && res.x(j) <= 0.0) {
          passive[static_cast<std::size_t>(j)] = false;
          res.x(j) = 0.0;
        }
      }
    }
    for (Eigen::Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)]) res.x(j) = 0.0;
    w = a.transpose() * (y - a * res.x);
  }
  return res;
}

Eigen::VectorXd nnls(const EndmemberMatrix& m, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != m.bands())
    throw ConfigError("nnls: spectrum has " + std::to_string(x.size()) + " bands, endmembers have " +
                      std::to_string(m.bands()));
  return solve_nnls(m.signatures(), x).x;
}

NnlsResult solve_fcls(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const NnlsOptions& opts) {
  if (a.rows() != y.size()) throw ConfigError("fcls: matrix has " + std::to_string(a.rows()) +
                                              " rows but target has " + std::to_string(y.size()));
  const Eigen::Index n = a.cols();
  if (n < 1) throw ConfigError("fcls: no columns");
  NnlsResult res;
  res.x = Eigen::VectorXd::Zero(n);
  Eigen::Index start = 0;
  (a.colwise() - y).colwise().squaredNorm().minCoeff(&start);
  res.x(start) = 1.0;
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  passive[static_cast<std::size_t>(start)] = true;
  const double tol = opts.tol * (1.0 + (a.transpose() * y).cwiseAbs().maxCoeff());
  const int cap = std::max(1, opts.max_iter_factor * static_cast<int>(n));

  while (true) {
    // Multipliers of x_j >= 0 are g_j + mu with mu = -g on the passive set.
    const Eigen::VectorXd g = a.transpose() * (a * res.x - y);
    double mu = 0.0;
    int count = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) {
        mu -= g(j);
        ++count;
      }
    mu /= count;
    Eigen::Index t = -1;
    double best = -tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && g(j) + mu < best) {
        best = g(j) + mu;
        t = j;
      }
    }
    if (t < 0) break;
    if (++res.iterations > cap) {
      throw NumericalError("FCLS did not converge within " + std::to_string(cap) + " iterations");
    }
    passive[static_cast<std::size_t>(t)] = true;

    for (int inner = 0;; ++inner) {
      if (inner > 10 * (n + 1)) throw NumericalError("FCLS inner loop did not terminate");
      const Eigen::VectorXd z = simplex_lstsq(a, y, passive);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
      if (feasible) {
        res.x = z;
        break;
      }
      double step = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          const double denom = res.x(j) - z(j);
          if (denom > 0.0) step = std::min(step, res.x(j) / denom);
        }
      }
      res.x += step * (z - res.x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && res.x(j) <= 0.0) {
          passive[static_cast<std::size_t>(j)] = false;
          res.x(j) = 0.0;
        }
      }
      // both iterates sum to one, so this only removes rounding drift
      res.x /= res.x.sum();
    }
  }
  return res;
}

Eigen::VectorXd fcls(const EndmemberMatrix& m, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != m.bands())
    throw ConfigError("fcls: spectrum has " + std::to_string(x.size()) + " bands, endmembers have " +
                      std::to_string(m.bands()));
  return solve_fcls(m.signatures(), x).x;
}

AbundanceMatrix estimate_abundances(const EndmemberMatrix& m, const SpectralDataset& d, AbundanceMethod method) {
  if (d.bands() != m.bands()) {
    throw ConfigError("estimate_abundances: dataset has " + std::to_string(d.bands()) + " bands, endmembers have " +
                      std::to_string(m.bands()));
  }
  const Eigen::Index b = m.signatures().rows();
  const Eigen::Index n = m.signatures().cols();
  const bool full = method == AbundanceMethod::FCLS;

  // |M x - y|^2 = |R x - Q'y|^2 + const with M = QR (thin).
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.signatures());
  const Eigen::Index k = std::min(b, n);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(b, k);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd qty = q.transpose() * d.intensities.transpose();

  RowMatrix out(static_cast<Eigen::Index>(d.size()), n);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    try {
      out.row(i) = (full ? solve_fcls(r, qty.col(i)) : solve_nnls(r, qty.col(i))).x.transpose();
    } catch (const NumericalError& e) {
      throw NumericalError("pixel " + std::to_string(i) + ": " + e.what());
    }
  }
  return AbundanceMatrix(std::move(out), full);
}

}  // namespace ramanmix::unmix
