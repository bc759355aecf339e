#pragma once

// Local refinement of a nonnegative factorization T ~ W W^T, W >= 0,
// started from the atoms of an extracted measure (columns sqrt(rho_i) b_i).

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace cpcheck {

struct RefineResult {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> atoms;
  double residual = 0.0;  // ||T - sum rho_i b_i b_i^T||_inf
  int iterations = 0;
};

namespace detail {

inline Eigen::VectorXd upper_residual(const Eigen::MatrixXd& t, const Eigen::MatrixXd& w) {
  const Eigen::Index n = t.rows();
  const Eigen::MatrixXd r = t - w * w.transpose();
  Eigen::VectorXd out(n * (n + 1) / 2);
  Eigen::Index p = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) out(p++) = r(i, j);
  return out;
}

}  // namespace detail

/// Gauss-Newton with minimum-norm steps on the entries of W that are not
/// pinned at zero; steps are clipped to the orthant and halved until the
/// residual decreases.
inline RefineResult refine_factorization(const Eigen::MatrixXd& target, const std::vector<double>& weights,
                                         const std::vector<Eigen::VectorXd>& atoms, int max_iter = 50,
                                         double tol = 1e-13) {
  const Eigen::Index n = target.rows();
  const auto r = static_cast<Eigen::Index>(atoms.size());
  Eigen::MatrixXd w(n, r);
  for (Eigen::Index j = 0; j < r; ++j)
    w.col(j) = std::sqrt(std::max(weights[static_cast<std::size_t>(j)], 0.0)) * atoms[static_cast<std::size_t>(j)];
  const double scale = std::max(1.0, target.cwiseAbs().maxCoeff());

  RefineResult out;
  Eigen::VectorXd res = detail::upper_residual(target, w);
  double cost = res.squaredNorm();
  for (out.iterations = 0; out.iterations < max_iter && res.cwiseAbs().maxCoeff() > tol * scale; ++out.iterations) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> free;
    for (Eigen::Index j = 0; j < r; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (w(i, j) > 0.0) free.emplace_back(i, j);
    if (free.empty()) break;
    // d(W W^T)_{ab} / dW_{ij} = delta_{ai} W_{bj} + delta_{bi} W_{aj}.
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(res.size(), static_cast<Eigen::Index>(free.size()));
    for (std::size_t f = 0; f < free.size(); ++f) {
      const auto [i, j] = free[f];
      Eigen::Index p = 0;
      for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a; b < n; ++b, ++p) {
          double d = 0.0;
          if (a == i) d += w(b, j);
          if (b == i) d += w(a, j);
          jac(p, static_cast<Eigen::Index>(f)) = d;
        }
    }
    const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(res);
    bool improved = false;
    for (double alpha = 1.0; alpha > 1e-6; alpha *= 0.5) {
      Eigen::MatrixXd trial = w;
      for (std::size_t f = 0; f < free.size(); ++f)
        trial(free[f].first, free[f].second) =
            std::max(0.0, trial(free[f].first, free[f].second) + alpha * step(static_cast<Eigen::Index>(f)));
      const Eigen::VectorXd tres = detail::upper_residual(target, trial);
      if (tres.squaredNorm() < cost) {
        w = trial;
        res = tres;
        cost = tres.squaredNorm();
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  for (Eigen::Index j = 0; j < r; ++j) {
    const double nrm = w.col(j).norm();
    if (nrm == 0.0) continue;
    out.weights.push_back(nrm * nrm);
    out.atoms.push_back(w.col(j) / nrm);
  }
  out.residual = res.cwiseAbs().maxCoeff();
  return out;
}

}  // namespace cpcheck
