#pragma once

// Atom extraction from a flat truncated moment sequence by multiplication
// matrices (Henrion-Lasserre), and an independent check of the result.

#include "cpcheck/moments.hpp"
#include "cpcheck/nnls.hpp"
#include "cpcheck/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpcheck {

class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AtomicMeasure {
  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> weights;
  double residual = 0.0;  // ||v - sum_i rho_i [b_i]_{2t}||_inf

  int size() const { return static_cast<int>(atoms.size()); }
};

struct ExtractionOptions {
  double atom_tol = 1e-6;
  double pivot_tol = 1e-8;
  double weight_floor = 1e-8;
  double residual_tol = 1e-5;  // relative to max(1, ||v|_{2t}||_inf)
};

namespace detail {

/// Clips coordinates in [-tol, 0) to zero and rescales to unit length.
/// Returns false if the point is further than tol outside the orthant.
inline bool project_to_K(Eigen::VectorXd& b, double tol) {
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (b(i) < -tol) return false;
    if (b(i) < 0.0) b(i) = 0.0;
  }
  const double nrm = b.norm();
  if (!(nrm > 0.0)) return false;
  b /= nrm;
  return true;
}

}  // namespace detail

/// Expects v flat at order t with rank r; returns r atoms in K.
inline AtomicMeasure extract_atoms(const Tms& v, int t, int r, std::uint64_t seed = 0,
                                   const ExtractionOptions& opts = {}) {
  if (t < 1 || 2 * t > v.degree()) throw DimensionError("extract_atoms: order out of range");
  if (r < 1) throw ExtractionError("extract_atoms: rank must be positive");
  const int n = v.n();
  const MonomialBasis& basis = v.basis();
  const Eigen::MatrixXd m = moment_matrix(v, t);
  const int s = static_cast<int>(m.rows());
  if (r > s) throw ExtractionError("extract_atoms: rank exceeds moment matrix size");

  // (i) M_t = V V^T from the r leading eigenpairs.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw ExtractionError("extract_atoms: eigendecomposition failed");
  Eigen::MatrixXd vmat(s, r);
  for (int j = 0; j < r; ++j) {
    const double lam = es.eigenvalues()(s - 1 - j);
    if (!(lam > 0.0)) throw ExtractionError("extract_atoms: moment matrix has fewer than r positive eigenvalues");
    vmat.col(j) = es.eigenvectors().col(s - 1 - j) * std::sqrt(lam);
  }

  // (ii) Echelon pivots: greedily take rows in graded order that are
  // independent of the rows already taken.
  const double row_scale = vmat.rowwise().norm().maxCoeff();
  std::vector<int> pivots;
  Eigen::MatrixXd q(r, 0);
  for (int i = 0; i < s && static_cast<int>(pivots.size()) < r; ++i) {
    Eigen::VectorXd row = vmat.row(i).transpose();
    for (int pass = 0; pass < 2; ++pass) row -= q * (q.transpose() * row);
    const double nrm = row.norm();
    if (nrm > opts.pivot_tol * row_scale) {
      pivots.push_back(i);
      q.conservativeResize(Eigen::NoChange, q.cols() + 1);
      q.col(q.cols() - 1) = row / nrm;
    }
  }
  if (static_cast<int>(pivots.size()) < r) throw ExtractionError("extract_atoms: fewer than r independent rows");
  Eigen::MatrixXd vp(r, r);
  for (int j = 0; j < r; ++j) vp.row(j) = vmat.row(pivots[static_cast<std::size_t>(j)]);
  const Eigen::MatrixXd u = vmat * vp.inverse();  // U restricted to pivots is I

  // (iii) Multiplication matrices: row j of N_i is row x_i * w_j of U.
  std::vector<Eigen::MatrixXd> mult(static_cast<std::size_t>(n), Eigen::MatrixXd(r, r));
  for (int j = 0; j < r; ++j) {
    const Exponent& w = basis.exponent(pivots[static_cast<std::size_t>(j)]);
    if (degree_of(w) > t - 1) throw ExtractionError("extract_atoms: pivot monomial of degree t; sequence not flat");
    for (int i = 0; i < n; ++i) {
      Exponent e = w;
      e[static_cast<std::size_t>(i)] += 1;
      mult[static_cast<std::size_t>(i)].row(j) = u.row(basis.index_or_throw(e));
    }
  }

  // (iv)-(vi) Joint eigenvectors from the Schur form of a random convex
  // combination; atom coordinates are Rayleigh quotients of each N_i.
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(static_cast<std::size_t>(n));
  double wsum = 0.0;
  for (auto& x : w) wsum += (x = expo(rng));
  Eigen::MatrixXd comb = Eigen::MatrixXd::Zero(r, r);
  for (int i = 0; i < n; ++i) comb += (w[static_cast<std::size_t>(i)] / wsum) * mult[static_cast<std::size_t>(i)];
  Eigen::RealSchur<Eigen::MatrixXd> schur(comb);
  if (schur.info() != Eigen::Success) throw ExtractionError("extract_atoms: Schur decomposition failed");
  const Eigen::MatrixXd& qs = schur.matrixU();

  AtomicMeasure mu;
  for (int j = 0; j < r; ++j) {
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = qs.col(j).dot(mult[static_cast<std::size_t>(i)] * qs.col(j));
    // (viii) Projection onto K; done before the weight fit so the weights
    // belong to the atoms that are reported.
    if (!detail::project_to_K(b, opts.atom_tol))
      throw ExtractionError("extract_atoms: atom lies outside K beyond tolerance");
    mu.atoms.push_back(std::move(b));
  }

  // (vii) Weights by nonnegative least squares; tiny weights are dropped
  // and the fit repeated on the survivors.
  const Tms vt = restrict_degree(v, 2 * t);
  const double scale = std::max(1.0, vt.values().cwiseAbs().maxCoeff());
  for (int round = 0; round < 3; ++round) {
    Eigen::MatrixXd design(vt.size(), static_cast<Eigen::Index>(mu.atoms.size()));
    for (std::size_t j = 0; j < mu.atoms.size(); ++j)
      design.col(static_cast<Eigen::Index>(j)) = vt.basis().evaluate(mu.atoms[j]);
    const NnlsResult fit = nnls(design, vt.values());
    std::vector<Eigen::VectorXd> kept;
    mu.weights.clear();
    for (std::size_t j = 0; j < mu.atoms.size(); ++j)
      if (fit.x(static_cast<Eigen::Index>(j)) >= opts.weight_floor * scale) {
        kept.push_back(mu.atoms[j]);
        mu.weights.push_back(fit.x(static_cast<Eigen::Index>(j)));
      }
    const bool dropped = kept.size() != mu.atoms.size();
    mu.atoms = std::move(kept);
    if (mu.atoms.empty()) throw ExtractionError("extract_atoms: all weights vanished");
    if (!dropped) break;
  }
  Eigen::VectorXd fitted = Eigen::VectorXd::Zero(vt.size());
  for (std::size_t j = 0; j < mu.atoms.size(); ++j) fitted += mu.weights[j] * vt.basis().evaluate(mu.atoms[j]);
  mu.residual = (fitted - vt.values()).cwiseAbs().maxCoeff();
  if (!(mu.residual <= opts.residual_tol * scale))
    throw ExtractionError("extract_atoms: weight fit residual " + std::to_string(mu.residual) + " exceeds tolerance");
  return mu;
}

struct MeasureReport {
  double residual = 0.0;  // max over |alpha| <= 2t of |v_alpha - sum_i rho_i b_i^alpha|
  int worst_index = -1;
};

/// Recomputes the moments of mu by direct products, independent of the
/// monomial evaluation used during extraction.
inline MeasureReport verify_measure(const Tms& v, const AtomicMeasure& mu, int t) {
  if (2 * t > v.degree()) throw DimensionError("verify_measure: order exceeds moment coverage");
  if (mu.atoms.size() != mu.weights.size()) throw DimensionError("verify_measure: atoms/weights size mismatch");
  MeasureReport rep;
  const MonomialBasis& basis = v.basis();
  const int count = basis.count(2 * t);
  for (int idx = 0; idx < count; ++idx) {
    const Exponent& alpha = basis.exponent(idx);
    double s = 0.0;
    for (std::size_t j = 0; j < mu.atoms.size(); ++j) {
      double p = mu.weights[j];
      for (std::size_t i = 0; i < alpha.size(); ++i)
        for (int e = 0; e < alpha[i]; ++e) p *= mu.atoms[j](static_cast<Eigen::Index>(i));
      s += p;
    }
    const double dev = std::abs(v[idx] - s);
    if (dev > rep.residual || rep.worst_index < 0) {
      rep.residual = std::max(rep.residual, dev);
      rep.worst_index = idx;
    }
  }
  return rep;
}

}  // namespace cpcheck
