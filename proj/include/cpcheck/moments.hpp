#pragma once

// Truncated moment sequences, the Riesz functional, moment and localizing
// matrices, and the flatness (rank) test.

#include "cpcheck/monomials.hpp"
#include "cpcheck/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <memory>
#include <string>
#include <vector>

namespace cpcheck {

/// Truncated moment sequence: values indexed by MonomialBasis(n, degree).
class Tms {
 public:
  Tms() = default;
  Tms(std::shared_ptr<const MonomialBasis> basis, Eigen::VectorXd values)
      : basis_(std::move(basis)), values_(std::move(values)) {
    if (!basis_ || values_.size() != basis_->size())
      throw DimensionError("Tms: value count does not match basis size");
  }
  Tms(int n, int degree, Eigen::VectorXd values) : Tms(MonomialBasis::make(n, degree), std::move(values)) {}

  static Tms zero(int n, int degree) {
    auto b = MonomialBasis::make(n, degree);
    const int sz = b->size();
    return {std::move(b), Eigen::VectorXd::Zero(sz)};
  }

  int n() const { return basis_->n(); }
  int degree() const { return basis_->degree(); }
  int size() const { return static_cast<int>(values_.size()); }
  const MonomialBasis& basis() const { return *basis_; }
  const std::shared_ptr<const MonomialBasis>& basis_ptr() const { return basis_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int i) const { return values_(i); }
  double at(const Exponent& alpha) const { return values_(basis_->index_or_throw(alpha)); }

 private:
  std::shared_ptr<const MonomialBasis> basis_;
  Eigen::VectorXd values_;
};

/// Moments of the atomic measure sum_i weights[i] * delta(atoms[i]) up to `degree`.
inline Tms tms_from_measure(int n, int degree, const std::vector<Eigen::VectorXd>& atoms,
                            const std::vector<double>& weights) {
  if (atoms.size() != weights.size()) throw DimensionError("tms_from_measure: atoms/weights size mismatch");
  auto basis = MonomialBasis::make(n, degree);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(basis->size());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].size() != n) throw DimensionError("tms_from_measure: atom dimension");
    v += weights[i] * basis->evaluate(atoms[i]);
  }
  return {std::move(basis), std::move(v)};
}

/// <p, a>: the Riesz functional of `a` applied to the coefficient vector `p`.
inline double riesz(const Eigen::VectorXd& p, const Eigen::VectorXd& a) {
  if (p.size() != a.size()) throw DimensionError("riesz: basis mismatch");
  return p.dot(a);
}
inline double riesz(const Eigen::VectorXd& p, const ATms& a) { return riesz(p, a.values); }
inline double riesz(const Eigen::VectorXd& p, const Tms& y) { return riesz(p, y.values()); }

inline Eigen::MatrixXd localizing_matrix(const Polynomial& q, const Tms& y, int k) {
  const int dq = q.degree();
  const int half = (dq + 1) / 2;
  if (k < half) throw DimensionError("localizing_matrix: deg(q) exceeds 2k");
  const int order = k - half;
  if (2 * order + dq > y.degree())
    throw DimensionError("localizing_matrix: order " + std::to_string(k) + " exceeds moment coverage " +
                         std::to_string(y.degree()));
  const MonomialBasis& basis = y.basis();
  const int size = basis.count(order);
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(size, size);
  for (int a = 0; a < size; ++a)
    for (int b = a; b < size; ++b) {
      const Exponent ab = basis.exponent(a) + basis.exponent(b);
      double s = 0.0;
      for (const auto& [gamma, coef] : q.terms) s += coef * y[basis.index_or_throw(ab + gamma)];
      l(a, b) = s;
      l(b, a) = s;
    }
  return l;
}

inline Eigen::MatrixXd moment_matrix(const Tms& y, int t) {
  if (t < 0 || 2 * t > y.degree())
    throw DimensionError("moment_matrix: order " + std::to_string(t) + " exceeds moment coverage");
  return localizing_matrix(Polynomial::constant(y.n(), 1.0), y, t);
}

/// y|_d: the moments of degree <= d.
inline Tms restrict_degree(const Tms& y, int d) {
  if (d < 0 || d > y.degree()) throw DimensionError("restrict: degree exceeds coverage");
  auto basis = MonomialBasis::make(y.n(), d);
  return {basis, y.values().head(basis->size())};
}

/// y|_A: the degree-two moments in IndexSetA order.
inline ATms restrict_A(const Tms& y) {
  if (y.degree() < 2) throw DimensionError("restrict: index set A needs degree-2 coverage");
  const IndexSetA set(y.n());
  Eigen::VectorXd v(set.size());
  for (int p = 0; p < set.size(); ++p) v(p) = y.at(set.exponent(p));
  return {y.n(), std::move(v)};
}

/// Singular values (descending) of a symmetric matrix.
inline Eigen::VectorXd symmetric_singular_values(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  Eigen::VectorXd s = es.eigenvalues().cwiseAbs();
  std::sort(s.data(), s.data() + s.size(), std::greater<>());
  return s;
}

/// Count of singular values above rel_tol * max(sigma_1, 1). The unit floor
/// makes the rank of an all-but-zero matrix zero rather than full.
inline int rank_from_singular_values(const Eigen::VectorXd& s, double rel_tol) {
  if (s.size() == 0) return 0;
  const double threshold = rel_tol * std::max(s(0), 1.0);
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > threshold) ++r;
  return r;
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline constexpr double kDefaultRankTol = 1e-6;
inline constexpr double kDefaultSdpcTol = 1e-6;

struct FlatnessReport {
  int t = 0;
  int rank_lo = 0;
  int rank_hi = 0;
  bool sdpc_ok = false;
  bool flat = false;
  double h_residual = 0.0;       // ||L_h^{(t)}||_inf
  double min_localizing_eig = 0.0;
  Eigen::VectorXd singular_values_lo;
  Eigen::VectorXd singular_values_hi;
};

/// Rank condition rank M_{t-1} == rank M_t together with L_h = 0 and
/// L_{g_j} >= 0 at order t, evaluated on y|_{2t}.
inline FlatnessReport check_flatness(const Tms& y, int t, double rank_tol = kDefaultRankTol,
                                     double sdpc_tol = kDefaultSdpcTol) {
  if (t < 1 || 2 * t > y.degree()) throw DimensionError("check_flatness: order out of range");
  if (rank_tol <= 0) throw InputError("check_flatness: rank_tol must be positive");
  FlatnessReport rep;
  rep.t = t;
  const Tms v = restrict_degree(y, 2 * t);
  const int n = y.n();

  rep.singular_values_lo = symmetric_singular_values(moment_matrix(v, t - 1));
  rep.singular_values_hi = symmetric_singular_values(moment_matrix(v, t));
  rep.rank_lo = rank_from_singular_values(rep.singular_values_lo, rank_tol);
  rep.rank_hi = rank_from_singular_values(rep.singular_values_hi, rank_tol);

  rep.h_residual = localizing_matrix(Polynomial::sphere(n), v, t).cwiseAbs().maxCoeff();
  double min_eig = min_eigenvalue(moment_matrix(v, t));
  for (int j = 0; j < n; ++j)
    min_eig = std::min(min_eig, min_eigenvalue(localizing_matrix(Polynomial::coordinate(n, j), v, t)));
  rep.min_localizing_eig = min_eig;
  rep.sdpc_ok = rep.h_residual <= sdpc_tol && min_eig >= -sdpc_tol;
  rep.flat = rep.sdpc_ok && rep.rank_lo == rep.rank_hi;
  return rep;
}

}  // namespace cpcheck
