#pragma once

// Order-k moment relaxations of  max lambda  s.t.  a - lambda c  has a
// representing measure on K, in three flavours:
//
//   P2K     lambda free, y_A = a - lambda c,            maximize lambda
//   P3K     <p_i, y_A> = <p_i, a> for a basis of c^perp, minimize <p0, y_A>
//   P2BARK  P2K with c = identify(b1 b1^T)
//
// In every case y ranges over Gamma_k(h, g): M_k(y) >= 0, L_{x_j}(y) >= 0 and
// L_h(y) = 0. The last condition is eliminated exactly: it says
// y_d = sum_i y_{d + 2 e_i} for |d| <= 2k - 2, so every moment is a fixed
// combination of the moments of degree 2k - 1 and 2k, which become the free
// scalars of the semidefinite program.

#include "cpcheck/moments.hpp"
#include "cpcheck/sdp/problem.hpp"
#include "cpcheck/sdp/solver.hpp"
#include "cpcheck/types.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cpcheck {

class RelaxationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// p0 with <p0, c> = 1 and p_1..p_nbar spanning the orthogonal complement of c.
struct OrthBasis {
  Eigen::VectorXd c;
  Eigen::VectorXd p0;
  Eigen::MatrixXd p;  // columns p_1..p_nbar

  int nbar() const { return static_cast<int>(p.cols()); }

  /// Validates a caller-supplied complement basis.
  static OrthBasis from_vectors(const Eigen::VectorXd& c, const Eigen::MatrixXd& p) {
    if (c.squaredNorm() == 0.0) throw InputError("orth basis: c must be nonzero");
    if (p.rows() != c.size() || p.cols() != c.size() - 1)
      throw DimensionError("orth basis: expected len(c) - 1 vectors of length len(c)");
    const double scale = c.norm();
    for (Eigen::Index i = 0; i < p.cols(); ++i)
      if (std::abs(p.col(i).dot(c)) > 1e-12 * scale * std::max(1.0, p.col(i).norm()))
        throw InputError("orth basis: p_" + std::to_string(i + 1) + " is not orthogonal to c");
    Eigen::FullPivHouseholderQR<Eigen::MatrixXd> qr(p);
    if (qr.rank() != p.cols()) throw InputError("orth basis: vectors are linearly dependent");
    return {c, c / c.squaredNorm(), p};
  }
};

/// Orthonormal complement from a Householder QR of c.
inline OrthBasis orth_complement_basis(const ATms& c) {
  const Eigen::VectorXd& v = c.values;
  if (v.size() == 0 || v.squaredNorm() == 0.0) throw InputError("orth_complement_basis: c must be nonzero");
  const Eigen::MatrixXd vm = v;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(vm);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(v.size(), v.size());
  OrthBasis out;
  out.c = v;
  out.p0 = v / v.squaredNorm();
  out.p = q.rightCols(v.size() - 1);
  return out;
}

/// p_i = -e_1 + (c_1 / c_{i+1}) e_{i+1}: sparse complement vectors pivoting on
/// the first entry. Needs every entry of c nonzero.
inline OrthBasis pivot_complement_basis(const ATms& c) {
  const Eigen::VectorXd& v = c.values;
  const Eigen::Index len = v.size();
  for (Eigen::Index i = 0; i < len; ++i)
    if (v(i) == 0.0) throw InputError("pivot_complement_basis: c has a zero entry");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(len, len - 1);
  for (Eigen::Index i = 0; i + 1 < len; ++i) {
    p(0, i) = -1.0;
    p(i + 1, i) = v(0) / v(i + 1);
  }
  return OrthBasis::from_vectors(v, p);
}

enum class RelaxationForm { P2K, P3K, P2BARK };

inline const char* to_string(RelaxationForm f) {
  switch (f) {
    case RelaxationForm::P2K: return "P2K";
    case RelaxationForm::P3K: return "P3K";
    case RelaxationForm::P2BARK: return "P2BARK";
  }
  return "?";
}

/// y = T u over the standard moments u = (y_g : g_1 <= 1, |g| <= 2k). With
/// L_h(y) = 0 every other moment follows from
///   y_{d + 2 e_1} = y_d - sum_{i >= 2} y_{d + 2 e_i},   |d| <= 2k - 2.
/// Polynomials of degree <= k split as r + h q with r a combination of standard
/// monomials, and the h q part lies in the kernel of every moment and
/// localizing matrix, so only the standard rows and columns are kept.
struct SphereParametrization {
  std::shared_ptr<const MonomialBasis> basis;  // degree 2k
  std::vector<int> free_moments;               // basis indices of u
  std::vector<std::vector<std::pair<int, double>>> expr;  // y_i as terms (u index, coef)
  Eigen::SparseMatrix<double> t;               // basis size x |u|
};

inline bool is_standard(const Exponent& g) { return g[0] <= 1; }

inline SphereParametrization sphere_parametrization(int n, int k) {
  if (n < 1) throw DimensionError("sphere_parametrization: n must be positive");
  SphereParametrization sp;
  sp.basis = MonomialBasis::make(n, 2 * k);
  const MonomialBasis& basis = *sp.basis;
  const auto size = static_cast<std::size_t>(basis.size());
  sp.expr.resize(size);
  std::vector<int> order;
  for (int i = 0; i < basis.size(); ++i) {
    if (is_standard(basis.exponent(i))) {
      sp.expr[static_cast<std::size_t>(i)] = {{static_cast<int>(sp.free_moments.size()), 1.0}};
      sp.free_moments.push_back(i);
    } else {
      order.push_back(i);
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return basis.exponent(a)[0] < basis.exponent(b)[0]; });
  std::vector<double> acc(sp.free_moments.size(), 0.0);
  std::vector<char> mark(sp.free_moments.size(), 0);
  std::vector<int> touched;
  auto add = [&](int src, double w) {
    for (const auto& [u, c] : sp.expr[static_cast<std::size_t>(src)]) {
      if (!mark[static_cast<std::size_t>(u)]) {
        mark[static_cast<std::size_t>(u)] = 1;
        touched.push_back(u);
      }
      acc[static_cast<std::size_t>(u)] += w * c;
    }
  };
  for (int i : order) {
    Exponent d = basis.exponent(i);
    d[0] -= 2;
    add(basis.index_or_throw(d), 1.0);
    for (int v = 1; v < n; ++v) {
      Exponent e = d;
      e[static_cast<std::size_t>(v)] += 2;
      add(basis.index_or_throw(e), -1.0);
    }
    std::sort(touched.begin(), touched.end());
    auto& out = sp.expr[static_cast<std::size_t>(i)];
    for (int u : touched) {
      const double c = acc[static_cast<std::size_t>(u)];
      if (c != 0.0) out.emplace_back(u, c);
      acc[static_cast<std::size_t>(u)] = 0.0;
      mark[static_cast<std::size_t>(u)] = 0;
    }
    touched.clear();
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < size; ++i)
    for (const auto& [u, c] : sp.expr[i]) trip.emplace_back(static_cast<int>(i), u, c);
  sp.t.resize(basis.size(), static_cast<Eigen::Index>(sp.free_moments.size()));
  sp.t.setFromTriplets(trip.begin(), trip.end());
  sp.t.makeCompressed();
  return sp;
}

struct Decoded {
  double lambda = 0.0;
  Tms y;
};

struct RelaxationInstance {
  RelaxationForm form = RelaxationForm::P2K;
  int order = 1;
  ATms a;
  ATms c;  // c, or identify(b1 b1^T) for P2BARK
  std::optional<OrthBasis> orth;
  std::shared_ptr<const MonomialBasis> basis;  // degree 2k
  Eigen::SparseMatrix<double> moments;         // all moments from the SDP coordinates
  sdp::SdpProblem problem;
  std::optional<double> fixed_lambda;  // set for the generic-point problem

  Decoded decode(const sdp::SdpSolution& sol) const {
    if (sol.status != sdp::SdpStatus::Optimal)
      throw RelaxationError(std::string("decode: solver status ") + sdp::to_string(sol.status));
    return decode_primal(sol);
  }

  /// Decodes whatever primal point the solver returned, optimal or not.
  Decoded decode_primal(const sdp::SdpSolution& sol) const {
    Decoded out;
    out.y = Tms(basis, moments * problem.coordinates_from_free(sol.x));
    if (fixed_lambda) {
      out.lambda = *fixed_lambda;
    } else if (form == RelaxationForm::P3K) {
      const ATms z = restrict_A(out.y);
      out.lambda = c.values.dot(a.values - z.values) / c.values.squaredNorm();
    } else {
      out.lambda = sol.x(0);
    }
    return out;
  }
};

namespace detail {

/// Moment block and localizing blocks of Gamma_k restricted to standard
/// monomials, with the standard moments u as coordinates.
inline void add_gamma_blocks(sdp::SdpProblem& prob, const SphereParametrization& sp, int n, int k) {
  const MonomialBasis& basis = *sp.basis;
  auto standard_upto = [&](int d) {
    std::vector<int> out;
    for (int i = 0; i < basis.count(d); ++i)
      if (is_standard(basis.exponent(i))) out.push_back(i);
    return out;
  };
  const std::vector<int> rows_m = standard_upto(k);
  const std::vector<int> rows_l = standard_upto(k - 1);
  prob.psd_blocks.assign(1, static_cast<int>(rows_m.size()));
  for (int j = 0; j < n; ++j) prob.psd_blocks.push_back(static_cast<int>(rows_l.size()));
  prob.coordinates.assign(sp.free_moments.size(), {});
  auto put = [&](int block, int r, int s, const Exponent& g) {
    for (const auto& [u, c] : sp.expr[static_cast<std::size_t>(basis.index_or_throw(g))])
      prob.coordinates[static_cast<std::size_t>(u)].push_back({block, r, s, c});
  };
  const auto sm = static_cast<int>(rows_m.size());
  for (int r = 0; r < sm; ++r)
    for (int s = r; s < sm; ++s)
      put(0, r, s, basis.exponent(rows_m[static_cast<std::size_t>(r)]) + basis.exponent(rows_m[static_cast<std::size_t>(s)]));
  const auto sl = static_cast<int>(rows_l.size());
  for (int j = 0; j < n; ++j)
    for (int r = 0; r < sl; ++r)
      for (int s = r; s < sl; ++s) {
        Exponent e = basis.exponent(rows_l[static_cast<std::size_t>(r)]) + basis.exponent(rows_l[static_cast<std::size_t>(s)]);
        e[static_cast<std::size_t>(j)] += 1;
        put(j + 1, r, s, e);
      }
  prob.offset = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.free_moments.size()));
}

/// Rows of T for the degree-two moments, in IndexSetA order.
inline Eigen::MatrixXd a_rows(const SphereParametrization& sp, int n) {
  const IndexSetA set(n);
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(set.size(), sp.t.cols());
  for (int p = 0; p < set.size(); ++p) {
    const int i = sp.basis->index_or_throw(set.exponent(p));
    rows.row(p) = sp.t.row(i);
  }
  return rows;
}

inline RelaxationInstance build_shift(const ATms& a, const ATms& c, int k, RelaxationForm form) {
  if (k < 1) throw InputError("relaxation order must be at least 1");
  if (a.n != c.n || a.size() != c.size()) throw DimensionError("relaxation: a and c dimensions differ");
  const int n = a.n;
  const SphereParametrization sp = sphere_parametrization(n, k);
  RelaxationInstance inst;
  inst.form = form;
  inst.order = k;
  inst.a = a;
  inst.c = c;
  inst.basis = sp.basis;
  inst.moments = sp.t;
  auto& prob = inst.problem;
  add_gamma_blocks(prob, sp, n, k);

  // Free scalars: x = (lambda, u).
  const auto nu = static_cast<int>(sp.t.cols());
  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < nu; ++col) trip.emplace_back(col, col + 1, 1.0);
  prob.map.resize(nu, nu + 1);
  prob.map.setFromTriplets(trip.begin(), trip.end());
  prob.sense = sdp::Sense::Maximize;
  prob.objective = Eigen::VectorXd::Zero(nu + 1);
  prob.objective(0) = 1.0;

  const Eigen::MatrixXd rows = a_rows(sp, n);
  for (int p = 0; p < a.size(); ++p) {
    sdp::LinearConstraint lc;
    if (c.values(p) != 0.0) lc.terms.emplace_back(0, c.values(p));
    for (int j = 0; j < nu; ++j)
      if (rows(p, j) != 0.0) lc.terms.emplace_back(j + 1, rows(p, j));
    lc.rhs = a.values(p);
    prob.constraints.push_back(std::move(lc));
  }
  prob.validate();
  return inst;
}

}  // namespace detail

inline RelaxationInstance build_p2k(const ATms& a, const ATms& c, int k) {
  if (c.values.squaredNorm() == 0.0) throw InputError("build_p2k: c must be nonzero");
  return detail::build_shift(a, c, k, RelaxationForm::P2K);
}

inline RelaxationInstance build_p2bark(const ATms& a, const Eigen::VectorXd& b1, int k) {
  if (b1.size() != a.n) throw DimensionError("build_p2bark: b1 length must equal n");
  for (Eigen::Index i = 0; i < b1.size(); ++i)
    if (!(b1(i) > 0.0)) throw InputError("build_p2bark: b1 must be strictly positive");
  return detail::build_shift(a, identify(SymMatrix::outer(b1)), k, RelaxationForm::P2BARK);
}

inline RelaxationInstance build_p3k(const ATms& a, const OrthBasis& basis, int k) {
  if (k < 1) throw InputError("relaxation order must be at least 1");
  if (basis.c.size() != a.size()) throw DimensionError("build_p3k: basis and a dimensions differ");
  const int n = a.n;
  const SphereParametrization sp = sphere_parametrization(n, k);
  RelaxationInstance inst;
  inst.form = RelaxationForm::P3K;
  inst.order = k;
  inst.a = a;
  inst.c = ATms(n, basis.c);
  inst.orth = basis;
  inst.basis = sp.basis;
  inst.moments = sp.t;
  auto& prob = inst.problem;
  detail::add_gamma_blocks(prob, sp, n, k);
  const auto nu = static_cast<int>(sp.t.cols());
  prob.map.resize(nu, nu);
  prob.map.setIdentity();
  const Eigen::MatrixXd rows = detail::a_rows(sp, n);
  prob.sense = sdp::Sense::Minimize;
  prob.objective = rows.transpose() * basis.p0;
  const Eigen::MatrixXd e = basis.p.transpose() * rows;
  const Eigen::VectorXd rhs = basis.p.transpose() * a.values;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    sdp::LinearConstraint lc;
    const double scale = e.row(i).cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < e.cols(); ++j)
      if (std::abs(e(i, j)) > 1e-15 * scale) lc.terms.emplace_back(static_cast<int>(j), e(i, j));
    lc.rhs = rhs(i);
    prob.constraints.push_back(std::move(lc));
  }
  prob.validate();
  return inst;
}

/// Feasibility problem at a fixed shift: y|_A = a - lambda c, y in Gamma_k,
/// minimizing <W, M_k(y)> for a seeded random positive definite W. A generic
/// linear objective selects an extreme point of the fibre, which is where
/// flat (finitely atomic) moment sequences live when the optimum of the
/// shift problem is not unique.
inline RelaxationInstance build_generic_point(const ATms& a, const ATms& c, double lambda, int k, std::uint64_t seed,
                                              RelaxationForm form = RelaxationForm::P2K) {
  if (k < 1) throw InputError("relaxation order must be at least 1");
  if (a.n != c.n || a.size() != c.size()) throw DimensionError("relaxation: a and c dimensions differ");
  const int n = a.n;
  const SphereParametrization sp = sphere_parametrization(n, k);
  RelaxationInstance inst;
  inst.form = form;
  inst.order = k;
  inst.a = a;
  inst.c = c;
  inst.basis = sp.basis;
  inst.moments = sp.t;
  inst.fixed_lambda = lambda;
  auto& prob = inst.problem;
  detail::add_gamma_blocks(prob, sp, n, k);
  const auto nu = static_cast<int>(sp.t.cols());
  prob.map.resize(nu, nu);
  prob.map.setIdentity();

  const int d = prob.psd_blocks.front();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = normal(rng);
  const Eigen::MatrixXd w = g.transpose() * g / d + 1e-2 * Eigen::MatrixXd::Identity(d, d);
  prob.sense = sdp::Sense::Minimize;
  prob.objective = Eigen::VectorXd::Zero(nu);
  for (int u = 0; u < nu; ++u)
    for (const auto& e : prob.coordinates[static_cast<std::size_t>(u)])
      if (e.block == 0) prob.objective(u) += e.value * w(e.row, e.col) * (e.row == e.col ? 1.0 : 2.0);

  const Eigen::MatrixXd rows = detail::a_rows(sp, n);
  const Eigen::VectorXd rhs = a.values - lambda * c.values;
  for (int p = 0; p < a.size(); ++p) {
    sdp::LinearConstraint lc;
    for (int j = 0; j < nu; ++j)
      if (rows(p, j) != 0.0) lc.terms.emplace_back(j, rows(p, j));
    lc.rhs = rhs(p);
    prob.constraints.push_back(std::move(lc));
  }
  prob.validate();
  return inst;
}

/// Builds the instance and solves it with the embedded solver.
struct RelaxationResult {
  sdp::SdpSolution solution;
  std::optional<Decoded> decoded;
};

inline RelaxationResult solve_relaxation(const RelaxationInstance& inst, const sdp::SdpOptions& opts = {}) {
  RelaxationResult r;
  r.solution = sdp::solve(inst.problem, opts);
  if (r.solution.status == sdp::SdpStatus::Optimal) r.decoded = inst.decode(r.solution);
  return r;
}

}  // namespace cpcheck
