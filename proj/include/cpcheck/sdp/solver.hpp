#pragma once

// Primal-dual path-following interior-point method with Nesterov-Todd
// scaling and a Mehrotra predictor-corrector step for SdpProblem.
//
// Internally the problem is always  max b^T x  s.t.  S = G0 + sum_i x_i G_i >= 0
// after the linear equalities have been eliminated by a Gauss-Jordan presolve.
// The dual is  min <G0, Z>  s.t.  <G_i, Z> = -b_i,  Z >= 0.

#include "cpcheck/sdp/problem.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

namespace cpcheck::sdp {

struct SdpOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-8;
  int max_iter = 200;
  double regularization = 1e-12;  // static, relative to the Schur diagonal
  double infeas_tol = 1e-8;
  double step_fraction = 0.98;
  std::ostream* log = nullptr;  // per-iteration trace when set
};

namespace detail {

using Blocks = std::vector<Eigen::MatrixXd>;

inline double inner(const Blocks& a, const Blocks& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].cwiseProduct(b[i]).sum();
  return s;
}

inline double frob(const Blocks& a) { return std::sqrt(inner(a, a)); }

inline void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

/// Equalities eliminated by Gauss-Jordan: x_piv = rhs - R x_free.
struct Presolve {
  int m_full = 0;
  std::vector<int> pivots;
  std::vector<int> free_cols;
  Eigen::MatrixXd reduced;   // R, |pivots| x |free_cols|
  Eigen::VectorXd rhs;       // |pivots|
  bool infeasible = false;

  Eigen::VectorXd expand(const Eigen::VectorXd& xf) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m_full);
    for (std::size_t j = 0; j < free_cols.size(); ++j) x(free_cols[j]) = xf(static_cast<Eigen::Index>(j));
    if (!pivots.empty()) {
      const Eigen::VectorXd xp = rhs - reduced * xf;
      for (std::size_t r = 0; r < pivots.size(); ++r) x(pivots[r]) = xp(static_cast<Eigen::Index>(r));
    }
    return x;
  }
};

inline Presolve eliminate_equalities(const SdpProblem& p) {
  Presolve ps;
  ps.m_full = p.free_scalars();
  const auto rows = static_cast<int>(p.constraints.size());
  if (rows == 0) {
    ps.free_cols.resize(static_cast<std::size_t>(ps.m_full));
    std::iota(ps.free_cols.begin(), ps.free_cols.end(), 0);
    return ps;
  }
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(rows, ps.m_full);
  Eigen::VectorXd rhs(rows);
  for (int r = 0; r < rows; ++r) {
    for (const auto& [j, v] : p.constraints[static_cast<std::size_t>(r)].terms) e(r, j) += v;
    rhs(r) = p.constraints[static_cast<std::size_t>(r)].rhs;
  }
  std::vector<int> col_count(static_cast<std::size_t>(ps.m_full), 0);
  for (int j = 0; j < ps.m_full; ++j)
    for (int r = 0; r < rows; ++r)
      if (e(r, j) != 0.0) ++col_count[static_cast<std::size_t>(j)];

  std::vector<int> pivot_of_row(static_cast<std::size_t>(rows), -1);
  std::vector<char> is_pivot(static_cast<std::size_t>(ps.m_full), 0);
  const double rhs_scale = 1.0 + rhs.cwiseAbs().maxCoeff();
  for (int r = 0; r < rows; ++r) {
    const double row_scale = p.constraints[static_cast<std::size_t>(r)].terms.empty()
                                 ? 0.0
                                 : e.row(r).cwiseAbs().maxCoeff();
    const double maxabs = e.row(r).cwiseAbs().maxCoeff();
    if (maxabs <= 1e-12 * std::max(row_scale, 1.0)) {
      if (std::abs(rhs(r)) > 1e-9 * rhs_scale) ps.infeasible = true;
      continue;
    }
    int best = -1;
    for (int j = 0; j < ps.m_full; ++j) {
      if (is_pivot[static_cast<std::size_t>(j)]) continue;
      const double v = std::abs(e(r, j));
      if (v < 0.1 * maxabs) continue;
      if (best < 0) {
        best = j;
        continue;
      }
      const int cb = col_count[static_cast<std::size_t>(best)];
      const int cj = col_count[static_cast<std::size_t>(j)];
      if (cj < cb || (cj == cb && v > std::abs(e(r, best)))) best = j;
    }
    const double piv = e(r, best);
    e.row(r) /= piv;
    rhs(r) /= piv;
    for (int q = 0; q < rows; ++q) {
      if (q == r) continue;
      const double f = e(q, best);
      if (f == 0.0) continue;
      e.row(q) -= f * e.row(r);
      e(q, best) = 0.0;
      rhs(q) -= f * rhs(r);
    }
    pivot_of_row[static_cast<std::size_t>(r)] = best;
    is_pivot[static_cast<std::size_t>(best)] = 1;
  }
  for (int j = 0; j < ps.m_full; ++j)
    if (!is_pivot[static_cast<std::size_t>(j)]) ps.free_cols.push_back(j);
  std::vector<int> active;
  for (int r = 0; r < rows; ++r)
    if (pivot_of_row[static_cast<std::size_t>(r)] >= 0) active.push_back(r);
  ps.reduced.resize(static_cast<Eigen::Index>(active.size()), static_cast<Eigen::Index>(ps.free_cols.size()));
  ps.rhs.resize(static_cast<Eigen::Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    const int r = active[i];
    ps.pivots.push_back(pivot_of_row[static_cast<std::size_t>(r)]);
    ps.rhs(static_cast<Eigen::Index>(i)) = rhs(r);
    for (std::size_t j = 0; j < ps.free_cols.size(); ++j)
      ps.reduced(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = e(r, ps.free_cols[j]);
  }
  return ps;
}

/// Coefficient entries of one block, flattened and sorted by coordinate.
struct BlockPattern {
  int dim = 0;
  std::vector<int> coord_list;    // coordinates present in this block (ascending)
  std::vector<int> coord_start;   // into the flat arrays, size coord_list + 1
  std::vector<int> row, col, flat_coord;
  std::vector<double> value;      // raw coefficient
  std::vector<double> scaled;     // value * sqrt(2) * (1/2 on the diagonal)
  std::vector<int> const_row, const_col;
  std::vector<double> const_value;
};

/// The problem after presolve, with parametrization y = offset + T x.
struct Reduced {
  std::vector<BlockPattern> blocks;
  Eigen::SparseMatrix<double> map;  // coordinates x free
  Eigen::VectorXd offset;
  Eigen::VectorXd b;  // internal maximize objective over reduced x
  double b0 = 0.0;
  bool identity_map = false;
  int n_coord = 0;

  int m() const { return static_cast<int>(map.cols()); }

  Blocks zero_blocks() const {
    Blocks z;
    for (const auto& bp : blocks) z.emplace_back(Eigen::MatrixXd::Zero(bp.dim, bp.dim));
    return z;
  }

  /// sum_a c_a A_a (without the constant term).
  Blocks apply_coords(const Eigen::VectorXd& c) const {
    Blocks out = zero_blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& bp = blocks[b];
      auto& m = out[b];
      for (std::size_t k = 0; k < bp.coord_list.size(); ++k) {
        const double w = c(bp.coord_list[k]);
        if (w == 0.0) continue;
        for (int f = bp.coord_start[k]; f < bp.coord_start[k + 1]; ++f) {
          const double v = w * bp.value[static_cast<std::size_t>(f)];
          m(bp.row[static_cast<std::size_t>(f)], bp.col[static_cast<std::size_t>(f)]) += v;
        }
      }
      // Only the upper triangle was filled.
      m.triangularView<Eigen::StrictlyLower>() = m.transpose().triangularView<Eigen::StrictlyLower>();
    }
    return out;
  }

  Blocks constant() const {
    Blocks out = apply_coords(offset);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& bp = blocks[b];
      for (std::size_t f = 0; f < bp.const_value.size(); ++f) {
        out[b](bp.const_row[f], bp.const_col[f]) += bp.const_value[f];
        if (bp.const_row[f] != bp.const_col[f]) out[b](bp.const_col[f], bp.const_row[f]) += bp.const_value[f];
      }
    }
    return out;
  }

  Blocks apply(const Eigen::VectorXd& x) const {
    return identity_map ? apply_coords(x) : apply_coords(map * x);
  }

  /// (<A_a, X>)_a
  Eigen::VectorXd coord_adjoint(const Blocks& x) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_coord);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& bp = blocks[b];
      const auto& m = x[b];
      for (std::size_t k = 0; k < bp.coord_list.size(); ++k) {
        double s = 0.0;
        for (int f = bp.coord_start[k]; f < bp.coord_start[k + 1]; ++f) {
          const int r = bp.row[static_cast<std::size_t>(f)];
          const int c = bp.col[static_cast<std::size_t>(f)];
          s += bp.value[static_cast<std::size_t>(f)] * (r == c ? m(r, c) : m(r, c) + m(c, r));
        }
        g(bp.coord_list[k]) += s;
      }
    }
    return g;
  }

  Eigen::VectorXd adjoint(const Blocks& x) const {
    Eigen::VectorXd g = coord_adjoint(x);
    return identity_map ? g : Eigen::VectorXd(map.transpose() * g);
  }

  /// Schur complement in coordinate space: H_ab = sum_blocks tr(A_a W A_b W).
  Eigen::MatrixXd coordinate_schur(const Blocks& w) const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_coord, n_coord);
    std::vector<double> acc;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& bp = blocks[b];
      const auto& wm = w[b];
      const auto total = bp.row.size();
      acc.assign(total, 0.0);
      const int* rr = bp.row.data();
      const int* cc = bp.col.data();
      for (std::size_t k = 0; k < bp.coord_list.size(); ++k) {
        const int begin = bp.coord_start[k];
        std::fill(acc.begin() + begin, acc.end(), 0.0);
        double* t = acc.data();
        for (int e = begin; e < bp.coord_start[k + 1]; ++e) {
          const double ve = bp.scaled[static_cast<std::size_t>(e)];
          const double* wp = wm.col(rr[e]).data();
          const double* wq = wm.col(cc[e]).data();
          for (auto f = static_cast<std::size_t>(begin); f < total; ++f) {
            t[f] += ve * (wq[rr[f]] * wp[cc[f]] + wq[cc[f]] * wp[rr[f]]);
          }
        }
        const int a = bp.coord_list[k];
        for (std::size_t kb = k; kb < bp.coord_list.size(); ++kb) {
          double s = 0.0;
          for (int f = bp.coord_start[kb]; f < bp.coord_start[kb + 1]; ++f)
            s += bp.scaled[static_cast<std::size_t>(f)] * t[f];
          const int c = bp.coord_list[kb];
          h(a, c) += s;
          if (c != a) h(c, a) += s;
        }
      }
    }
    return h;
  }

  Eigen::MatrixXd schur(const Blocks& w) const {
    Eigen::MatrixXd hy = coordinate_schur(w);
    if (identity_map) return hy;
    const Eigen::MatrixXd p = hy * map;
    hy.resize(0, 0);
    return map.transpose() * p;
  }
};

inline Reduced reduce(const SdpProblem& p, const Presolve& ps) {
  Reduced red;
  red.n_coord = p.num_coordinates();
  const int nb = static_cast<int>(p.psd_blocks.size());
  red.blocks.resize(static_cast<std::size_t>(nb));
  for (int b = 0; b < nb; ++b) red.blocks[static_cast<std::size_t>(b)].dim = p.psd_blocks[static_cast<std::size_t>(b)];
  for (int a = 0; a < red.n_coord; ++a) {
    for (const auto& e : p.coordinates[static_cast<std::size_t>(a)]) {
      auto& bp = red.blocks[static_cast<std::size_t>(e.block)];
      if (bp.coord_list.empty() || bp.coord_list.back() != a) {
        bp.coord_list.push_back(a);
        bp.coord_start.push_back(static_cast<int>(bp.row.size()));
      }
      bp.row.push_back(e.row);
      bp.col.push_back(e.col);
      bp.flat_coord.push_back(a);
      bp.value.push_back(e.value);
      bp.scaled.push_back(e.value * std::sqrt(2.0) * (e.row == e.col ? 0.5 : 1.0));
    }
  }
  for (auto& bp : red.blocks) bp.coord_start.push_back(static_cast<int>(bp.row.size()));
  for (const auto& e : p.constant) {
    auto& bp = red.blocks[static_cast<std::size_t>(e.block)];
    bp.const_row.push_back(e.row);
    bp.const_col.push_back(e.col);
    bp.const_value.push_back(e.value);
  }

  const double sign = p.sense == Sense::Maximize ? 1.0 : -1.0;
  const Eigen::VectorXd b_full = sign * p.objective;
  red.b0 = sign * p.objective_constant;
  red.offset = p.offset;

  const auto mf = static_cast<int>(ps.free_cols.size());
  red.b.resize(mf);
  for (int j = 0; j < mf; ++j) red.b(j) = b_full(ps.free_cols[static_cast<std::size_t>(j)]);
  for (std::size_t r = 0; r < ps.pivots.size(); ++r) {
    const double bp = b_full(ps.pivots[r]);
    red.b0 += bp * ps.rhs(static_cast<Eigen::Index>(r));
    red.b -= bp * ps.reduced.row(static_cast<Eigen::Index>(r)).transpose();
    red.offset += p.map.col(ps.pivots[r]) * ps.rhs(static_cast<Eigen::Index>(r));
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(p.map.nonZeros()) * 2);
  std::vector<double> dense(static_cast<std::size_t>(red.n_coord), 0.0);
  std::vector<int> touched;
  std::vector<char> mark(static_cast<std::size_t>(red.n_coord), 0);
  for (int j = 0; j < mf; ++j) {
    auto add_col = [&](int col, double w) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(p.map, col); it; ++it) {
        const auto r = static_cast<std::size_t>(it.row());
        if (!mark[r]) {
          mark[r] = 1;
          touched.push_back(static_cast<int>(r));
        }
        dense[r] += w * it.value();
      }
    };
    add_col(ps.free_cols[static_cast<std::size_t>(j)], 1.0);
    for (std::size_t r = 0; r < ps.pivots.size(); ++r) {
      const double w = ps.reduced(static_cast<Eigen::Index>(r), j);
      if (w != 0.0) add_col(ps.pivots[r], -w);
    }
    std::sort(touched.begin(), touched.end());
    for (int r : touched) {
      if (dense[static_cast<std::size_t>(r)] != 0.0) trip.emplace_back(r, j, dense[static_cast<std::size_t>(r)]);
      dense[static_cast<std::size_t>(r)] = 0.0;
      mark[static_cast<std::size_t>(r)] = 0;
    }
    touched.clear();
  }
  red.map.resize(red.n_coord, mf);
  red.map.setFromTriplets(trip.begin(), trip.end());
  red.map.makeCompressed();

  if (mf == red.n_coord && red.map.nonZeros() == mf) {
    bool ident = true;
    for (int c = 0; c < mf && ident; ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(red.map, c); it; ++it)
        if (it.row() != c || it.value() != 1.0) ident = false;
    red.identity_map = ident;
  }
  return red;
}

/// Nesterov-Todd scaling of one block pair: G with G^T S G = D = G^{-1} Z G^{-T}.
struct NtScaling {
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_inv;
  Eigen::VectorXd d;
  Eigen::MatrixXd w;  // G G^T, satisfies W S W = Z
};

inline bool nt_scaling(const Eigen::MatrixXd& s, const Eigen::MatrixXd& z, NtScaling& out) {
  Eigen::LLT<Eigen::MatrixXd> ls(s);
  Eigen::LLT<Eigen::MatrixXd> lz(z);
  if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
  const Eigen::MatrixXd l_s = ls.matrixL();
  const Eigen::MatrixXd l_z = lz.matrixL();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(l_s.transpose() * l_z, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.d = svd.singularValues();
  if (out.d.minCoeff() <= 0.0 || !out.d.allFinite()) return false;
  const Eigen::VectorXd dm = out.d.cwiseSqrt().cwiseInverse();
  out.g = l_z * svd.matrixV() * dm.asDiagonal();
  // G^{-1} = D^{1/2} V^T L_Z^{-1}
  const Eigen::MatrixXd vt_linv =
      lz.matrixL().transpose().solve(svd.matrixV()).transpose();  // V^T L_Z^{-1}
  out.g_inv = out.d.cwiseSqrt().asDiagonal() * vt_linv;
  out.w = out.g * out.g.transpose();
  return true;
}

/// Largest alpha with D + alpha * dhat PSD, where D is diagonal positive.
inline double max_step_scaled(const Eigen::VectorXd& d, const Eigen::MatrixXd& dhat) {
  const Eigen::VectorXd dm = d.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd k = dm.asDiagonal() * dhat * dm.asDiagonal();
  symmetrize(k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin >= 0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

/// Dual polish for degenerate problems. Complementarity puts the range of an
/// optimal Z inside the null space of the optimal S, so with an accurate
/// primal iterate the dual can be recovered from the linear system
/// A*(Q U Q^T) = -b over that face, taking the correction of least norm.
/// Returns false when the face is too small or U is not PSD.
inline bool polish_dual(const Reduced& red, const Blocks& s_blk, const Blocks& z_blk, double thr, double cone_tol,
                        Blocks& z_out) {
  const std::size_t nb = s_blk.size();
  std::vector<Eigen::MatrixXd> q(nb);
  Blocks proj(nb);
  z_out.assign(nb, {});
  for (std::size_t b = 0; b < nb; ++b) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s_blk[b]);
    const Eigen::VectorXd& ev = es.eigenvalues();
    Eigen::Index cnt = 0;
    while (cnt < ev.size() && ev(cnt) <= thr) ++cnt;
    q[b] = es.eigenvectors().leftCols(cnt);
    proj[b] = q[b] * q[b].transpose();
    z_out[b] = proj[b] * z_blk[b] * proj[b];
  }
  const int m = red.m();
  if (m == 0) return true;
  Eigen::MatrixXd normal = red.schur(proj);
  const double scale = std::max(1.0, normal.diagonal().cwiseAbs().maxCoeff());
  normal.diagonal().array() += 1e-14 * scale;
  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  if (llt.info() != Eigen::Success) return false;
  // Alternate the least-norm affine correction with clipping U to the PSD cone.
  for (int round = 0; round < 60; ++round) {
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd r = -red.b - red.adjoint(z_out);
      const Eigen::VectorXd nu = llt.solve(r);
      Blocks g = red.apply(nu);
      for (std::size_t b = 0; b < nb; ++b) {
        z_out[b] += proj[b] * g[b] * proj[b];
        symmetrize(z_out[b]);
      }
    }
    bool psd = true;
    for (std::size_t b = 0; b < nb; ++b) {
      if (q[b].cols() == 0) continue;
      Eigen::MatrixXd u = q[b].transpose() * z_out[b] * q[b];
      symmetrize(u);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(u);
      if (es.eigenvalues()(0) >= -cone_tol) continue;
      psd = false;
      const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
      u = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
      z_out[b] = q[b] * u * q[b].transpose();
    }
    if (psd) return true;
  }
  return false;
}

}  // namespace detail

/// Solves `prob`. Deterministic for identical inputs and options.
inline SdpSolution solve(const SdpProblem& prob, const SdpOptions& opts = {}) {
  using detail::Blocks;
  prob.validate();
  if (!(opts.gap_tol > 0) || !(opts.feas_tol > 0)) throw ProblemError("solve: tolerances must be positive");

  SdpSolution sol;
  sol.threads = 1;
  const detail::Presolve ps = detail::eliminate_equalities(prob);
  const double out_sign = prob.sense == Sense::Maximize ? 1.0 : -1.0;
  if (ps.infeasible) {
    sol.status = SdpStatus::PrimalInfeasible;
    sol.message = "linear equality constraints are inconsistent";
    return sol;
  }
  const detail::Reduced red = detail::reduce(prob, ps);
  const int m = red.m();
  const auto nb = red.blocks.size();
  int total_dim = 0;
  for (const auto& bp : red.blocks) total_dim += bp.dim;

  const Blocks g0 = red.constant();
  const double norm_g0 = detail::frob(g0);
  const double norm_b = red.b.norm();

  // Frobenius norms of G_i, exact when coordinate matrices have disjoint support.
  Eigen::VectorXd coord_norm2 = Eigen::VectorXd::Zero(red.n_coord);
  for (const auto& bp : red.blocks)
    for (std::size_t f = 0; f < bp.row.size(); ++f)
      coord_norm2(bp.flat_coord[f]) += bp.value[f] * bp.value[f] * (bp.row[f] == bp.col[f] ? 1.0 : 2.0);
  double max_gi = 0.0;
  double z_scale = 0.0;
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(red.map, j); it; ++it)
      s += it.value() * it.value() * coord_norm2(it.row());
    const double nj = std::sqrt(s);
    max_gi = std::max(max_gi, nj);
    z_scale = std::max(z_scale, (1.0 + std::abs(red.b(j))) / (1.0 + nj));
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  Blocks s_blk;
  Blocks z_blk;
  for (const auto& bp : red.blocks) {
    const double dim = bp.dim;
    const double zeta = std::max({10.0, std::sqrt(dim), dim * z_scale});
    const double xi = std::max({10.0, std::sqrt(dim), std::max(norm_g0, max_gi) / std::sqrt(dim)});
    s_blk.emplace_back(xi * Eigen::MatrixXd::Identity(bp.dim, bp.dim));
    z_blk.emplace_back(zeta * Eigen::MatrixXd::Identity(bp.dim, bp.dim));
  }

  auto finish = [&](SdpStatus status, const std::string& msg) {
    sol.status = status;
    sol.message = msg;
    sol.x = ps.expand(x);
    sol.slack = s_blk;
    sol.dual = z_blk;
    // Multipliers for the original equalities: E^T w = b + A*(Z) in the full space.
    if (!prob.constraints.empty()) {
      const auto rows = static_cast<Eigen::Index>(prob.constraints.size());
      Eigen::MatrixXd et = Eigen::MatrixXd::Zero(prob.free_scalars(), rows);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (const auto& [j, v] : prob.constraints[static_cast<std::size_t>(r)].terms) et(j, r) += v;
      const Eigen::VectorXd target =
          out_sign * prob.objective + prob.map.transpose() * red.coord_adjoint(z_blk);
      sol.equality_multipliers = et.colPivHouseholderQr().solve(target);
    }
    return sol;
  };

  // Best iterate seen so far, scored by the worst of the three stopping
  // ratios. Failures late in the endgame return it instead of the last one.
  struct Snapshot {
    double score = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x;
    Blocks s, z;
    double pobj = 0, dobj = 0, gap = 0, pinf = 0, dinf = 0;
  } best;
  int since_best = 0;
  auto score_of = [&](double gap, double pinf, double dinf) {
    return std::max({gap / opts.gap_tol, pinf / opts.feas_tol, dinf / opts.feas_tol});
  };
  auto remember = [&](double pobj, double dobj, double gap, double pinf, double dinf, const Blocks& z) {
    const double sc = score_of(gap, pinf, dinf);
    if (sc >= best.score) return false;
    best = Snapshot{sc, x, s_blk, z, pobj, dobj, gap, pinf, dinf};
    return true;
  };
  auto fail = [&](SdpStatus status, const std::string& msg) {
    if (std::isfinite(best.score)) {
      x = best.x;
      s_blk = best.s;
      z_blk = best.z;
      sol.primal_objective = out_sign * best.pobj;
      sol.dual_objective = out_sign * best.dobj;
      sol.gap = best.gap;
      sol.primal_infeasibility = best.pinf;
      sol.dual_infeasibility = best.dinf;
    }
    return finish(status, msg);
  };

  double reg = opts.regularization;
  for (int iter = 0; iter <= opts.max_iter; ++iter) {
    sol.iterations = iter;
    // Residuals and convergence measures.
    Blocks gx = red.apply(x);
    Blocks rp(nb);
    for (std::size_t b = 0; b < nb; ++b) rp[b] = g0[b] + gx[b] - s_blk[b];
    const Eigen::VectorXd az = red.adjoint(z_blk);
    const Eigen::VectorXd rd = -red.b - az;
    const double pobj = red.b.dot(x) + red.b0;
    const double dobj = detail::inner(g0, z_blk) + red.b0;
    const double sz = detail::inner(s_blk, z_blk);
    const double mu = sz / total_dim;
    const double pinf = detail::frob(rp) / (1.0 + norm_g0);
    const double dinf = rd.norm() / (1.0 + norm_b);
    const double rel_gap = std::max(std::abs(dobj - pobj), sz) / (1.0 + std::abs(pobj) + std::abs(dobj));
    sol.primal_objective = out_sign * pobj;
    sol.dual_objective = out_sign * dobj;
    sol.gap = rel_gap;
    sol.primal_infeasibility = pinf;
    sol.dual_infeasibility = dinf;
    if (opts.log) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "%3d  pobj % .10e  dobj % .10e  gap %.2e  pinf %.2e  dinf %.2e  mu %.2e\n",
                    iter, pobj, dobj, rel_gap, pinf, dinf, mu);
      *opts.log << buf << std::flush;
    }
    if (rel_gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol)
      return finish(SdpStatus::Optimal, "converged");
    const double prev_best = best.score;
    remember(pobj, dobj, rel_gap, pinf, dinf, z_blk);
    if (pinf <= opts.feas_tol && rel_gap <= 1e-5) {
      // Try thresholds around the geometric mean of the complementary scales.
      for (double f : {1e2, 1.0, 1e4, 1e3, 10.0, 1e5}) {
        Blocks zp;
        if (!detail::polish_dual(red, s_blk, z_blk, f * std::sqrt(mu), 0.1 * opts.feas_tol, zp)) continue;
        const double dinf_p = (-red.b - red.adjoint(zp)).norm() / (1.0 + norm_b);
        const double dobj_p = detail::inner(g0, zp) + red.b0;
        const double sz_p = std::abs(detail::inner(s_blk, zp));
        const double gap_p = std::max(std::abs(dobj_p - pobj), sz_p) / (1.0 + std::abs(pobj) + std::abs(dobj_p));
        if (opts.log) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "     polish x%.0e  dobj % .10e  gap %.2e  dinf %.2e\n", f, dobj_p, gap_p, dinf_p);
          *opts.log << buf;
        }
        if (gap_p <= opts.gap_tol && dinf_p <= opts.feas_tol) {
          z_blk = std::move(zp);
          sol.gap = gap_p;
          sol.dual_objective = out_sign * dobj_p;
          sol.dual_infeasibility = dinf_p;
          return finish(SdpStatus::Optimal, "converged after dual polish");
        }
        remember(pobj, dobj_p, gap_p, pinf, dinf_p, zp);
      }
    }
    since_best = best.score < 0.9 * prev_best ? 0 : since_best + 1;
    if (since_best >= 8 && rel_gap <= 1e-4) return fail(SdpStatus::NumericalFailure, "progress stalled");

    // Infeasibility certificates.
    double tr_z = 0.0;
    for (const auto& z : z_blk) tr_z += z.trace();
    const double g0z = detail::inner(g0, z_blk);
    if (g0z < 0 && tr_z > 0) {
      const double ray_obj = -g0z / tr_z;
      const double ray_res = az.norm() / tr_z;
      if (ray_obj > opts.infeas_tol && ray_res <= opts.infeas_tol && ray_res <= 1e-2 * ray_obj) {
        sol.ray.clear();
        for (const auto& z : z_blk) sol.ray.push_back(z / tr_z);
        sol.ray_objective = ray_obj;
        sol.ray_residual = ray_res;
        return finish(SdpStatus::PrimalInfeasible, "dual improving ray found");
      }
    }
    if (pobj - red.b0 > 0 && x.lpNorm<Eigen::Infinity>() > 1e8) {
      const Eigen::VectorXd xr = x / (pobj - red.b0);
      Blocks gr = red.apply(xr);
      double lmin = 0.0;
      for (auto& g : gr) {
        detail::symmetrize(g);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
        lmin = std::min(lmin, es.eigenvalues()(0));
      }
      if (-lmin <= opts.infeas_tol) {
        sol.ray_x = ps.expand(xr) - ps.expand(Eigen::VectorXd::Zero(m));
        sol.ray_residual = -lmin;
        return finish(SdpStatus::DualInfeasible, "primal improving ray found");
      }
    }
    if (iter == opts.max_iter) break;

    // Scaling.
    std::vector<detail::NtScaling> nt(nb);
    for (std::size_t b = 0; b < nb; ++b)
      if (!detail::nt_scaling(s_blk[b], z_blk[b], nt[b]))
        return fail(SdpStatus::NumericalFailure, "iterate lost positive definiteness");
    Blocks w(nb);
    for (std::size_t b = 0; b < nb; ++b) w[b] = nt[b].w;

    Eigen::MatrixXd schur = red.schur(w);
    const double diag_scale = m > 0 ? std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff()) : 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool factored = false;
    for (; reg <= 1e-4; reg *= 100.0) {
      Eigen::MatrixXd reg_schur = schur;
      reg_schur.diagonal().array() += reg * diag_scale;
      llt.compute(reg_schur);
      if (llt.info() == Eigen::Success) {
        factored = true;
        break;
      }
    }
    if (!factored) return fail(SdpStatus::NumericalFailure, "Schur complement not positive definite");
    schur.resize(0, 0);

    // W r_p W, reused by both solves.
    Blocks wrw(nb);
    for (std::size_t b = 0; b < nb; ++b) wrw[b] = w[b] * rp[b] * w[b];

    // Direction for a given scaled complementarity right-hand side Dtilde.
    auto direction = [&](const Blocks& dtilde, Eigen::VectorXd& dx, Blocks& ds, Blocks& dz) {
      Blocks rc(nb);
      for (std::size_t b = 0; b < nb; ++b) rc[b] = nt[b].g * dtilde[b] * nt[b].g.transpose();
      Blocks t(nb);
      for (std::size_t b = 0; b < nb; ++b) t[b] = rc[b] - wrw[b];
      const Eigen::VectorXd rhs = red.adjoint(t) - rd;
      dx = m > 0 ? Eigen::VectorXd(llt.solve(rhs)) : Eigen::VectorXd();
      // The formed Schur matrix carries roundoff of order eps |W|^2, which near
      // the optimum dominates the dual residual. Polish with conjugate gradients
      // on the exact operator A*(W A(.) W), preconditioned by its factorization.
      if (m > 0) {
        auto op = [&](const Eigen::VectorXd& v) {
          Blocks av = red.apply(v);
          for (std::size_t b = 0; b < nb; ++b) av[b] = w[b] * av[b] * w[b];
          return red.adjoint(av);
        };
        Eigen::VectorXd r = rhs - op(dx);
        const double target = 1e-15 * (1.0 + rhs.norm());
        Eigen::VectorXd best = dx;
        double best_norm = r.norm();
        Eigen::VectorXd zr = llt.solve(r);
        Eigen::VectorXd pdir = zr;
        double rz = r.dot(zr);
        for (int it = 0; it < 25 && best_norm > target && rz > 0; ++it) {
          const Eigen::VectorXd q = op(pdir);
          const double pq = pdir.dot(q);
          if (!(pq > 0)) break;
          const double alpha = rz / pq;
          dx += alpha * pdir;
          r -= alpha * q;
          const double rn = r.norm();
          if (rn < best_norm) {
            best_norm = rn;
            best = dx;
          }
          zr = llt.solve(r);
          const double rz_new = r.dot(zr);
          pdir = zr + (rz_new / rz) * pdir;
          rz = rz_new;
        }
        dx = best;
      }
      ds = red.apply(dx);
      dz.resize(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        ds[b] += rp[b];
        dz[b] = rc[b] - w[b] * ds[b] * w[b];
        detail::symmetrize(dz[b]);
      }
    };
    auto step_lengths = [&](const Blocks& ds, const Blocks& dz, Blocks& ds_hat, Blocks& dz_hat) {
      double ap = std::numeric_limits<double>::infinity();
      double ad = std::numeric_limits<double>::infinity();
      ds_hat.resize(nb);
      dz_hat.resize(nb);
      for (std::size_t b = 0; b < nb; ++b) {
        ds_hat[b] = nt[b].g.transpose() * ds[b] * nt[b].g;
        dz_hat[b] = nt[b].g_inv * dz[b] * nt[b].g_inv.transpose();
        ap = std::min(ap, detail::max_step_scaled(nt[b].d, ds_hat[b]));
        ad = std::min(ad, detail::max_step_scaled(nt[b].d, dz_hat[b]));
      }
      return std::pair<double, double>(ap, ad);
    };

    // Predictor.
    Blocks dtilde(nb);
    for (std::size_t b = 0; b < nb; ++b) dtilde[b] = Eigen::MatrixXd((-nt[b].d).asDiagonal());
    Eigen::VectorXd dx;
    Blocks ds, dz, ds_hat, dz_hat;
    direction(dtilde, dx, ds, dz);
    auto [ap_aff, ad_aff] = step_lengths(ds, dz, ds_hat, dz_hat);
    ap_aff = std::min(1.0, ap_aff);
    ad_aff = std::min(1.0, ad_aff);
    double sz_aff = 0.0;
    for (std::size_t b = 0; b < nb; ++b)
      sz_aff += (s_blk[b] + ap_aff * ds[b]).cwiseProduct(z_blk[b] + ad_aff * dz[b]).sum();
    const double mu_aff = std::max(sz_aff, 0.0) / total_dim;
    const double ratio = mu > 0 ? mu_aff / mu : 0.0;
    const double sigma = std::clamp(ratio * ratio * ratio, 0.0, 1.0);

    // Corrector: D o (dS^ + dZ^) = sigma mu I - D^2 - sym(dS^_aff dZ^_aff).
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& d = nt[b].d;
      Eigen::MatrixXd r = -0.5 * (ds_hat[b] * dz_hat[b] + dz_hat[b] * ds_hat[b]);
      for (Eigen::Index i = 0; i < d.size(); ++i) r(i, i) += sigma * mu - d(i) * d(i);
      for (Eigen::Index j = 0; j < d.size(); ++j)
        for (Eigen::Index i = 0; i < d.size(); ++i) r(i, j) *= 2.0 / (d(i) + d(j));
      dtilde[b] = r;
    }
    direction(dtilde, dx, ds, dz);
    auto [ap, ad] = step_lengths(ds, dz, ds_hat, dz_hat);
    const double tau = opts.step_fraction;
    ap = std::min(1.0, tau * ap);
    ad = std::min(1.0, tau * ad);
    if (ap < 1e-12 && ad < 1e-12) return fail(SdpStatus::NumericalFailure, "step length collapsed");
    if (opts.log) {
      char buf[120];
      std::snprintf(buf, sizeof buf, "     sigma %.2e  ap %.3f  ad %.3f  reg %.0e\n", sigma, ap, ad, reg);
      *opts.log << buf;
    }

    // Roundoff can push a full step out of the cone; back off until both
    // iterates factor.
    auto is_pd = [](const Eigen::MatrixXd& m) { return Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success; };
    Blocks s_new(nb), z_new(nb);
    bool ok_s = false, ok_z = false;
    for (int tries = 0; tries < 30 && !(ok_s && ok_z); ++tries) {
      if (!ok_s) {
        ok_s = true;
        for (std::size_t b = 0; b < nb && ok_s; ++b) {
          s_new[b] = s_blk[b] + ap * ds[b];
          detail::symmetrize(s_new[b]);
          ok_s = is_pd(s_new[b]);
        }
        if (!ok_s) ap *= 0.8;
      }
      if (!ok_z) {
        ok_z = true;
        for (std::size_t b = 0; b < nb && ok_z; ++b) {
          z_new[b] = z_blk[b] + ad * dz[b];
          detail::symmetrize(z_new[b]);
          ok_z = is_pd(z_new[b]);
        }
        if (!ok_z) ad *= 0.8;
      }
    }
    if (!(ok_s && ok_z)) return fail(SdpStatus::NumericalFailure, "iterate lost positive definiteness");
    x += ap * dx;
    s_blk = std::move(s_new);
    z_blk = std::move(z_new);
  }
  return fail(SdpStatus::MaxIter, "iteration limit reached");
}

}  // namespace cpcheck::sdp
