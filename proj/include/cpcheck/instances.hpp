#pragma once

// Reference matrices with known verdicts and random instance generators.

#include "cpcheck/types.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace cpcheck::instances {

/// Doubly nonnegative but not completely positive.
inline SymMatrix not_cp_5x5() {
  Eigen::MatrixXd a(5, 5);
  a << 1, 1, 0, 0, 1,
       1, 2, 1, 0, 0,
       0, 1, 2, 1, 0,
       0, 0, 1, 2, 1,
       1, 0, 0, 1, 6;
  return SymMatrix(a);
}

/// 2I plus the adjacency matrix of the 7-cycle: the sum of (e_i + e_{i+1})(e_i + e_{i+1})^T,
/// on the boundary of the cone.
inline SymMatrix boundary_7x7() {
  Eigen::MatrixXd a = 2.0 * Eigen::MatrixXd::Identity(7, 7);
  for (int i = 0; i < 7; ++i) {
    a(i, (i + 1) % 7) = 1.0;
    a((i + 1) % 7, i) = 1.0;
  }
  return SymMatrix(a);
}

/// Interior point: 1 1^T plus five rank-one terms spanning R^6.
inline SymMatrix interior_6x6() {
  Eigen::MatrixXd a(6, 6);
  a << 2, 1, 1, 1, 1, 2,
       1, 2, 3, 1, 1, 1,
       1, 3, 6, 4, 1, 1,
       1, 1, 4, 11, 3, 1,
       1, 1, 1, 3, 9, 3,
       2, 1, 1, 1, 3, 3;
  return SymMatrix(a);
}

/// Interior point: 1 1^T + (e2+e3)(e2+e3)^T + 4(e3+e4)(e3+e4)^T
/// + (e4+e5)(e4+e5)^T + (e1+e5)(e1+e5)^T.
inline SymMatrix interior_5x5() {
  Eigen::MatrixXd a(5, 5);
  a << 2, 1, 1, 1, 2,
       1, 2, 2, 1, 1,
       1, 2, 6, 5, 1,
       1, 1, 5, 6, 2,
       2, 1, 1, 2, 3;
  return SymMatrix(a);
}

/// I_n + E_n, the default interior reference matrix.
inline SymMatrix default_reference(int n) {
  return SymMatrix(Eigen::MatrixXd::Identity(n, n) + Eigen::MatrixXd::Ones(n, n));
}

/// B B^T with B = (B1, B2), B1 entrywise positive and nonsingular, B2 >= 0.
/// Such matrices lie in the interior of the cone.
inline SymMatrix random_interior(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.1, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> extra(0, n);
  Eigen::MatrixXd b1(n, n);
  do {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b1(i, j) = pos(rng);
  } while (std::abs(b1.determinant()) < 1e-3);
  const int m = extra(rng);
  Eigen::MatrixXd b2(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) b2(i, j) = unit(rng) < 0.5 ? 0.0 : unit(rng);
  return SymMatrix(b1 * b1.transpose() + b2 * b2.transpose());
}

/// Symmetric matrices outside the cone: either a negative off-diagonal
/// entry, or nonnegative entries with a negative eigenvalue.
inline SymMatrix random_not_cp(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> idx(0, n - 1);
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = unit(rng);
  Eigen::MatrixXd a = g * g.transpose();
  if (unit(rng) < 0.5) {
    int i = idx(rng), j = idx(rng);
    while (j == i) j = idx(rng);
    const double v = -(0.2 + 0.8 * unit(rng)) * std::sqrt(a(i, i) * a(j, j));
    a(i, j) = v;
    a(j, i) = v;
  } else {
    // Nonnegative entries with a small diagonal, redrawn until indefinite.
    do {
      for (int r = 0; r < n; ++r) {
        a(r, r) = 0.3 * unit(rng);
        for (int c = r + 1; c < n; ++c) a(r, c) = a(c, r) = unit(rng);
      }
    } while (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a, Eigen::EigenvaluesOnly).eigenvalues()(0) >
             -0.05 * a.norm());
  }
  return SymMatrix(0.5 * (a + a.transpose()));
}

/// Nonnegative, symmetric and diagonally dominant, hence completely positive.
inline SymMatrix random_diagonally_dominant(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) a(i, j) = a(j, i) = unit(rng) < 0.3 ? 0.0 : unit(rng);
  for (int i = 0; i < n; ++i) a(i, i) = a.row(i).sum() + unit(rng);
  return SymMatrix(a);
}

/// r points of K, pairwise at least min_sep apart, and positive weights.
struct RandomMeasure {
  std::vector<Eigen::VectorXd> atoms;
  std::vector<double> weights;
};

inline RandomMeasure random_measure(int n, int r, std::mt19937_64& rng, double min_sep = 0.1) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomMeasure m;
  while (static_cast<int>(m.atoms.size()) < r) {
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) b(i) = unit(rng) < 0.2 ? 0.0 : unit(rng);
    if (b.norm() < 1e-3) continue;
    b.normalize();
    bool ok = true;
    for (const auto& c : m.atoms) ok = ok && (b - c).norm() >= min_sep;
    if (!ok) continue;
    m.atoms.push_back(b);
    m.weights.push_back(0.2 + unit(rng));
  }
  return m;
}

}  // namespace cpcheck::instances
