#pragma once

// Core domain types: symmetric matrices, the degree-two index set, the
// identification between matrices and their truncated moment vectors, and
// the nonnegative part of the unit sphere.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cpcheck {

/// Raised when a dimension or length argument is inconsistent.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for malformed user input (asymmetric matrices, bad vectors, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSymmetryTolerance = 1e-10;

/// Dense real symmetric matrix. Storage is always exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;

  /// Symmetrizes `m` as (M + M^T) / 2. An asymmetry larger than
  /// kSymmetryTolerance * ||M|| is rejected.
  explicit SymMatrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() < 1) {
      throw DimensionError("SymMatrix: expected a non-empty square matrix, got " +
                           std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (!m.allFinite()) throw InputError("SymMatrix: non-finite entry");
    asymmetry_ = (m - m.transpose()).norm();
    const double scale = m.norm();
    if (asymmetry_ > kSymmetryTolerance * scale) {
      throw InputError("SymMatrix: asymmetry " + std::to_string(asymmetry_) +
                       " exceeds tolerance relative to norm " + std::to_string(scale));
    }
    entries_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(int n) { return SymMatrix(Eigen::MatrixXd::Identity(n, n)); }
  static SymMatrix ones(int n) { return SymMatrix(Eigen::MatrixXd::Ones(n, n)); }
  /// b b^T
  static SymMatrix outer(const Eigen::VectorXd& b) { return SymMatrix(b * b.transpose()); }

  int n() const { return static_cast<int>(entries_.rows()); }
  double operator()(int i, int j) const { return entries_(i, j); }
  const Eigen::MatrixXd& matrix() const { return entries_; }
  double asymmetry() const { return asymmetry_; }

  friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
    return SymMatrix(a.entries_ + b.entries_);
  }
  friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
    return SymMatrix(a.entries_ - b.entries_);
  }
  friend SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.entries_); }

 private:
  Eigen::MatrixXd entries_;
  double asymmetry_ = 0.0;
};

/// The exponents e_i + e_j (j >= i), in row-major upper-triangular order.
class IndexSetA {
 public:
  explicit IndexSetA(int n) : n_(n) {
    if (n < 1) throw DimensionError("IndexSetA: n must be positive");
    pairs_.reserve(static_cast<std::size_t>(n * (n + 1) / 2));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) pairs_.emplace_back(i, j);
  }

  int n() const { return n_; }
  int size() const { return static_cast<int>(pairs_.size()); }
  /// Zero-based (i, j) with i <= j for position `pos`.
  std::pair<int, int> pair(int pos) const { return pairs_.at(static_cast<std::size_t>(pos)); }

  int position(int i, int j) const {
    if (i > j) std::swap(i, j);
    // Rows 0..i-1 contribute n, n-1, ..., n-i+1 entries.
    return i * n_ - i * (i - 1) / 2 + (j - i);
  }

  /// Exponent vector e_i + e_j.
  std::vector<int> exponent(int pos) const {
    std::vector<int> alpha(static_cast<std::size_t>(n_), 0);
    const auto [i, j] = pair(pos);
    alpha[static_cast<std::size_t>(i)] += 1;
    alpha[static_cast<std::size_t>(j)] += 1;
    return alpha;
  }

  static int triangular(int n) { return n * (n + 1) / 2; }

  /// Inverse of triangular(); throws if `len` is not a triangular number.
  static int dimension_for_length(std::ptrdiff_t len) {
    if (len < 1) throw DimensionError("length must be positive");
    const auto n = static_cast<int>(std::lround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
    if (triangular(n) != len)
      throw DimensionError("length " + std::to_string(len) + " is not a triangular number");
    return n;
  }

 private:
  int n_;
  std::vector<std::pair<int, int>> pairs_;
};

/// A vector indexed by IndexSetA: the degree-two moments of a measure, or the
/// identifying vector of a symmetric matrix.
struct ATms {
  int n = 0;
  Eigen::VectorXd values;

  ATms() = default;
  ATms(int dim, Eigen::VectorXd v) : n(dim), values(std::move(v)) {
    if (values.size() != IndexSetA::triangular(n))
      throw DimensionError("ATms: length does not match n(n+1)/2");
  }
  int size() const { return static_cast<int>(values.size()); }
};

inline ATms identify(const SymMatrix& a) {
  const int n = a.n();
  Eigen::VectorXd v(IndexSetA::triangular(n));
  int pos = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) v(pos++) = a(i, j);
  return {n, std::move(v)};
}

inline SymMatrix unidentify(const ATms& a) {
  const int n = IndexSetA::dimension_for_length(a.values.size());
  Eigen::MatrixXd m(n, n);
  int pos = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      m(i, j) = a.values(pos);
      m(j, i) = a.values(pos);
      ++pos;
    }
  return SymMatrix(m);
}

inline SymMatrix unidentify(const Eigen::VectorXd& values) {
  return unidentify(ATms{IndexSetA::dimension_for_length(values.size()), values});
}

/// K = {x : ||x||^2 = 1, x >= 0}, described by h(x) = sum x_i^2 - 1 and
/// g_0 = 1, g_i = x_i.
struct SemialgebraicK {
  int n = 0;

  bool contains(const Eigen::VectorXd& x, double tol) const {
    if (x.size() != n) return false;
    return std::abs(x.squaredNorm() - 1.0) <= tol && x.minCoeff() >= -tol;
  }
};

inline bool membership_K(const Eigen::VectorXd& x, double tol) {
  if (tol < 0) throw InputError("membership_K: negative tolerance");
  return SemialgebraicK{static_cast<int>(x.size())}.contains(x, tol);
}

}  // namespace cpcheck
