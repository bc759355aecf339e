#pragma once

#include "cpcheck/types.hpp"

#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

namespace cpcheck {

using Exponent = std::vector<int>;

inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline int degree_of(const Exponent& alpha) { return std::accumulate(alpha.begin(), alpha.end(), 0); }

inline Exponent operator+(const Exponent& a, const Exponent& b) {
  Exponent r(a);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline Exponent unit_exponent(int n, int i, int times = 1) {
  Exponent e(static_cast<std::size_t>(n), 0);
  e[static_cast<std::size_t>(i)] = times;
  return e;
}

/// All exponents of n variables with total degree <= d, in graded
/// lexicographic order (degree ascending; within a degree x_1 dominates).
class MonomialBasis {
 public:
  MonomialBasis(int n, int d) : n_(n), d_(d) {
    if (n < 1 || n > 10) throw DimensionError("MonomialBasis: n must be in [1, 10]");
    if (d < 0 || d > 60) throw DimensionError("MonomialBasis: degree out of range");
    exponents_.reserve(static_cast<std::size_t>(binomial(n + d, d)));
    Exponent cur(static_cast<std::size_t>(n), 0);
    for (int deg = 0; deg <= d; ++deg) {
      fill(cur, 0, deg);
    }
    lookup_.reserve(exponents_.size());
    for (std::size_t i = 0; i < exponents_.size(); ++i) lookup_.emplace(key(exponents_[i]), static_cast<int>(i));
  }

  static std::shared_ptr<const MonomialBasis> make(int n, int d) {
    return std::make_shared<const MonomialBasis>(n, d);
  }

  int n() const { return n_; }
  int degree() const { return d_; }
  int size() const { return static_cast<int>(exponents_.size()); }
  const Exponent& exponent(int i) const { return exponents_[static_cast<std::size_t>(i)]; }
  const std::vector<Exponent>& exponents() const { return exponents_; }

  /// Number of monomials of degree <= t; a prefix of this basis when t <= d.
  int count(int t) const { return static_cast<int>(binomial(n_ + t, t)); }

  /// Position of `alpha`, or -1 when it lies outside the basis.
  int index(const Exponent& alpha) const {
    if (static_cast<int>(alpha.size()) != n_) return -1;
    for (int a : alpha)
      if (a < 0) return -1;
    auto it = lookup_.find(key(alpha));
    return it == lookup_.end() ? -1 : it->second;
  }

  int index_or_throw(const Exponent& alpha) const {
    const int i = index(alpha);
    if (i < 0) throw DimensionError("monomial outside basis of degree " + std::to_string(d_));
    return i;
  }

  /// x^alpha evaluated at every basis monomial.
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const {
    Eigen::VectorXd v(size());
    for (int i = 0; i < size(); ++i) {
      double p = 1.0;
      const Exponent& a = exponents_[static_cast<std::size_t>(i)];
      for (int j = 0; j < n_; ++j)
        for (int e = 0; e < a[static_cast<std::size_t>(j)]; ++e) p *= x(j);
      v(i) = p;
    }
    return v;
  }

 private:
  void fill(Exponent& cur, int var, int remaining) {
    if (var == n_ - 1) {
      cur[static_cast<std::size_t>(var)] = remaining;
      exponents_.push_back(cur);
      return;
    }
    for (int a = remaining; a >= 0; --a) {
      cur[static_cast<std::size_t>(var)] = a;
      fill(cur, var + 1, remaining - a);
    }
    cur[static_cast<std::size_t>(var)] = 0;
  }

  static std::uint64_t key(const Exponent& alpha) {
    std::uint64_t k = 0;
    for (int a : alpha) k = (k << 6) | static_cast<std::uint64_t>(a);
    return k;
  }

  int n_;
  int d_;
  std::vector<Exponent> exponents_;
  std::unordered_map<std::uint64_t, int> lookup_;
};

/// Sparse polynomial: a list of (exponent, coefficient) terms.
struct Polynomial {
  int n = 0;
  std::vector<std::pair<Exponent, double>> terms;

  int degree() const {
    int d = 0;
    for (const auto& [e, c] : terms)
      if (c != 0.0) d = std::max(d, degree_of(e));
    return d;
  }

  double operator()(const Eigen::VectorXd& x) const {
    double s = 0.0;
    for (const auto& [e, c] : terms) {
      double p = c;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < e[static_cast<std::size_t>(j)]; ++k) p *= x(j);
      s += p;
    }
    return s;
  }

  static Polynomial constant(int n, double c) { return {n, {{Exponent(static_cast<std::size_t>(n), 0), c}}}; }
  static Polynomial coordinate(int n, int i) { return {n, {{unit_exponent(n, i), 1.0}}}; }

  /// h(x) = x_1^2 + ... + x_n^2 - 1.
  static Polynomial sphere(int n) {
    Polynomial h{n, {}};
    for (int i = 0; i < n; ++i) h.terms.emplace_back(unit_exponent(n, i, 2), 1.0);
    h.terms.emplace_back(Exponent(static_cast<std::size_t>(n), 0), -1.0);
    return h;
  }
};

}  // namespace cpcheck
