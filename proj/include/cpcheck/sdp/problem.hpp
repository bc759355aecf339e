#pragma once

// Block semidefinite programs in linear-matrix-inequality form:
//
//   maximize (or minimize)  b^T x + b0
//   subject to              S(y) = F0 + sum_a y_a A_a  is PSD, blockwise,
//                           y = offset + T x,
//                           E x = e,
//
// where x holds the free scalars. The coordinates y let a caller describe
// structured coefficient matrices once (for instance one per moment) and
// parametrize them by an affine substitution, which is how linear equations
// such as L_h(y) = 0 are eliminated before the cone is formed.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cpcheck::sdp {

/// One upper-triangle entry (row <= col) of a symmetric block. Off-diagonal
/// entries stand for both (row, col) and (col, row).
struct SymEntry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

enum class Sense { Maximize, Minimize };

struct LinearConstraint {
  std::vector<std::pair<int, double>> terms;  // (free scalar index, coefficient)
  double rhs = 0.0;
};

class ProblemError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SdpProblem {
  std::vector<int> psd_blocks;
  std::vector<std::vector<SymEntry>> coordinates;  // A_a, one list per coordinate
  std::vector<SymEntry> constant;                  // F0
  Eigen::VectorXd offset;                          // one per coordinate
  Eigen::SparseMatrix<double> map;                 // coordinates x free scalars
  Sense sense = Sense::Maximize;
  Eigen::VectorXd objective;  // one per free scalar
  double objective_constant = 0.0;
  std::vector<LinearConstraint> constraints;

  int num_coordinates() const { return static_cast<int>(coordinates.size()); }
  int free_scalars() const { return static_cast<int>(map.cols()); }
  int total_dimension() const {
    int s = 0;
    for (int d : psd_blocks) s += d;
    return s;
  }

  /// Plain LMI: F0 + sum_i x_i F_i >= 0 with one coordinate per free scalar.
  static SdpProblem lmi(std::vector<int> blocks, std::vector<SymEntry> f0, std::vector<std::vector<SymEntry>> fi,
                        Eigen::VectorXd objective, Sense sense = Sense::Maximize) {
    SdpProblem p;
    p.psd_blocks = std::move(blocks);
    p.constant = std::move(f0);
    const auto m = static_cast<int>(fi.size());
    p.coordinates = std::move(fi);
    p.offset = Eigen::VectorXd::Zero(m);
    p.map.resize(m, m);
    p.map.setIdentity();
    p.objective = std::move(objective);
    p.sense = sense;
    p.validate();
    return p;
  }

  void validate() const {
    const auto nb = static_cast<int>(psd_blocks.size());
    for (int d : psd_blocks)
      if (d < 1) throw ProblemError("block dimensions must be positive");
    auto check = [&](const SymEntry& e) {
      if (e.block < 0 || e.block >= nb) throw ProblemError("entry refers to a missing block");
      const int d = psd_blocks[static_cast<std::size_t>(e.block)];
      if (e.row < 0 || e.col < 0 || e.row >= d || e.col >= d) throw ProblemError("entry index outside its block");
      if (e.row > e.col) throw ProblemError("entries must be upper triangular (row <= col)");
      if (!std::isfinite(e.value)) throw ProblemError("non-finite coefficient");
    };
    for (const auto& e : constant) check(e);
    for (const auto& c : coordinates)
      for (const auto& e : c) check(e);
    if (offset.size() != num_coordinates()) throw ProblemError("offset length must equal the coordinate count");
    if (map.rows() != num_coordinates()) throw ProblemError("map rows must equal the coordinate count");
    if (objective.size() != free_scalars()) throw ProblemError("objective length must equal the free scalar count");
    for (const auto& c : constraints)
      for (const auto& [j, v] : c.terms)
        if (j < 0 || j >= free_scalars() || !std::isfinite(v)) throw ProblemError("bad constraint term");
  }

  /// S(y) for given coordinate values.
  std::vector<Eigen::MatrixXd> slack_from_coordinates(const Eigen::VectorXd& y) const {
    std::vector<Eigen::MatrixXd> s;
    s.reserve(psd_blocks.size());
    for (int d : psd_blocks) s.emplace_back(Eigen::MatrixXd::Zero(d, d));
    auto add = [&](const SymEntry& e, double w) {
      auto& m = s[static_cast<std::size_t>(e.block)];
      m(e.row, e.col) += w * e.value;
      if (e.row != e.col) m(e.col, e.row) += w * e.value;
    };
    for (const auto& e : constant) add(e, 1.0);
    for (int a = 0; a < num_coordinates(); ++a) {
      if (y(a) == 0.0) continue;
      for (const auto& e : coordinates[static_cast<std::size_t>(a)]) add(e, y(a));
    }
    return s;
  }

  Eigen::VectorXd coordinates_from_free(const Eigen::VectorXd& x) const { return offset + map * x; }

  std::vector<Eigen::MatrixXd> slack(const Eigen::VectorXd& x) const {
    return slack_from_coordinates(coordinates_from_free(x));
  }

  /// (<A_a, Z>)_a for block matrices Z.
  Eigen::VectorXd coordinate_adjoint(const std::vector<Eigen::MatrixXd>& z) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(num_coordinates());
    for (int a = 0; a < num_coordinates(); ++a) {
      double s = 0.0;
      for (const auto& e : coordinates[static_cast<std::size_t>(a)]) {
        const auto& m = z[static_cast<std::size_t>(e.block)];
        s += e.value * (e.row == e.col ? m(e.row, e.col) : m(e.row, e.col) + m(e.col, e.row));
      }
      g(a) = s;
    }
    return g;
  }

  double constant_inner(const std::vector<Eigen::MatrixXd>& z) const {
    double s = 0.0;
    for (const auto& e : constant) {
      const auto& m = z[static_cast<std::size_t>(e.block)];
      s += e.value * (e.row == e.col ? m(e.row, e.col) : m(e.row, e.col) + m(e.col, e.row));
    }
    return s;
  }
};

enum class SdpStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIter, NumericalFailure };

inline const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "OPTIMAL";
    case SdpStatus::PrimalInfeasible: return "PRIMAL_INFEASIBLE";
    case SdpStatus::DualInfeasible: return "DUAL_INFEASIBLE";
    case SdpStatus::MaxIter: return "MAX_ITER";
    case SdpStatus::NumericalFailure: return "NUMERICAL_FAILURE";
  }
  return "UNKNOWN";
}

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  Eigen::VectorXd x;                       // free scalars
  std::vector<Eigen::MatrixXd> slack;      // S blocks (primal LMI value)
  std::vector<Eigen::MatrixXd> dual;       // Z blocks
  Eigen::VectorXd equality_multipliers;    // one per linear constraint
  double primal_objective = std::numeric_limits<double>::quiet_NaN();
  double dual_objective = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::infinity();  // relative
  double primal_infeasibility = std::numeric_limits<double>::infinity();
  double dual_infeasibility = std::numeric_limits<double>::infinity();
  int iterations = 0;
  int threads = 1;
  // Farkas certificate when PRIMAL_INFEASIBLE: Z >= 0, trace 1, A*(Z) ~ 0
  // and <F0, Z> < 0. When DUAL_INFEASIBLE, ray_x is an improving direction.
  std::vector<Eigen::MatrixXd> ray;
  double ray_objective = 0.0;
  double ray_residual = 0.0;
  Eigen::VectorXd ray_x;
  std::string message;
};

// ---------------------------------------------------------------------------
// Text dump format (one token stream, '#' starts a comment line):
//
//   cpcheck-sdp 1
//   blocks <count> <d_1> ... <d_count>
//   coordinates <N>   free <m>   sense <max|min>
//   objective <b_1> ... <b_m>   constant <b0>
//   offset <y0_1> ... <y0_N>
//   map <nnz>        followed by nnz triplets  <row> <col> <value>
//   F0 <nnz>         followed by nnz entries   <block> <row> <col> <value>
//   coord <a> <nnz>  followed by nnz entries   (only non-empty coordinates)
//   constraints <p>  then per constraint: <nterms> <rhs> and nterms pairs <col> <value>
//   end
//
// Indices are zero-based; numbers are printed with 17 significant digits.
// ---------------------------------------------------------------------------

inline void dump(const SdpProblem& p, std::ostream& out) {
  out << std::setprecision(17);
  out << "cpcheck-sdp 1\n";
  out << "blocks " << p.psd_blocks.size();
  for (int d : p.psd_blocks) out << ' ' << d;
  out << "\ncoordinates " << p.num_coordinates() << " free " << p.free_scalars() << " sense "
      << (p.sense == Sense::Maximize ? "max" : "min") << "\nobjective";
  for (Eigen::Index i = 0; i < p.objective.size(); ++i) out << ' ' << p.objective(i);
  out << " constant " << p.objective_constant << "\noffset";
  for (Eigen::Index i = 0; i < p.offset.size(); ++i) out << ' ' << p.offset(i);
  out << "\nmap " << p.map.nonZeros() << '\n';
  for (int c = 0; c < p.map.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(p.map, c); it; ++it)
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
  auto entries = [&](const std::vector<SymEntry>& es) {
    for (const auto& e : es) out << e.block << ' ' << e.row << ' ' << e.col << ' ' << e.value << '\n';
  };
  out << "F0 " << p.constant.size() << '\n';
  entries(p.constant);
  for (int a = 0; a < p.num_coordinates(); ++a) {
    const auto& es = p.coordinates[static_cast<std::size_t>(a)];
    if (es.empty()) continue;
    out << "coord " << a << ' ' << es.size() << '\n';
    entries(es);
  }
  out << "constraints " << p.constraints.size() << '\n';
  for (const auto& c : p.constraints) {
    out << c.terms.size() << ' ' << c.rhs;
    for (const auto& [j, v] : c.terms) out << ' ' << j << ' ' << v;
    out << '\n';
  }
  out << "end\n";
}

inline SdpProblem load(std::istream& raw) {
  std::stringstream in;
  for (std::string line; std::getline(raw, line);) {
    const auto hash = line.find('#');
    in << (hash == std::string::npos ? line : line.substr(0, hash)) << '\n';
  }
  auto expect = [&](const std::string& word) {
    std::string tok;
    if (!(in >> tok) || tok != word) throw ProblemError("sdp load: expected '" + word + "', got '" + tok + "'");
  };
  auto read = [&](auto& v) {
    if (!(in >> v)) throw ProblemError("sdp load: truncated input");
  };
  SdpProblem p;
  int version = 0;
  expect("cpcheck-sdp");
  read(version);
  if (version != 1) throw ProblemError("sdp load: unsupported version");
  std::size_t nb = 0;
  expect("blocks");
  read(nb);
  p.psd_blocks.resize(nb);
  for (auto& d : p.psd_blocks) read(d);
  int n_coord = 0;
  int m = 0;
  std::string sense;
  expect("coordinates");
  read(n_coord);
  expect("free");
  read(m);
  expect("sense");
  read(sense);
  if (sense != "max" && sense != "min") throw ProblemError("sdp load: sense must be max or min");
  p.sense = sense == "max" ? Sense::Maximize : Sense::Minimize;
  if (n_coord < 0 || m < 0) throw ProblemError("sdp load: negative size");
  expect("objective");
  p.objective.resize(m);
  for (int i = 0; i < m; ++i) read(p.objective(i));
  expect("constant");
  read(p.objective_constant);
  expect("offset");
  p.offset.resize(n_coord);
  for (int i = 0; i < n_coord; ++i) read(p.offset(i));
  std::size_t nnz = 0;
  expect("map");
  read(nnz);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    int r = 0;
    int c = 0;
    double v = 0;
    read(r);
    read(c);
    read(v);
    if (r < 0 || r >= n_coord || c < 0 || c >= m) throw ProblemError("sdp load: map index out of range");
    trip.emplace_back(r, c, v);
  }
  p.map.resize(n_coord, m);
  p.map.setFromTriplets(trip.begin(), trip.end());
  auto read_entries = [&](std::vector<SymEntry>& es, std::size_t count) {
    es.resize(count);
    for (auto& e : es) {
      read(e.block);
      read(e.row);
      read(e.col);
      read(e.value);
    }
  };
  expect("F0");
  read(nnz);
  read_entries(p.constant, nnz);
  p.coordinates.assign(static_cast<std::size_t>(n_coord), {});
  std::string tok;
  while (in >> tok && tok == "coord") {
    int a = 0;
    read(a);
    read(nnz);
    if (a < 0 || a >= n_coord) throw ProblemError("sdp load: coordinate out of range");
    read_entries(p.coordinates[static_cast<std::size_t>(a)], nnz);
  }
  if (tok != "constraints") throw ProblemError("sdp load: expected 'constraints'");
  std::size_t nc = 0;
  read(nc);
  p.constraints.resize(nc);
  for (auto& c : p.constraints) {
    std::size_t nt = 0;
    read(nt);
    read(c.rhs);
    c.terms.resize(nt);
    for (auto& [j, v] : c.terms) {
      read(j);
      read(v);
    }
  }
  expect("end");
  p.validate();
  return p;
}

}  // namespace cpcheck::sdp
