#pragma once

// Membership checks for the completely positive cone: the interior check
// against a reference matrix C in the interior of the cone, and the
// Dickinson-form check against a rank-one base b1 b1^T.

#include "cpcheck/extraction.hpp"
#include "cpcheck/moments.hpp"
#include "cpcheck/refine.hpp"
#include "cpcheck/relaxation.hpp"
#include "cpcheck/sdp/solver.hpp"
#include "cpcheck/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpcheck {

enum class VerdictKind { NotCp, Boundary, Interior, Inconclusive };

inline const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::NotCp: return "NOT_CP";
    case VerdictKind::Boundary: return "BOUNDARY";
    case VerdictKind::Interior: return "INTERIOR";
    case VerdictKind::Inconclusive: return "INCONCLUSIVE";
  }
  return "UNKNOWN";
}

enum class BaseForm { None, InteriorC, RankOne };

inline const char* to_string(BaseForm b) {
  switch (b) {
    case BaseForm::None: return "NONE";
    case BaseForm::InteriorC: return "INTERIOR_C";
    case BaseForm::RankOne: return "RANK_ONE";
  }
  return "UNKNOWN";
}

struct CpDecomposition {
  double base_lambda = 0.0;
  BaseForm base_form = BaseForm::None;
  Eigen::MatrixXd base;  // C, or b1 b1^T; empty when base_form is NONE
  Eigen::VectorXd b1;    // RANK_ONE only
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> atoms;
  double reconstruction_residual = 0.0;  // ||A - base_lambda Base - sum rho b b^T||_inf
  int span_rank = -1;                    // rank of [b1, atoms] in RANK_ONE form
  double measure_residual = 0.0;         // moment fit of the extracted measure
  bool refined = false;                  // atoms polished against A after extraction
};

/// One solved order of the hierarchy.
struct OrderRecord {
  int order = 0;
  RelaxationForm form = RelaxationForm::P2K;
  sdp::SdpStatus status = sdp::SdpStatus::NumericalFailure;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  double seconds = 0.0;
  std::vector<int> ranks;     // rank M_t(y) for t = 0..k
  int flat_order = 0;         // 0 when no flatness
  bool generic_point = false; // flatness came from the fixed-shift re-solve
  std::string note;
};

struct CpVerdict {
  VerdictKind kind = VerdictKind::Inconclusive;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  int order = 0;
  std::optional<int> flat_order;
  std::optional<CpDecomposition> decomposition;
  std::vector<OrderRecord> trace;
  int matrix_rank = -1;
  std::string message;
};

struct CheckOptions {
  int max_order = 4;
  double boundary_tol = 1e-4;
  double rank_tol = kDefaultRankTol;
  double sdpc_tol = kDefaultSdpcTol;
  double decomposition_tol = 1e-4;
  double matrix_rank_tol = 1e-8;
  std::uint64_t seed = 0;
  bool generic_point = true;  // re-solve at a fixed shift when the optimum is not flat
  bool refine = true;         // polish extracted atoms against A before the residual check
  double near_optimal_tol = 1e-6;  // gap and residuals accepted from a stalled solve
  sdp::SdpOptions sdp;
  // Looser than the extraction defaults: moments from a stalled solve are
  // accurate to about 1e-5, and the binding test is the residual against A.
  ExtractionOptions extraction{1e-3, 1e-8, 1e-8, 1e-2};
  std::ostream* log = nullptr;
};

/// Raised when every formulation at some order fails numerically; carries
/// the trace up to and including the failing order.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, std::vector<OrderRecord> trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  std::vector<OrderRecord> trace;
};

/// Number of singular values above tol * sigma_1.
inline int numerical_rank(const Eigen::MatrixXd& a, double tol = 1e-8) {
  if (!(tol > 0)) throw InputError("numerical_rank: tol must be positive");
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const Eigen::VectorXd& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++r;
  return r;
}
inline int numerical_rank(const SymMatrix& a, double tol = 1e-8) { return numerical_rank(a.matrix(), tol); }

/// Assembles A ~ base_lambda * Base + sum rho_i b_i b_i^T and recomputes the
/// residual against A. A nonpositive base_lambda is not a valid CP term, so
/// the base is then omitted and its contribution lands in the residual.
inline CpDecomposition assemble_decomposition(double base_lambda, BaseForm form, const Eigen::MatrixXd& base,
                                              const AtomicMeasure& mu, const SymMatrix& a,
                                              const Eigen::VectorXd& b1 = {}) {
  CpDecomposition d;
  const int n = a.n();
  if (form != BaseForm::None && base_lambda > 0.0) {
    d.base_form = form;
    d.base_lambda = base_lambda;
    d.base = base;
    if (form == BaseForm::RankOne) d.b1 = b1;
  }
  d.weights = mu.weights;
  d.atoms = mu.atoms;
  Eigen::MatrixXd r = a.matrix();
  if (d.base_form != BaseForm::None) r -= d.base_lambda * d.base;
  for (std::size_t i = 0; i < d.atoms.size(); ++i) r -= d.weights[i] * d.atoms[i] * d.atoms[i].transpose();
  d.reconstruction_residual = r.cwiseAbs().maxCoeff();
  if (form == BaseForm::RankOne) {
    Eigen::MatrixXd stacked(n, static_cast<Eigen::Index>(d.atoms.size()) + 1);
    stacked.col(0) = b1;
    for (std::size_t i = 0; i < d.atoms.size(); ++i) stacked.col(static_cast<Eigen::Index>(i) + 1) = d.atoms[i];
    d.span_rank = numerical_rank(stacked, 1e-8);
  }
  return d;
}

inline void validate_interior_reference(const SymMatrix& c) {
  if (!(c.matrix().minCoeff() > 0.0)) throw InputError("C must be entrywise strictly positive");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.matrix(), Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues()(0) > 0.0)) throw InputError("C must be positive definite");
}

namespace detail {

struct ModeSetup {
  ATms a;
  ATms c;
  BaseForm base_form;
  Eigen::MatrixXd base;
  Eigen::VectorXd b1;
  RelaxationForm primary;
};

inline double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// A flat order t of y with its rank, if any.
struct FlatHit {
  int t = 0;
  int rank = 0;
};

inline std::optional<FlatHit> scan_flatness(const Tms& y, int k, const CheckOptions& opts, std::vector<int>* ranks) {
  std::optional<FlatHit> hit;
  if (ranks) ranks->clear();
  for (int t = 1; t <= k; ++t) {
    const FlatnessReport f = check_flatness(y, t, opts.rank_tol, opts.sdpc_tol);
    if (ranks) {
      if (t == 1) ranks->push_back(f.rank_lo);
      ranks->push_back(f.rank_hi);
    }
    if (f.flat && !hit) hit = FlatHit{t, f.rank_hi};
  }
  return hit;
}

/// Extracts a measure from y at the flat order and assembles the
/// decomposition of A at shift lambda. Returns nothing when extraction or
/// the residual check fails.
inline std::optional<CpDecomposition> certify(const Tms& y, const FlatHit& hit, double lambda, const ModeSetup& ms,
                                              const SymMatrix& a, const CheckOptions& opts, std::string& note) {
  AtomicMeasure mu;
  if (hit.rank > 0) {
    try {
      mu = extract_atoms(y, hit.t, hit.rank, opts.seed, opts.extraction);
    } catch (const ExtractionError& e) {
      note = e.what();
      return std::nullopt;
    }
    const MeasureReport rep = verify_measure(y, mu, hit.t);
    mu.residual = rep.residual;
  }
  CpDecomposition d = assemble_decomposition(lambda, ms.base_form, ms.base, mu, a, ms.b1);
  const double measure_residual = mu.residual;
  if (opts.refine && !mu.atoms.empty() && d.reconstruction_residual > 1e-12 * std::max(1.0, a.matrix().cwiseAbs().maxCoeff())) {
    Eigen::MatrixXd target = a.matrix();
    if (d.base_form != BaseForm::None) target -= d.base_lambda * d.base;
    const RefineResult rr = refine_factorization(target, mu.weights, mu.atoms);
    if (rr.residual < d.reconstruction_residual) {
      AtomicMeasure polished;
      polished.weights = rr.weights;
      polished.atoms = rr.atoms;
      d = assemble_decomposition(lambda, ms.base_form, ms.base, polished, a, ms.b1);
      d.refined = true;
    }
  }
  d.measure_residual = measure_residual;
  if (!(d.reconstruction_residual <= opts.decomposition_tol)) {
    note = "reconstruction residual " + std::to_string(d.reconstruction_residual) + " above tolerance";
    return std::nullopt;
  }
  return d;
}

inline RelaxationInstance build_for(RelaxationForm form, const ModeSetup& ms, int k) {
  switch (form) {
    case RelaxationForm::P2K: return build_p2k(ms.a, ms.c, k);
    case RelaxationForm::P2BARK: return build_p2bark(ms.a, ms.b1, k);
    case RelaxationForm::P3K: return build_p3k(ms.a, orth_complement_basis(ms.c), k);
  }
  throw InputError("unknown relaxation form");
}

inline CpVerdict run_hierarchy(const SymMatrix& a, const ModeSetup& ms, bool dickinson, const CheckOptions& opts) {
  if (opts.max_order < 1) throw InputError("max_order must be at least 1");
  if (!(opts.boundary_tol > 0) || !(opts.rank_tol > 0) || !(opts.decomposition_tol > 0))
    throw InputError("tolerances must be positive");
  CpVerdict v;
  const int n = a.n();
  v.matrix_rank = numerical_rank(a, opts.matrix_rank_tol);
  auto say = [&](const std::string& s) {
    if (opts.log) *opts.log << s << '\n' << std::flush;
  };

  for (int k = 1; k <= opts.max_order; ++k) {
    v.order = k;
    OrderRecord rec;
    rec.order = k;
    const auto t0 = std::chrono::steady_clock::now();

    // Primary formulation; the projected form is the fallback when the
    // primary one fails numerically. If neither converges to full accuracy,
    // a solve that stalled close to optimality is accepted and flagged.
    auto stalled = [](const sdp::SdpSolution& s) {
      return s.status == sdp::SdpStatus::NumericalFailure || s.status == sdp::SdpStatus::MaxIter;
    };
    auto near_optimal = [&](const sdp::SdpSolution& s) {
      return stalled(s) && s.gap <= opts.near_optimal_tol && s.primal_infeasibility <= opts.near_optimal_tol &&
             s.dual_infeasibility <= opts.near_optimal_tol;
    };
    RelaxationInstance inst = build_for(ms.primary, ms, k);
    sdp::SdpSolution sol = sdp::solve(inst.problem, opts.sdp);
    if (stalled(sol)) {
      say("order " + std::to_string(k) + ": " + to_string(inst.form) + " " + sdp::to_string(sol.status) + " (" +
          sol.message + "), retrying with P3K");
      RelaxationInstance alt = build_for(RelaxationForm::P3K, ms, k);
      sdp::SdpSolution alt_sol = sdp::solve(alt.problem, opts.sdp);
      const bool take_alt = alt_sol.status == sdp::SdpStatus::Optimal ||
                            (near_optimal(alt_sol) && !(near_optimal(sol) && sol.gap <= alt_sol.gap));
      if (take_alt) {
        inst = std::move(alt);
        sol = std::move(alt_sol);
        rec.note = "primary formulation failed; solved in projected form";
      }
    }
    const bool reduced = near_optimal(sol);
    if (reduced) {
      rec.note += std::string(rec.note.empty() ? "" : "; ") + "accepted at reduced accuracy (gap " +
                  std::to_string(sol.gap) + ")";
    }
    rec.form = inst.form;
    rec.status = sol.status;
    rec.gap = sol.gap;
    rec.iterations = sol.iterations;

    if (sol.status == sdp::SdpStatus::PrimalInfeasible && dickinson) {
      rec.seconds = elapsed(t0);
      v.trace.push_back(rec);
      v.kind = VerdictKind::NotCp;
      v.lambda = -std::numeric_limits<double>::infinity();
      v.message = "relaxation infeasible";
      return v;
    }
    if (sol.status != sdp::SdpStatus::Optimal && !reduced) {
      rec.seconds = elapsed(t0);
      v.trace.push_back(rec);
      throw SolverFailure("order " + std::to_string(k) + ": SDP status " + sdp::to_string(sol.status) + " (" +
                              sol.message + ")",
                          v.trace);
    }
    const Decoded dec = inst.decode_primal(sol);
    rec.lambda = dec.lambda;
    v.lambda = dec.lambda;
    say("order " + std::to_string(k) + ": lambda " + std::to_string(dec.lambda) + " (" + sdp::to_string(sol.status) +
        ", " + std::to_string(sol.iterations) + " iterations)");

    if (dec.lambda < -opts.boundary_tol) {
      rec.seconds = elapsed(t0);
      v.trace.push_back(rec);
      v.kind = VerdictKind::NotCp;
      v.message = "shift bound negative";
      return v;
    }

    // Boundary when the shift vanishes, or in Dickinson form when A is
    // singular; interior otherwise.
    auto finish = [&](const CpDecomposition& d, int t, bool generic) {
      rec.flat_order = t;
      rec.generic_point = generic;
      rec.seconds = elapsed(t0);
      v.trace.push_back(rec);
      const bool boundary = std::abs(dec.lambda) <= opts.boundary_tol || (dickinson && v.matrix_rank < n);
      v.kind = boundary ? VerdictKind::Boundary : VerdictKind::Interior;
      v.flat_order = t;
      v.decomposition = d;
      v.message = generic ? "flat at a generic point of the optimal shift" : "flat optimum";
      return v;
    };

    std::string note;
    if (auto hit = scan_flatness(dec.y, k, opts, &rec.ranks)) {
      if (auto d = certify(dec.y, *hit, dec.lambda, ms, a, opts, note)) return finish(*d, hit->t, false);
    }

    if (opts.generic_point) {
      // The optimal moment sequence of an interior point method sits in the
      // relative interior of the optimal face, which is rarely flat when the
      // optimum is not unique. Re-solve just inside the optimal shift with a
      // random linear objective to land on an extreme point.
      const double delta = std::max(1e-6, 10.0 * sol.gap) * (1.0 + std::abs(dec.lambda));
      const double shifted = dec.lambda - delta;
      RelaxationInstance gp = build_generic_point(ms.a, ms.c, shifted, k, opts.seed, inst.form);
      const sdp::SdpSolution gs = sdp::solve(gp.problem, opts.sdp);
      // Only the primal point matters here: the extracted measure is
      // verified on its own, so a stalled dual is acceptable.
      const bool usable = gs.status == sdp::SdpStatus::Optimal ||
                          ((gs.status == sdp::SdpStatus::NumericalFailure || gs.status == sdp::SdpStatus::MaxIter) &&
                           gs.primal_infeasibility <= opts.sdp.feas_tol && gs.gap <= 1e-6);
      if (usable) {
        const Decoded gd = gp.decode_primal(gs);
        std::vector<int> granks;
        if (auto hit = scan_flatness(gd.y, k, opts, &granks)) {
          if (auto d = certify(gd.y, *hit, shifted, ms, a, opts, note)) {
            rec.ranks = granks;
            return finish(*d, hit->t, true);
          }
        }
      } else {
        note = std::string("generic point solve ") + sdp::to_string(gs.status);
      }
    }
    rec.note = rec.note.empty() ? note : rec.note + "; " + note;
    rec.seconds = elapsed(t0);
    v.trace.push_back(rec);
  }
  v.kind = VerdictKind::Inconclusive;
  v.message = "order limit reached without flatness";
  return v;
}

}  // namespace detail

inline CpVerdict check_interior(const SymMatrix& a, const SymMatrix& c, const CheckOptions& opts = {}) {
  if (a.n() != c.n()) throw DimensionError("check_interior: A and C sizes differ");
  validate_interior_reference(c);
  detail::ModeSetup ms{identify(a), identify(c), BaseForm::InteriorC, c.matrix(), {}, RelaxationForm::P2K};
  return detail::run_hierarchy(a, ms, false, opts);
}

inline CpVerdict check_interior(const SymMatrix& a, const CheckOptions& opts = {}) {
  const int n = a.n();
  return check_interior(a, SymMatrix(Eigen::MatrixXd::Identity(n, n) + Eigen::MatrixXd::Ones(n, n)), opts);
}

inline CpVerdict check_dickinson(const SymMatrix& a, const Eigen::VectorXd& b1, const CheckOptions& opts = {}) {
  if (b1.size() != a.n()) throw DimensionError("check_dickinson: b1 length must equal n");
  for (Eigen::Index i = 0; i < b1.size(); ++i)
    if (!(b1(i) > 0.0)) throw InputError("check_dickinson: b1 must be strictly positive");
  const SymMatrix base = SymMatrix::outer(b1);
  detail::ModeSetup ms{identify(a), identify(base), BaseForm::RankOne, base.matrix(), b1, RelaxationForm::P2BARK};
  return detail::run_hierarchy(a, ms, true, opts);
}

inline CpVerdict check_dickinson(const SymMatrix& a, const CheckOptions& opts = {}) {
  return check_dickinson(a, Eigen::VectorXd::Ones(a.n()), opts);
}

}  // namespace cpcheck
