// Acceptance checks: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance <id>...    run the listed criteria (1..7)
//
// The exit status is nonzero when any selected criterion fails.

#include "cpcheck/checker.hpp"
#include "cpcheck/extraction.hpp"
#include "cpcheck/instances.hpp"
#include "cpcheck/relaxation.hpp"
#include "cpcheck/sdp/kkt.hpp"
#include "cpcheck/sdp/solver.hpp"
#include "random_sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace cpcheck;

namespace {

struct CriterionResult {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

Eigen::VectorXd pair_atom(int n, int i, int j) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(i) = b(j) = std::sqrt(0.5);
  return b;
}

// Greedy one-to-one matching of computed terms to expected ones. Returns the
// largest atom distance and weight error, or infinity on a size mismatch.
struct TermMatch {
  double atom = std::numeric_limits<double>::infinity();
  double weight = std::numeric_limits<double>::infinity();
};

TermMatch match_terms(const std::vector<Eigen::VectorXd>& want_atoms, const std::vector<double>& want_weights,
                      const std::vector<Eigen::VectorXd>& got_atoms, const std::vector<double>& got_weights) {
  TermMatch m;
  if (want_atoms.size() != got_atoms.size()) return m;
  m.atom = m.weight = 0.0;
  std::vector<bool> used(got_atoms.size(), false);
  for (std::size_t i = 0; i < want_atoms.size(); ++i) {
    std::size_t best = 0;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < got_atoms.size(); ++j) {
      if (used[j]) continue;
      const double dj = (want_atoms[i] - got_atoms[j]).norm();
      if (dj < d) {
        d = dj;
        best = j;
      }
    }
    used[best] = true;
    m.atom = std::max(m.atom, d);
    m.weight = std::max(m.weight, std::abs(want_weights[i] - got_weights[best]));
  }
  return m;
}

// Every finite lambda in the trace is at most its predecessor plus tol.
bool monotone(const std::vector<OrderRecord>& trace, double tol) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (std::isfinite(trace[i].lambda) && std::isfinite(trace[i - 1].lambda) &&
        trace[i].lambda > trace[i - 1].lambda + tol)
      return false;
  return true;
}

CriterionResult dnn_5x5_is_not_cp() {
  const auto t0 = Clock::now();
  const CpVerdict v = check_interior(instances::not_cp_5x5());
  const double secs = seconds_since(t0);
  CriterionResult r;
  r.pass = v.kind == VerdictKind::NotCp && v.order == 1 && std::abs(v.lambda + 0.3982) <= 0.01 && secs <= 10.0;
  r.detail = std::string(to_string(v.kind)) + " at k=" + std::to_string(v.order) + ", lambda=" + num(v.lambda) +
             " (target NOT_CP at k=1, lambda=-0.3982+-0.01), " + num(secs) + " s";
  if (!v.trace.empty()) r.detail += "; lambda at k=1 is " + num(v.trace.front().lambda);
  return r;
}

CriterionResult seven_cycle_is_boundary() {
  const SymMatrix a = instances::boundary_7x7();
  const auto t0 = Clock::now();
  const CpVerdict v = check_interior(a);
  const double secs = seconds_since(t0);
  CriterionResult r;
  r.detail = std::string(to_string(v.kind)) + " at k=" + std::to_string(v.order) + ", lambda=" + num(v.lambda);
  if (v.kind != VerdictKind::Boundary || !v.decomposition || v.order > 4) return r;
  const auto& d = *v.decomposition;
  std::vector<Eigen::VectorXd> want;
  for (int i = 0; i < 7; ++i) want.push_back(pair_atom(7, i, (i + 1) % 7));
  const TermMatch m = match_terms(want, std::vector<double>(7, 2.0), d.atoms, d.weights);
  r.pass = std::abs(v.lambda) < 1e-4 && d.atoms.size() == 7 && m.atom <= 0.01 && m.weight <= 0.01 &&
           d.reconstruction_residual <= 1e-4 && secs <= 600.0;
  r.detail += ", " + std::to_string(d.atoms.size()) + " atoms, atom err " + num(m.atom) + ", weight err " +
              num(m.weight) + ", residual " + num(d.reconstruction_residual) + ", " + num(secs) + " s";
  return r;
}

CriterionResult six_by_six_is_interior() {
  const SymMatrix a = instances::interior_6x6();
  const SymMatrix c = instances::default_reference(6);
  const auto t0 = Clock::now();
  const CpVerdict v = check_interior(a, c);
  const double secs = seconds_since(t0);
  CriterionResult r;
  r.detail = std::string(to_string(v.kind)) + " at k=" + std::to_string(v.order) + ", lambda=" + num(v.lambda);
  if (v.kind != VerdictKind::Interior || !v.decomposition) return r;
  const auto& d = *v.decomposition;
  // Residual recomputed here against A - lambda C, with lambda the reported shift.
  Eigen::MatrixXd res = a.matrix() - d.base_lambda * c.matrix();
  for (std::size_t i = 0; i < d.atoms.size(); ++i) res -= d.weights[i] * d.atoms[i] * d.atoms[i].transpose();
  const double resid = res.cwiseAbs().maxCoeff();
  r.pass = v.order <= 3 && std::abs(v.lambda - 0.0726) <= 1e-3 && std::abs(d.base_lambda - 0.0726) <= 1e-3 &&
           resid <= 1e-4 && secs <= 120.0;
  r.detail += ", base weight " + num(d.base_lambda) + ", " + std::to_string(d.atoms.size()) + " atoms, residual " +
              num(resid) + ", " + num(secs) + " s";
  return r;
}

CriterionResult dickinson_check(const SymMatrix& a, const std::vector<Eigen::VectorXd>& atoms,
                                const std::vector<double>& weights) {
  const auto t0 = Clock::now();
  const CpVerdict v = check_dickinson(a);
  const double secs = seconds_since(t0);
  CriterionResult r;
  r.detail = std::string(to_string(v.kind)) + " at k=" + std::to_string(v.order) + ", lambda=" + num(v.lambda);
  if (v.kind != VerdictKind::Interior || !v.decomposition) return r;
  const auto& d = *v.decomposition;
  const TermMatch m = match_terms(atoms, weights, d.atoms, d.weights);
  r.pass = std::abs(v.lambda - 1.0) <= 1e-3 && d.base_form == BaseForm::RankOne &&
           std::abs(d.base_lambda - 1.0) <= 0.01 && m.weight <= 0.01 && m.atom <= 0.01 &&
           d.reconstruction_residual <= 1e-4;
  r.detail += ", base weight " + num(d.base_lambda) + ", " + std::to_string(d.atoms.size()) +
              " atoms, weight err " + num(m.weight) + ", atom err " + num(m.atom) + ", residual " +
              num(d.reconstruction_residual) + ", " + num(secs) + " s";
  return r;
}

CriterionResult six_by_six_dickinson() {
  const std::vector<Eigen::VectorXd> atoms{
      Eigen::Vector<double, 6>(0, 1, 2, 0, 0, 0).normalized(), Eigen::Vector<double, 6>(0, 0, 1, 3, 0, 0).normalized(),
      Eigen::Vector<double, 6>(0, 0, 0, 0, 2, 1).normalized(), Eigen::Vector<double, 6>(1, 0, 0, 0, 0, 1).normalized(),
      Eigen::Vector<double, 6>(0, 0, 0, 1, 2, 0).normalized()};
  return dickinson_check(instances::interior_6x6(), atoms, {5, 10, 5, 2, 5});
}

CriterionResult five_by_five_dickinson() {
  const std::vector<Eigen::VectorXd> atoms{pair_atom(5, 1, 2), pair_atom(5, 2, 3), pair_atom(5, 3, 4),
                                           pair_atom(5, 0, 4)};
  return dickinson_check(instances::interior_5x5(), atoms, {2, 8, 2, 2});
}

CriterionResult property_suite() {
  std::mt19937_64 rng(20261015);
  std::vector<std::string> failures;
  std::vector<std::vector<OrderRecord>> traces;
  const auto t0 = Clock::now();

  // (a) interior generator
  int interior_ok = 0;
  std::vector<std::pair<SymMatrix, double>> shift_cases;
  for (int i = 0; i < 50; ++i) {
    const int n = 3 + i % 3;
    const SymMatrix a = instances::random_interior(n, rng);
    try {
      const CpVerdict v = check_interior(a);
      traces.push_back(v.trace);
      if (v.kind == VerdictKind::Interior && v.decomposition && v.decomposition->reconstruction_residual <= 1e-4)
        ++interior_ok;
      if (v.kind == VerdictKind::Interior && n <= 4 && shift_cases.size() < 10) shift_cases.emplace_back(a, v.lambda);
    } catch (const SolverFailure& e) {
      traces.push_back(e.trace);
    }
  }
  if (interior_ok != 50) failures.push_back("(a) " + std::to_string(interior_ok) + "/50 interior");

  // (b) negative eigenvalue or negative entry
  int not_cp_ok = 0;
  for (int i = 0; i < 50; ++i) {
    const SymMatrix a = instances::random_not_cp(3 + i % 3, rng);
    try {
      const CpVerdict v = check_interior(a);
      traces.push_back(v.trace);
      if (v.kind == VerdictKind::NotCp && !v.decomposition) ++not_cp_ok;
    } catch (const SolverFailure& e) {
      traces.push_back(e.trace);
    }
  }
  if (not_cp_ok != 50) failures.push_back("(b) " + std::to_string(not_cp_ok) + "/50 not CP");

  // (c) extraction round trip
  int round_trip_ok = 0;
  std::uniform_int_distribution<int> dim(2, 5), count(1, 5);
  for (int i = 0; i < 100; ++i) {
    const int n = dim(rng), r = count(rng);
    const auto m = instances::random_measure(n, r, rng);
    const Tms v = tms_from_measure(n, 2 * r, m.atoms, m.weights);
    try {
      const AtomicMeasure mu = extract_atoms(v, r, r, static_cast<std::uint64_t>(i));
      const TermMatch tm = match_terms(m.atoms, m.weights, mu.atoms, mu.weights);
      if (tm.atom <= 1e-6 && tm.weight <= 1e-6) ++round_trip_ok;
    } catch (const std::exception&) {
    }
  }
  if (round_trip_ok != 100) failures.push_back("(c) " + std::to_string(round_trip_ok) + "/100 round trips");

  // (d) monotone traces over every check above
  int monotone_ok = 0;
  for (const auto& t : traces) monotone_ok += monotone(t, 1e-6) ? 1 : 0;
  if (monotone_ok != static_cast<int>(traces.size()))
    failures.push_back("(d) " + std::to_string(monotone_ok) + "/" + std::to_string(traces.size()) + " monotone");

  // (e) scaling covariance of each order's value, relative to max(1, |lambda|)
  int scaling_ok = 0, scaling_total = 0;
  for (int i = 0; i < 5; ++i) {
    const int n = 3 + i % 2;
    const SymMatrix a = i % 2 ? instances::random_interior(n, rng) : instances::random_not_cp(n, rng);
    const ATms c = identify(instances::default_reference(n));
    for (int k = 1; k <= 2; ++k) {
      const RelaxationResult base = solve_relaxation(build_p2k(identify(a), c, k));
      for (double t : {0.5, 2.0, 10.0}) {
        ++scaling_total;
        const RelaxationResult sc = solve_relaxation(build_p2k(identify(t * a), c, k));
        if (base.decoded && sc.decoded &&
            std::abs(sc.decoded->lambda - t * base.decoded->lambda) <=
                1e-6 * t * std::max(1.0, std::abs(base.decoded->lambda)))
          ++scaling_ok;
      }
    }
  }
  if (scaling_ok != scaling_total)
    failures.push_back("(e) " + std::to_string(scaling_ok) + "/" + std::to_string(scaling_total) + " scaled");

  // (f) boundary shift
  int shift_ok = 0;
  for (const auto& [a, lambda] : shift_cases) {
    const SymMatrix c = instances::default_reference(a.n());
    try {
      const CpVerdict v = check_interior(a - lambda * c, c);
      if (v.kind == VerdictKind::Boundary) ++shift_ok;
    } catch (const SolverFailure&) {
    }
  }
  if (shift_ok != 10 || shift_cases.size() != 10)
    failures.push_back("(f) " + std::to_string(shift_ok) + "/" + std::to_string(shift_cases.size()) + " boundary");

  CriterionResult r;
  r.pass = failures.empty();
  r.detail = "(a) " + std::to_string(interior_ok) + "/50, (b) " + std::to_string(not_cp_ok) + "/50, (c) " +
             std::to_string(round_trip_ok) + "/100, (d) " + std::to_string(monotone_ok) + "/" +
             std::to_string(traces.size()) + ", (e) " + std::to_string(scaling_ok) + "/" +
             std::to_string(scaling_total) + ", (f) " + std::to_string(shift_ok) + "/" +
             std::to_string(shift_cases.size()) + ", " + num(seconds_since(t0)) + " s";
  for (const auto& f : failures) r.detail += "; FAILED " + f;
  return r;
}

CriterionResult solver_suite() {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> nblocks(1, 3), dim(1, 30), vars(1, 30);
  int ok = 0;
  double worst_rel = 0.0, worst_kkt = 0.0;
  for (int i = 0; i < 20; ++i) {
    std::vector<int> blocks;
    for (int b = nblocks(rng); b > 0; --b) blocks.push_back(dim(rng));
    const auto planted = testing::planted_sdp(blocks, vars(rng), rng);
    const sdp::SdpSolution s = sdp::solve(planted.problem);
    const double rel = std::abs(s.primal_objective - planted.optimum) / std::max(1.0, std::abs(planted.optimum));
    const double kkt = sdp::verify_kkt(planted.problem, s).worst();
    worst_rel = std::max(worst_rel, rel);
    worst_kkt = std::max(worst_kkt, kkt);
    if (s.status == sdp::SdpStatus::Optimal && rel <= 1e-6 && kkt <= 1e-7) ++ok;
  }

  // min tr X over 2x2 X >= 0 with X11 + X22 = 2, X12 = 3.
  sdp::SdpProblem q;
  q.psd_blocks = {2};
  q.coordinates = {{{0, 0, 0, 1}}, {{0, 0, 1, 1}}, {{0, 1, 1, 1}}};
  q.offset = Eigen::Vector3d(0, 3, 2);
  q.map.resize(3, 1);
  q.map.insert(0, 0) = 1;
  q.map.insert(2, 0) = -1;
  q.objective = Eigen::VectorXd::Zero(1);
  q.objective_constant = 2.0;
  q.sense = sdp::Sense::Minimize;
  const sdp::SdpSolution inf = sdp::solve(q);

  CriterionResult r;
  r.pass = ok == 20 && inf.status == sdp::SdpStatus::PrimalInfeasible;
  r.detail = std::to_string(ok) + "/20 planted SDPs, worst rel err " + num(worst_rel) + ", worst KKT " +
             num(worst_kkt) + "; infeasible instance " + sdp::to_string(inf.status);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<std::string, std::function<CriterionResult()>>> criteria{
      {1, {"5x5 doubly nonnegative matrix is NOT_CP at order 1", dnn_5x5_is_not_cp}},
      {2, {"7-cycle matrix is BOUNDARY with seven (e_i+e_j)/sqrt2 atoms", seven_cycle_is_boundary}},
      {3, {"6x6 matrix is INTERIOR with lambda 0.0726", six_by_six_is_interior}},
      {4, {"6x6 matrix in Dickinson form", six_by_six_dickinson}},
      {5, {"5x5 matrix in Dickinson form", five_by_five_dickinson}},
      {6, {"property suite", property_suite}},
      {7, {"solver suite", solver_suite}},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (!criteria.count(id)) {
      std::cerr << "unknown criterion " << argv[i] << '\n';
      return 2;
    }
    selected.push_back(id);
  }
  if (selected.empty())
    for (const auto& [id, _] : criteria) selected.push_back(id);

  int failed = 0;
  for (int id : selected) {
    const auto& [name, fn] = criteria.at(id);
    CriterionResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << name << " -- " << r.detail << std::endl;
    failed += r.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
