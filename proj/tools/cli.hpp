#pragma once

// Command-line front end: matrix and vector input, report formatting, exit
// codes, and the reference-instance table.

#include "cpcheck/checker.hpp"
#include "cpcheck/instances.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpcheck::cli {

enum ExitCode : int {
  kInterior = 0,
  kBoundary = 1,
  kNotCp = 2,
  kInconclusive = 3,
  kInputError = 10,
  kSolverError = 11,
  kVerifyError = 12,
  kInternalError = 13,
};

inline int exit_code(VerdictKind k) {
  switch (k) {
    case VerdictKind::Interior: return kInterior;
    case VerdictKind::Boundary: return kBoundary;
    case VerdictKind::NotCp: return kNotCp;
    case VerdictKind::Inconclusive: return kInconclusive;
  }
  return kInternalError;
}

struct RunConfig {
  std::string mode = "interior";  // interior | dickinson
  int max_order = 4;
  double boundary_tol = 1e-4;
  double rank_tol = 1e-6;
  double sdp_gap_tol = 1e-8;
  double sdp_feas_tol = 1e-8;
  std::uint64_t seed = 0;
  bool verify = false;
  bool timings = false;
  std::string format = "text";  // text | json
  std::string input;
  std::string matrix_c;
  std::string b1;

  void validate() const {
    if (mode != "interior" && mode != "dickinson") throw InputError("--mode must be interior or dickinson");
    if (format != "text" && format != "json") throw InputError("--format must be text or json");
    if (max_order < 1) throw InputError("--max-order must be at least 1");
    if (!(boundary_tol > 0) || !(rank_tol > 0) || !(sdp_gap_tol > 0) || !(sdp_feas_tol > 0))
      throw InputError("tolerances must be positive");
    if (mode == "interior" && !b1.empty()) throw InputError("--b1 applies to dickinson mode only");
    if (mode == "dickinson" && !matrix_c.empty()) throw InputError("--matrix-C applies to interior mode only");
  }

  CheckOptions options() const {
    CheckOptions o;
    o.max_order = max_order;
    o.boundary_tol = boundary_tol;
    o.rank_tol = rank_tol;
    o.seed = seed;
    o.sdp.gap_tol = sdp_gap_tol;
    o.sdp.feas_tol = sdp_feas_tol;
    return o;
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool looks_like_json(const std::string& s) {
  const auto p = s.find_first_not_of(" \t\r\n");
  return p != std::string::npos && (s[p] == '{' || s[p] == '[');
}

/// Plain text "n a11 a12 ... ann" (row-major), or {"n": n, "rows": [[...], ...]}.
inline SymMatrix parse_matrix_string(const std::string& text) {
  Eigen::MatrixXd m;
  if (looks_like_json(text)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed JSON matrix: ") + e.what());
    }
    if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array())
      throw InputError("JSON matrix needs a \"rows\" array");
    const auto& rows = j["rows"];
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (j.contains("n") && (!j["n"].is_number_integer() || j["n"].get<Eigen::Index>() != n))
      throw InputError("JSON matrix: \"n\" does not match the number of rows");
    if (n < 1) throw InputError("JSON matrix: no rows");
    m.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = rows[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
        throw InputError("JSON matrix: row " + std::to_string(i + 1) + " does not have n entries");
      for (Eigen::Index c = 0; c < n; ++c) {
        const auto& v = row[static_cast<std::size_t>(c)];
        if (!v.is_number()) throw InputError("JSON matrix: non-numeric entry");
        m(i, c) = v.get<double>();
      }
    }
  } else {
    std::istringstream in(text);
    long long n = 0;
    if (!(in >> n) || n < 1) throw InputError("text matrix: expected a positive dimension first");
    m.resize(n, n);
    for (long long i = 0; i < n; ++i)
      for (long long c = 0; c < n; ++c)
        if (!(in >> m(i, c))) throw InputError("text matrix: expected " + std::to_string(n * n) + " entries");
    std::string extra;
    if (in >> extra) throw InputError("text matrix: trailing data after " + std::to_string(n * n) + " entries");
  }
  return SymMatrix(m);
}

inline SymMatrix parse_matrix(const std::string& path) { return parse_matrix_string(read_file(path)); }

/// Plain text "n v1 ... vn", a JSON array, or {"n": n, "values": [...]}.
inline Eigen::VectorXd parse_vector_string(const std::string& text) {
  std::vector<double> vals;
  if (looks_like_json(text)) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed JSON vector: ") + e.what());
    }
    const nlohmann::json* arr = &j;
    if (j.is_object()) {
      if (!j.contains("values")) throw InputError("JSON vector needs a \"values\" array");
      arr = &j["values"];
    }
    if (!arr->is_array()) throw InputError("JSON vector: expected an array");
    for (const auto& v : *arr) {
      if (!v.is_number()) throw InputError("JSON vector: non-numeric entry");
      vals.push_back(v.get<double>());
    }
    if (j.is_object() && j.contains("n") && j["n"].get<std::size_t>() != vals.size())
      throw InputError("JSON vector: \"n\" does not match the number of values");
  } else {
    std::istringstream in(text);
    long long n = 0;
    if (!(in >> n) || n < 1) throw InputError("text vector: expected a positive length first");
    vals.resize(static_cast<std::size_t>(n));
    for (auto& v : vals)
      if (!(in >> v)) throw InputError("text vector: expected " + std::to_string(n) + " entries");
    std::string extra;
    if (in >> extra) throw InputError("text vector: trailing data");
  }
  if (vals.empty()) throw InputError("empty vector");
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

inline Eigen::VectorXd parse_vector(const std::string& path) { return parse_vector_string(read_file(path)); }

/// Six significant digits, with -0 printed as 0.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) x = 0.0;
  std::ostringstream os;
  os << std::setprecision(6) << x;
  return os.str();
}

inline nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// JSON numbers must be finite; infinities become strings.
inline nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  return fmt(x);
}

struct VerifyReport {
  double recomputed = 0.0;
  double recorded = 0.0;
  bool ok = true;
};

/// Recomputes the reconstruction residual entry by entry, without Eigen
/// products, and compares it with the recorded one.
inline VerifyReport verify_decomposition(const SymMatrix& a, const CpDecomposition& d, double tol) {
  VerifyReport r;
  r.recorded = d.reconstruction_residual;
  const int n = a.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = a(i, j);
      if (d.base_form != BaseForm::None) s -= d.base_lambda * d.base(i, j);
      for (std::size_t k = 0; k < d.atoms.size(); ++k) s -= d.weights[k] * d.atoms[k](i) * d.atoms[k](j);
      r.recomputed = std::max(r.recomputed, std::abs(s));
    }
  r.ok = r.recomputed <= 10.0 * tol && std::abs(r.recomputed - r.recorded) <= 10.0 * tol;
  for (std::size_t k = 0; k < d.atoms.size(); ++k) r.ok = r.ok && d.weights[k] > 0.0 && membership_K(d.atoms[k], 1e-6);
  return r;
}

inline nlohmann::json report_json(const CpVerdict& v, const RunConfig& cfg, int n,
                                  const std::optional<VerifyReport>& ver) {
  nlohmann::json j;
  j["mode"] = cfg.mode;
  j["n"] = n;
  j["verdict"] = to_string(v.kind);
  j["lambda"] = number(v.lambda);
  j["order"] = v.order;
  j["flat_order"] = v.flat_order ? nlohmann::json(*v.flat_order) : nlohmann::json(nullptr);
  j["matrix_rank"] = v.matrix_rank;
  j["message"] = v.message;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& r : v.trace) {
    nlohmann::json t;
    t["order"] = r.order;
    t["form"] = to_string(r.form);
    t["status"] = sdp::to_string(r.status);
    t["lambda"] = number(r.lambda);
    t["gap"] = number(r.gap);
    t["iterations"] = r.iterations;
    t["ranks"] = r.ranks;
    t["flat_order"] = r.flat_order;
    t["generic_point"] = r.generic_point;
    if (!r.note.empty()) t["note"] = r.note;
    if (cfg.timings) t["seconds"] = r.seconds;
    trace.push_back(t);
  }
  j["trace"] = trace;
  if (v.decomposition) {
    const auto& d = *v.decomposition;
    nlohmann::json dj;
    nlohmann::json base;
    base["form"] = to_string(d.base_form);
    base["weight"] = d.base_lambda;
    if (d.base_form == BaseForm::RankOne) base["vector"] = to_json(d.b1);
    dj["base"] = base;
    nlohmann::json atoms = nlohmann::json::array();
    for (std::size_t i = 0; i < d.atoms.size(); ++i) atoms.push_back({{"weight", d.weights[i]}, {"vector", to_json(d.atoms[i])}});
    dj["atoms"] = atoms;
    dj["reconstruction_residual"] = d.reconstruction_residual;
    dj["measure_residual"] = d.measure_residual;
    dj["refined"] = d.refined;
    if (d.span_rank >= 0) dj["span_rank"] = d.span_rank;
    j["decomposition"] = dj;
  } else {
    j["decomposition"] = nullptr;
  }
  if (ver) j["verify"] = {{"recomputed_residual", ver->recomputed}, {"ok", ver->ok}};
  return j;
}

inline std::string vec_text(const Eigen::VectorXd& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v(i));
  return s + ")";
}

inline void report_text(std::ostream& out, const CpVerdict& v, const RunConfig& cfg,
                        const std::optional<VerifyReport>& ver) {
  out << "verdict: " << to_string(v.kind) << '\n';
  out << "lambda: " << fmt(v.lambda) << '\n';
  out << "order: " << v.order << '\n';
  out << "flat order: " << (v.flat_order ? std::to_string(*v.flat_order) : std::string("-")) << '\n';
  out << "rank(A): " << v.matrix_rank << '\n';
  out << "message: " << v.message << '\n';
  out << "trace:\n";
  for (const auto& r : v.trace) {
    out << "  k=" << r.order << ' ' << to_string(r.form) << ' ' << sdp::to_string(r.status) << " lambda=" << fmt(r.lambda)
        << " gap=" << fmt(r.gap) << " iterations=" << r.iterations;
    if (!r.ranks.empty()) {
      out << " ranks=";
      for (std::size_t i = 0; i < r.ranks.size(); ++i) out << (i ? "," : "") << r.ranks[i];
    }
    if (r.flat_order) out << " flat_at=" << r.flat_order << (r.generic_point ? " (generic point)" : "");
    if (cfg.timings) out << " seconds=" << fmt(r.seconds);
    if (!r.note.empty()) out << " [" << r.note << ']';
    out << '\n';
  }
  if (v.decomposition) {
    const auto& d = *v.decomposition;
    out << "decomposition:\n";
    if (d.base_form == BaseForm::InteriorC) out << "  base: " << fmt(d.base_lambda) << " * C\n";
    if (d.base_form == BaseForm::RankOne) out << "  base: " << fmt(d.base_lambda) << " * b1 b1^T, b1 = " << vec_text(d.b1) << '\n';
    for (std::size_t i = 0; i < d.atoms.size(); ++i)
      out << "  rho=" << fmt(d.weights[i]) << " b=" << vec_text(d.atoms[i]) << '\n';
    out << "  reconstruction residual: " << fmt(d.reconstruction_residual) << '\n';
    if (d.span_rank >= 0) out << "  span rank: " << d.span_rank << '\n';
  }
  if (ver) out << "verify: " << (ver->ok ? "ok" : "FAILED") << " (recomputed residual " << fmt(ver->recomputed) << ")\n";
}

/// Runs one check and writes the report. Errors go to `err` with a code >= 10.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    if (cfg.input.empty()) throw InputError("no input matrix given");
    const SymMatrix a = parse_matrix(cfg.input);
    const CheckOptions opts = cfg.options();
    CpVerdict v;
    if (cfg.mode == "interior") {
      const SymMatrix c = cfg.matrix_c.empty() ? instances::default_reference(a.n()) : parse_matrix(cfg.matrix_c);
      v = check_interior(a, c, opts);
    } else {
      const Eigen::VectorXd b1 = cfg.b1.empty() ? Eigen::VectorXd::Ones(a.n()) : parse_vector(cfg.b1);
      v = check_dickinson(a, b1, opts);
    }
    std::optional<VerifyReport> ver;
    if (cfg.verify && v.decomposition) ver = verify_decomposition(a, *v.decomposition, CheckOptions{}.decomposition_tol);
    if (cfg.format == "json")
      out << report_json(v, cfg, a.n(), ver).dump(2) << '\n';
    else
      report_text(out, v, cfg, ver);
    if (ver && !ver->ok) {
      err << "error: independent residual check failed (recomputed " << fmt(ver->recomputed) << ", recorded "
          << fmt(ver->recorded) << ")\n";
      return kVerifyError;
    }
    return exit_code(v.kind);
  } catch (const SolverFailure& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& r : e.trace)
      err << "  k=" << r.order << ' ' << to_string(r.form) << ' ' << sdp::to_string(r.status)
          << " lambda=" << fmt(r.lambda) << '\n';
    return kSolverError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternalError;
  }
}

// ---------------------------------------------------------------------------
// Reference instances with published values.

struct ReferenceCase {
  std::string id;
  std::string mode;
  SymMatrix a;
  std::string expected_verdict;
  double expected_lambda;
  std::string published;
};

inline std::vector<ReferenceCase> reference_cases() {
  return {
      {"dnn-5x5", "interior", instances::not_cp_5x5(), "NOT_CP", -0.3982, "NOT_CP, k=1, lambda=-0.3982"},
      {"cycle-7x7", "interior", instances::boundary_7x7(), "BOUNDARY", 0.0, "BOUNDARY, k=4, |lambda|=2.08e-08, 7 atoms"},
      {"interior-6x6", "interior", instances::interior_6x6(), "INTERIOR", 0.0726, "INTERIOR, k=3, lambda=0.0726, 7 atoms"},
      {"interior-6x6", "dickinson", instances::interior_6x6(), "INTERIOR", 1.0, "INTERIOR, k=3, lambda=1.0000, 6 terms"},
      {"interior-5x5", "dickinson", instances::interior_5x5(), "INTERIOR", 1.0, "INTERIOR, k=3, lambda=1.0000, 5 terms"},
  };
}

/// Runs every reference case with default options and prints one row each.
/// The status column flags verdict mismatches and lambda deviations above 1e-3.
inline int reproduce_examples(std::ostream& out, bool timings = false) {
  out << std::left << std::setw(14) << "instance" << std::setw(11) << "mode" << std::setw(14) << "verdict"
      << std::setw(14) << "lambda" << std::setw(7) << "order" << std::setw(7) << "terms" << std::setw(13)
      << "residual";
  if (timings) out << std::setw(10) << "seconds";
  out << std::setw(10) << "status" << "published\n";
  int mismatches = 0;
  for (const auto& rc : reference_cases()) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string verdict, lambda = "-", order = "-", terms = "-", residual = "-";
    bool match = false;
    try {
      const CpVerdict v = rc.mode == "interior" ? check_interior(rc.a) : check_dickinson(rc.a);
      verdict = to_string(v.kind);
      lambda = fmt(v.lambda);
      order = std::to_string(v.order);
      if (v.decomposition) {
        const auto& d = *v.decomposition;
        terms = std::to_string(d.atoms.size() + (d.base_form != BaseForm::None ? 1 : 0));
        residual = fmt(d.reconstruction_residual);
      }
      match = verdict == rc.expected_verdict && std::abs(v.lambda - rc.expected_lambda) <= 1e-3;
    } catch (const std::exception& e) {
      verdict = "ERROR";
    }
    if (!match) ++mismatches;
    out << std::left << std::setw(14) << rc.id << std::setw(11) << rc.mode << std::setw(14) << verdict << std::setw(14)
        << lambda << std::setw(7) << order << std::setw(7) << terms << std::setw(13) << residual;
    if (timings) out << std::setw(10) << fmt(detail::elapsed(t0));
    out << std::setw(10) << (match ? "match" : "MISMATCH") << rc.published << '\n';
  }
  return mismatches;
}

}  // namespace cpcheck::cli
