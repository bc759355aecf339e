#pragma once

// Independent recomputation of optimality conditions for an SdpSolution.
// Uses only SdpProblem's own evaluation routines, never solver state.

#include "cpcheck/sdp/problem.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace cpcheck::sdp {

struct KktReport {
  double primal_residual = 0.0;   // max(|S - S(x)|_max, |E x - e|_inf)
  double primal_cone = 0.0;       // max(0, -lambda_min(S(x)))
  double dual_residual = 0.0;     // |b + A*(Z) - E^T w|_inf (maximize form)
  double dual_cone = 0.0;         // max(0, -lambda_min(Z))
  double complementarity = 0.0;   // <S(x), Z>
  double gap = 0.0;               // |pobj - dobj| / (1 + |pobj| + |dobj|)
  double primal_scale = 1.0;      // 1 + max |data| on the primal side
  double dual_scale = 1.0;        // 1 + |b|_inf

  /// Largest of the scaled residuals.
  double worst() const {
    return std::max({primal_residual / primal_scale, primal_cone / primal_scale, dual_residual / dual_scale,
                     dual_cone / dual_scale, gap});
  }
};

inline KktReport verify_kkt(const SdpProblem& prob, const SdpSolution& sol) {
  KktReport rep;
  const double sign = prob.sense == Sense::Maximize ? 1.0 : -1.0;
  const Eigen::VectorXd& x = sol.x;
  const auto s_x = prob.slack(x);

  double data_max = 0.0;
  for (const auto& m : s_x) data_max = std::max(data_max, m.cwiseAbs().maxCoeff());
  rep.primal_scale = 1.0 + data_max;
  rep.dual_scale = 1.0 + (prob.objective.size() ? prob.objective.cwiseAbs().maxCoeff() : 0.0);

  double pres = 0.0;
  for (std::size_t b = 0; b < s_x.size(); ++b) {
    if (b < sol.slack.size()) pres = std::max(pres, (sol.slack[b] - s_x[b]).cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s_x[b], Eigen::EigenvaluesOnly);
    rep.primal_cone = std::max(rep.primal_cone, -es.eigenvalues()(0));
  }
  for (const auto& c : prob.constraints) {
    double lhs = 0.0;
    for (const auto& [j, v] : c.terms) lhs += v * x(j);
    pres = std::max(pres, std::abs(lhs - c.rhs));
  }
  rep.primal_residual = pres;

  Eigen::VectorXd stat = sign * prob.objective + prob.map.transpose() * prob.coordinate_adjoint(sol.dual);
  for (std::size_t r = 0; r < prob.constraints.size(); ++r) {
    const double w = sol.equality_multipliers.size() ? sol.equality_multipliers(static_cast<Eigen::Index>(r)) : 0.0;
    for (const auto& [j, v] : prob.constraints[r].terms) stat(j) -= v * w;
  }
  rep.dual_residual = stat.size() ? stat.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& z : sol.dual) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(z, Eigen::EigenvaluesOnly);
    rep.dual_cone = std::max(rep.dual_cone, -es.eigenvalues()(0));
  }

  double sz = 0.0;
  for (std::size_t b = 0; b < s_x.size(); ++b) sz += s_x[b].cwiseProduct(sol.dual[b]).sum();
  rep.complementarity = sz;

  // Objectives in the maximize form.
  const double pobj = sign * (prob.objective.dot(x) + prob.objective_constant);
  double dobj = prob.constant_inner(sol.dual) + prob.offset.dot(prob.coordinate_adjoint(sol.dual)) +
                sign * prob.objective_constant;
  for (std::size_t r = 0; r < prob.constraints.size(); ++r) {
    const double w = sol.equality_multipliers.size() ? sol.equality_multipliers(static_cast<Eigen::Index>(r)) : 0.0;
    dobj += w * prob.constraints[r].rhs;
  }
  rep.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return rep;
}

}  // namespace cpcheck::sdp
