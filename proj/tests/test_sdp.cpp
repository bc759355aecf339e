#include "cpcheck/sdp/kkt.hpp"
#include "cpcheck/sdp/problem.hpp"
#include "cpcheck/sdp/solver.hpp"
#include "random_sdp.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace cpcheck::sdp;

namespace {

// max lambda s.t. 1 - lambda >= 0.
SdpProblem scalar_bound() {
  return SdpProblem::lmi({1}, {{0, 0, 0, 1.0}}, {{{0, 0, 0, -1.0}}}, Eigen::VectorXd::Ones(1));
}

// min x s.t. x >= 0 and x = 1.
SdpProblem pinned_scalar() {
  SdpProblem p = SdpProblem::lmi({1}, {}, {{{0, 0, 0, 1.0}}}, Eigen::VectorXd::Ones(1), Sense::Minimize);
  p.constraints.push_back({{{0, 1.0}}, 1.0});
  return p;
}

// min X11 + X22 over 2x2 X >= 0 with X11 + X22 = 2 and X12 = 3.
SdpProblem infeasible_trace() {
  SdpProblem q;
  q.psd_blocks = {2};
  q.coordinates = {{{0, 0, 0, 1}}, {{0, 0, 1, 1}}, {{0, 1, 1, 1}}};
  q.offset = Eigen::Vector3d(0, 3, 2);  // X12 = 3, X22 = 2 - X11
  q.map.resize(3, 1);
  q.map.insert(0, 0) = 1;
  q.map.insert(2, 0) = -1;
  q.objective = Eigen::VectorXd::Zero(1);
  q.objective_constant = 2.0;
  q.sense = Sense::Minimize;
  q.validate();
  return q;
}

}  // namespace

TEST(Solver, PinnedScalar) {
  const SdpProblem p = pinned_scalar();
  const SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::Optimal) << s.message;
  EXPECT_NEAR(s.primal_objective, 1.0, 1e-8);
  EXPECT_NEAR(s.x(0), 1.0, 1e-8);
  EXPECT_LE(verify_kkt(p, s).worst(), 1e-7);
}

TEST(Solver, ScalarBound) {
  const SdpProblem p = scalar_bound();
  const SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::Optimal) << s.message;
  EXPECT_NEAR(s.x(0), 1.0, 1e-7);
  EXPECT_LE(verify_kkt(p, s).worst(), 1e-7);
}

TEST(Solver, DetectsPrimalInfeasibility) {
  const SdpSolution s = solve(infeasible_trace());
  EXPECT_EQ(s.status, SdpStatus::PrimalInfeasible) << s.message;
}

TEST(Solver, InconsistentEqualitiesAreInfeasible) {
  SdpProblem p = pinned_scalar();
  p.constraints.push_back({{{0, 2.0}}, 3.0});
  EXPECT_EQ(solve(p).status, SdpStatus::PrimalInfeasible);
}

TEST(Solver, UnboundedIsDualInfeasible) {
  // max x s.t. x >= 0.
  const SdpProblem p = SdpProblem::lmi({1}, {}, {{{0, 0, 0, 1.0}}}, Eigen::VectorXd::Ones(1));
  const SdpSolution s = solve(p);
  EXPECT_EQ(s.status, SdpStatus::DualInfeasible) << s.message;
}

TEST(Solver, Deterministic) {
  std::mt19937_64 rng(42);
  const auto planted = cpcheck::testing::planted_sdp({6, 4}, 8, rng);
  const SdpSolution a = solve(planted.problem), b = solve(planted.problem);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.primal_objective, b.primal_objective);
}

TEST(Solver, PlantedOptimaAreRecovered) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> nblocks(1, 3), dim(1, 12), vars(1, 20);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> blocks;
    for (int b = nblocks(rng); b > 0; --b) blocks.push_back(dim(rng));
    const auto planted = cpcheck::testing::planted_sdp(blocks, vars(rng), rng);
    const SdpSolution s = solve(planted.problem);
    ASSERT_EQ(s.status, SdpStatus::Optimal) << "trial " << trial << ": " << s.message;
    EXPECT_LE(std::abs(s.primal_objective - planted.optimum), 1e-6 * std::max(1.0, std::abs(planted.optimum)));
    EXPECT_LE(verify_kkt(planted.problem, s).worst(), 1e-7);
  }
}

TEST(Solver, InvariantUnderConstraintRowScaling) {
  SdpProblem p = pinned_scalar();
  p.psd_blocks = {2};
  p.coordinates = {{{0, 0, 0, 1.0}, {0, 1, 1, 1.0}}, {{0, 0, 1, 1.0}}};
  p.offset = Eigen::Vector2d(0, 0);
  p.map.resize(2, 2);
  p.map.setIdentity();
  p.objective = Eigen::Vector2d(1.0, 0.5);
  p.constraints = {{{{0, 1.0}}, 1.0}};
  p.validate();
  SdpProblem q = p;
  q.constraints = {{{{0, 1e3}}, 1e3}};
  const SdpSolution a = solve(p), b = solve(q);
  ASSERT_EQ(a.status, SdpStatus::Optimal);
  ASSERT_EQ(b.status, SdpStatus::Optimal);
  EXPECT_NEAR(a.primal_objective, b.primal_objective, 1e-7);
  EXPECT_NEAR(a.primal_objective, 0.5, 1e-7);  // x = (1, -1): X = [[1, -1], [-1, 1]]
}

TEST(Kkt, HandBuiltPairHasZeroResiduals) {
  const SdpProblem p = scalar_bound();
  SdpSolution s;
  s.status = SdpStatus::Optimal;
  s.x = Eigen::VectorXd::Ones(1);
  s.slack = {Eigen::MatrixXd::Zero(1, 1)};
  s.dual = {Eigen::MatrixXd::Ones(1, 1)};
  const KktReport r = verify_kkt(p, s);
  EXPECT_EQ(r.worst(), 0.0);
}

TEST(Kkt, ReportsInjectedPerturbation) {
  const SdpProblem p = scalar_bound();
  SdpSolution s = solve(p);
  ASSERT_EQ(s.status, SdpStatus::Optimal);
  s.slack[0](0, 0) += 1e-3;
  const KktReport r = verify_kkt(p, s);
  EXPECT_NEAR(r.primal_residual, 1e-3, 1e-6);
}

TEST(Problem, ValidateRejectsBadData) {
  SdpProblem p = scalar_bound();
  p.coordinates[0].push_back({0, 1, 0, 1.0});
  EXPECT_THROW(p.validate(), ProblemError);
  p = scalar_bound();
  p.coordinates[0].push_back({1, 0, 0, 1.0});
  EXPECT_THROW(p.validate(), ProblemError);
  p = scalar_bound();
  p.objective = Eigen::VectorXd::Ones(2);
  EXPECT_THROW(p.validate(), ProblemError);
}

TEST(Problem, DumpLoadRoundTrip) {
  std::mt19937_64 rng(9);
  const auto planted = cpcheck::testing::planted_sdp({3, 2}, 4, rng);
  SdpProblem p = planted.problem;
  p.constraints.push_back({{{0, 1.5}, {2, -0.25}}, 0.125});
  std::stringstream ss;
  dump(p, ss);
  const SdpProblem q = load(ss);
  EXPECT_EQ(q.psd_blocks, p.psd_blocks);
  EXPECT_EQ(q.num_coordinates(), p.num_coordinates());
  EXPECT_EQ(q.objective, p.objective);
  EXPECT_EQ(q.offset, p.offset);
  ASSERT_EQ(q.constraints.size(), p.constraints.size());
  EXPECT_EQ(q.constraints.back().terms, p.constraints.back().terms);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -1, 1);
  const auto sp = p.slack(x), sq = q.slack(x);
  for (std::size_t b = 0; b < sp.size(); ++b) EXPECT_EQ(sp[b], sq[b]);
}
