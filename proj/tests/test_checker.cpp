#include "cpcheck/checker.hpp"
#include "cpcheck/instances.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cpcheck;

namespace {

Eigen::VectorXd pair_atom(int n, int i, int j) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(i) = b(j) = std::sqrt(0.5);
  return b;
}

// ||A - base - sum rho b b^T||_inf recomputed entry by entry.
double recompute_residual(const SymMatrix& a, const CpDecomposition& d) {
  double worst = 0.0;
  for (int i = 0; i < a.n(); ++i)
    for (int j = 0; j < a.n(); ++j) {
      double s = a(i, j);
      if (d.base_form != BaseForm::None) s -= d.base_lambda * d.base(i, j);
      for (std::size_t k = 0; k < d.atoms.size(); ++k) s -= d.weights[k] * d.atoms[k](i) * d.atoms[k](j);
      worst = std::max(worst, std::abs(s));
    }
  return worst;
}

void expect_sound(const SymMatrix& a, const CpVerdict& v) {
  if (v.kind == VerdictKind::NotCp) {
    EXPECT_FALSE(v.decomposition);
    EXPECT_LT(v.lambda, -1e-4);
    return;
  }
  if (v.kind == VerdictKind::Inconclusive) return;
  ASSERT_TRUE(v.decomposition);
  const auto& d = *v.decomposition;
  EXPECT_LE(d.reconstruction_residual, 1e-4);
  EXPECT_NEAR(recompute_residual(a, d), d.reconstruction_residual, 1e-12);
  for (std::size_t k = 0; k < d.atoms.size(); ++k) {
    EXPECT_GT(d.weights[k], 0.0);
    EXPECT_TRUE(membership_K(d.atoms[k], 1e-6));
  }
}

}  // namespace

TEST(NumericalRank, Examples) {
  EXPECT_EQ(numerical_rank(SymMatrix::identity(5)), 5);
  EXPECT_EQ(numerical_rank(SymMatrix::ones(5)), 1);
  EXPECT_EQ(numerical_rank(instances::interior_6x6()), 6);
  EXPECT_EQ(numerical_rank(Eigen::MatrixXd::Zero(3, 3)), 0);
  EXPECT_THROW(numerical_rank(SymMatrix::identity(2), 0.0), InputError);
}

TEST(AssembleDecomposition, RankOneBaseReconstructsTheFiveByFiveExample) {
  AtomicMeasure mu;
  mu.atoms = {pair_atom(5, 1, 2), pair_atom(5, 2, 3), pair_atom(5, 3, 4), pair_atom(5, 0, 4)};
  mu.weights = {2.0, 8.0, 2.0, 2.0};
  const Eigen::VectorXd b1 = Eigen::VectorXd::Ones(5);
  const CpDecomposition d =
      assemble_decomposition(1.0, BaseForm::RankOne, b1 * b1.transpose(), mu, instances::interior_5x5(), b1);
  EXPECT_LE(d.reconstruction_residual, 1e-12);
  EXPECT_EQ(d.span_rank, 5);
  EXPECT_EQ(d.base_form, BaseForm::RankOne);
}

TEST(AssembleDecomposition, SevenCycleWithoutBase) {
  AtomicMeasure mu;
  for (int i = 0; i < 7; ++i) {
    mu.atoms.push_back(pair_atom(7, i, (i + 1) % 7));
    mu.weights.push_back(2.0);
  }
  const CpDecomposition d = assemble_decomposition(0.0, BaseForm::None, {}, mu, instances::boundary_7x7());
  EXPECT_LE(d.reconstruction_residual, 1e-12);
  EXPECT_EQ(d.span_rank, -1);
}

TEST(AssembleDecomposition, EmptyMeasureAndNonpositiveShift) {
  const SymMatrix c = instances::default_reference(4);
  const CpDecomposition d = assemble_decomposition(1.0, BaseForm::InteriorC, c.matrix(), {}, c);
  EXPECT_EQ(d.reconstruction_residual, 0.0);
  // A negative shift is not a CP term: the base is dropped.
  const CpDecomposition e = assemble_decomposition(-1e-6, BaseForm::InteriorC, c.matrix(), {}, c);
  EXPECT_EQ(e.base_form, BaseForm::None);
  EXPECT_EQ(e.reconstruction_residual, 2.0);
}

TEST(CheckInterior, ReferenceMatrixIsInteriorWithLambdaOne) {
  const SymMatrix c = instances::default_reference(3);
  const CpVerdict v = check_interior(c);
  EXPECT_EQ(v.kind, VerdictKind::Interior);
  EXPECT_NEAR(v.lambda, 1.0, 1e-6);
  expect_sound(c, v);
}

TEST(CheckInterior, ScaledReferenceGivesHalf) {
  const SymMatrix a = instances::default_reference(3);
  const CpVerdict v = check_interior(a, 2.0 * a);
  EXPECT_EQ(v.kind, VerdictKind::Interior);
  EXPECT_NEAR(v.lambda, 0.5, 1e-6);
  expect_sound(a, v);
}

TEST(CheckInterior, RejectsInvalidReference) {
  const SymMatrix a = SymMatrix::identity(3);
  EXPECT_THROW(check_interior(a, SymMatrix::identity(3)), InputError);   // not entrywise positive
  EXPECT_THROW(check_interior(a, SymMatrix::ones(3)), InputError);       // singular
  EXPECT_THROW(check_interior(a, instances::default_reference(4)), DimensionError);
  CheckOptions bad;
  bad.max_order = 0;
  EXPECT_THROW(check_interior(a, bad), InputError);
}

TEST(CheckInterior, DoublyNonnegativeFiveByFiveIsNotCp) {
  const SymMatrix a = instances::not_cp_5x5();
  const CpVerdict v = check_interior(a);
  EXPECT_EQ(v.kind, VerdictKind::NotCp);
  EXPECT_EQ(v.order, 2);
  EXPECT_NEAR(v.lambda, -0.00714268, 1e-6);
  expect_sound(a, v);
  ASSERT_EQ(v.trace.size(), 2u);
  EXPECT_GT(v.trace[0].lambda, 0.0);  // the first order is only the PSD bound
}

TEST(CheckInterior, SevenCycleIsBoundary) {
  const SymMatrix a = instances::boundary_7x7();
  const CpVerdict v = check_interior(a);
  ASSERT_EQ(v.kind, VerdictKind::Boundary);
  EXPECT_LE(std::abs(v.lambda), 1e-4);
  expect_sound(a, v);
  const auto& d = *v.decomposition;
  ASSERT_EQ(d.atoms.size(), 7u);
  for (std::size_t k = 0; k < 7; ++k) {
    EXPECT_NEAR(d.weights[k], 2.0, 1e-2);
    int support = 0;
    for (int i = 0; i < 7; ++i)
      if (d.atoms[k](i) > 1e-2) {
        ++support;
        EXPECT_NEAR(d.atoms[k](i), std::sqrt(0.5), 1e-2);
      }
    EXPECT_EQ(support, 2);
  }
}

// Positive definite with a negative entry: the first order only sees the PSD
// bound, the second order sees the entry.
TEST(CheckInterior, NegativeEntryIsNotCpAtOrderTwo) {
  Eigen::Matrix3d m;
  m << 2, -0.5, 0, -0.5, 2, 0, 0, 0, 2;
  const CpVerdict v = check_interior(SymMatrix(m));
  EXPECT_EQ(v.kind, VerdictKind::NotCp);
  EXPECT_EQ(v.order, 2);
  EXPECT_FALSE(v.decomposition);
}

TEST(CheckInterior, OrderCapGivesInconclusiveOrBetter) {
  CheckOptions opts;
  opts.max_order = 1;
  opts.generic_point = false;
  const CpVerdict v = check_interior(instances::interior_6x6(), opts);
  EXPECT_TRUE(v.kind == VerdictKind::Inconclusive || v.kind == VerdictKind::Interior);
  if (v.kind == VerdictKind::Inconclusive) {
    EXPECT_GE(v.lambda, -1e-4);
    EXPECT_FALSE(v.flat_order);
  }
}

TEST(CheckInterior, TraceIsMonotone) {
  const CpVerdict v = check_interior(instances::not_cp_5x5());
  for (std::size_t i = 1; i < v.trace.size(); ++i) EXPECT_LE(v.trace[i].lambda, v.trace[i - 1].lambda + 1e-6);
}

TEST(CheckDickinson, RankOneIsBoundary) {
  const Eigen::Vector3d b1(1.0, 2.0, 0.5);
  const SymMatrix a = SymMatrix::outer(b1);
  const CpVerdict v = check_dickinson(a, b1);
  EXPECT_EQ(v.kind, VerdictKind::Boundary);
  EXPECT_EQ(v.matrix_rank, 1);
  expect_sound(a, v);
  EXPECT_THROW(check_dickinson(a, Eigen::Vector3d(1, -1, 1)), InputError);
}

TEST(CheckDickinson, SixBySixInteriorMatchesItsKnownTerms) {
  const SymMatrix a = instances::interior_6x6();
  const CpVerdict v = check_dickinson(a);
  ASSERT_EQ(v.kind, VerdictKind::Interior);
  EXPECT_NEAR(v.lambda, 1.0, 1e-3);
  expect_sound(a, v);
  const auto& d = *v.decomposition;
  EXPECT_EQ(d.base_form, BaseForm::RankOne);
  EXPECT_EQ(d.span_rank, 6);
  std::vector<double> w = d.weights;
  std::sort(w.begin(), w.end());
  const std::vector<double> expected{2, 5, 5, 5, 10};
  ASSERT_EQ(w.size(), expected.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], expected[i], 1e-2);
}

TEST(CheckDickinson, FiveByFiveInteriorMatchesItsKnownTerms) {
  const SymMatrix a = instances::interior_5x5();
  const CpVerdict v = check_dickinson(a);
  ASSERT_EQ(v.kind, VerdictKind::Interior);
  EXPECT_NEAR(v.lambda, 1.0, 1e-3);
  expect_sound(a, v);
  std::vector<double> w = v.decomposition->weights;
  std::sort(w.begin(), w.end());
  const std::vector<double> expected{2, 2, 2, 8};
  ASSERT_EQ(w.size(), expected.size());
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(w[i], expected[i], 1e-2);
}

TEST(CheckDickinson, NegativeEntryIsNotCp) {
  Eigen::Matrix3d m;
  m << 2, -0.5, 0, -0.5, 2, 0, 0, 0, 2;
  const CpVerdict v = check_dickinson(SymMatrix(m));
  EXPECT_EQ(v.kind, VerdictKind::NotCp);
  EXPECT_FALSE(v.decomposition);
}

TEST(Checker, CrossModeAgreementOnRandomInstances) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 4; ++trial) {
    const SymMatrix a = trial % 2 ? instances::random_interior(3, rng) : instances::random_not_cp(3, rng);
    const CpVerdict vi = check_interior(a);
    const CpVerdict vd = check_dickinson(a);
    EXPECT_EQ(vi.kind, vd.kind) << "trial " << trial;
    expect_sound(a, vi);
    expect_sound(a, vd);
  }
}

TEST(Checker, BoundaryShiftOfAnInteriorPoint) {
  std::mt19937_64 rng(5);
  const SymMatrix a = instances::random_interior(3, rng);
  const SymMatrix c = instances::default_reference(3);
  const CpVerdict v = check_interior(a, c);
  ASSERT_EQ(v.kind, VerdictKind::Interior);
  const CpVerdict shifted = check_interior(a - v.lambda * c, c);
  EXPECT_EQ(shifted.kind, VerdictKind::Boundary);
  EXPECT_LE(std::abs(shifted.lambda), 1e-4);
}

TEST(Checker, DiagonallyDominantIsNeverNotCp) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    const SymMatrix a = instances::random_diagonally_dominant(3, rng);
    try {
      const CpVerdict v = check_interior(a);
      EXPECT_NE(v.kind, VerdictKind::NotCp);
      expect_sound(a, v);
    } catch (const SolverFailure& e) {
      // Degenerate instances may exhaust the solver; the trace must still
      // be a valid upper bound chain.
      for (const auto& r : e.trace)
        if (!std::isnan(r.lambda)) EXPECT_GE(r.lambda, -1e-4);
    }
  }
}
