#include "chance_region/ellipsoid_fit.hpp"

#include "generators.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace chance_region;

namespace {

LabeledPoint pt(double x, double y, Label l) { return LabeledPoint{(Vector(2) << x, y).finished(), l, 1.0, -1}; }

std::vector<LabeledPoint> ring_data(std::mt19937_64& rng, int n, double r_in, double r_out) {
  std::vector<LabeledPoint> out;
  for (int k = 0; k < n; ++k) {
    const double a = testgen::uniform(rng, 0, 2 * std::acos(-1.0));
    const bool inside = k % 2 == 0;
    const double r = inside ? testgen::uniform(rng, 0, r_in) : testgen::uniform(rng, r_out, 2 * r_out);
    out.push_back(pt(r * std::cos(a), r * std::sin(a), inside ? Label::Feasible : Label::Infeasible));
  }
  return out;
}

// Loss written out from the definition, independent of the fitter's lifted form.
double reference_loss(const std::vector<LabeledPoint>& pts, const Matrix& M, const Vector& h, const Vector& q_ref,
                      double nu_f, double nu_i) {
  double total = 0;
  for (const auto& p : pts) {
    const Vector u = p.q - q_ref;
    const double f = u.dot(M * u) + h.dot(u) - 1.0;
    const double y = p.y == Label::Feasible ? -1.0 : 1.0;
    total += (p.y == Label::Feasible ? nu_f : nu_i) * p.nu * std::max(0.0, -y * f);
  }
  return total;
}

Ellipsoid ball(double r) { return Ellipsoid{Matrix::Identity(2, 2) / (r * r), Vector::Zero(2), -1.0, Vector::Zero(2)}; }

}  // namespace

TEST(Fit, SeparableDataReachesZeroLoss) {
  std::mt19937_64 rng(1);
  const auto data = ring_data(rng, 200, 1.0, 1.5);
  const auto [e, rep] = fit(data, Vector::Zero(2));
  EXPECT_EQ(rep.loss, 0.0);
  EXPECT_EQ(rep.misclassified_feasible + rep.misclassified_infeasible, 0);
  for (const auto& p : data) EXPECT_EQ(e.contains(p.q), p.y == Label::Feasible);
}

TEST(Fit, SinglePair) {
  const std::vector<LabeledPoint> data{pt(0.5, 0, Label::Feasible), pt(2, 0, Label::Infeasible)};
  const auto [e, rep] = fit(data, Vector::Zero(2));
  EXPECT_EQ(rep.loss, 0.0);
  EXPECT_LE(e.value(data[0].q), 0.0);
  EXPECT_GE(e.value(data[1].q), 0.0);
  EXPECT_EQ(e.c, -1.0);
}

TEST(Fit, RecoversEllipsoidFromActiveSamples) {
  std::mt19937_64 rng(7);
  const auto truth = testgen::random_ellipsoid(rng, 2);
  const EllipsoidOracle oracle(truth);
  const double tau = 1e-2;
  const auto log = active_sample(oracle, Vector::Zero(2), ActiveSamplingOptions{1000, tau, 8.0, 3, 20});
  const auto [e, rep] = fit(log.points, Vector::Zero(2));
  EXPECT_LE(param_error(e, truth), 5 * tau);
}

TEST(Fit, RejectsOneSidedData) {
  const std::vector<LabeledPoint> feasible_only{pt(0.1, 0, Label::Feasible)};
  const std::vector<LabeledPoint> infeasible_only{pt(3, 0, Label::Infeasible)};
  try {
    fit(feasible_only, Vector::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoInfeasiblePoints);
  }
  try {
    fit(infeasible_only, Vector::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFeasiblePoints);
  }
  const std::vector<LabeledPoint> wrong_dim{pt(0.1, 0, Label::Feasible), pt(3, 0, Label::Infeasible)};
  EXPECT_THROW(fit(wrong_dim, Vector::Zero(3)), Error);
}

TEST(FitProperty, EveryIterateIsPositiveDefinite) {
  std::mt19937_64 rng(2);
  const auto data = ring_data(rng, 100, 0.8, 1.0);
  FitConfig cfg;
  cfg.max_iters = 500;
  int seen = 0;
  cfg.on_iteration = [&](int, const Ellipsoid& e) {
    ++seen;
    EXPECT_EQ((e.M - e.M.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(e.M).eigenvalues().minCoeff(), cfg.eig_floor * (1 - 1e-9));
  };
  const auto [e, rep] = fit(data, Vector::Zero(2), cfg);
  EXPECT_EQ(seen, rep.iterations);
}

TEST(FitProperty, ReportedLossMatchesDefinition) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto data = ring_data(rng, 60, 1.0, 1.1);
    for (auto& p : data) p.nu = testgen::uniform(rng, 0.5, 2.0);
    FitConfig cfg;
    cfg.max_iters = 200;
    cfg.nu_infeasible = testgen::uniform(rng, 1, 20);
    const Vector q_ref = testgen::uniform_vector(rng, 2, -0.2, 0.2);
    const auto [e, rep] = fit(data, q_ref, cfg);
    EXPECT_NEAR(rep.loss, reference_loss(data, e.M, e.h, q_ref, cfg.nu_feasible, cfg.nu_infeasible), 1e-9);
    EXPECT_NEAR(weighted_loss(data, e, cfg), rep.loss, 1e-12);
  }
}

TEST(FitProperty, SubgradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = ring_data(rng, 40, 1.0, 1.2);
    const auto e = testgen::random_ellipsoid(rng, 2, 0.7, 1.5, 0.3);
    FitConfig cfg;
    cfg.volume_reg_mu = trial % 2 == 0 ? 0.0 : 0.05;
    const Vector g = loss_subgradient(data, e, cfg);
    const Vector th = quadric::to_theta(e.M, e.h);
    const double step = 1e-7;
    for (Eigen::Index k = 0; k < th.size(); ++k) {
      Vector tp = th, tm = th;
      tp(k) += step;
      tm(k) -= step;
      auto [Mp, hp] = quadric::from_theta(tp, 2);
      auto [Mm, hm] = quadric::from_theta(tm, 2);
      const double fd = (fit_objective(data, Ellipsoid{Mp, hp, -1.0, e.q_ref}, cfg) -
                         fit_objective(data, Ellipsoid{Mm, hm, -1.0, e.q_ref}, cfg)) /
                        (2 * step);
      EXPECT_NEAR(g(k), fd, 1e-4 * (1 + std::abs(fd)));
    }
  }
}

TEST(FitProperty, TranslatingDataAndReferenceGivesTheSameShape) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto data = ring_data(rng, 80, 1.0, 1.2);
    const Vector shift = testgen::uniform_vector(rng, 2, -3, 3);
    auto moved = data;
    for (auto& p : moved) p.q += shift;
    FitConfig cfg;
    cfg.max_iters = 300;
    const auto [a, ra] = fit(data, Vector::Zero(2), cfg);
    const auto [b, rb] = fit(moved, shift, cfg);
    EXPECT_LT((a.M - b.M).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((a.h - b.h).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(b.q_ref, shift);
  }
}

TEST(ParamError, Examples) {
  Ellipsoid fitted = ball(1.0);
  fitted.M(0, 0) = 1.5;
  EXPECT_NEAR(param_error(fitted, ball(1.0)), 0.5, 1e-15);
  Ellipsoid shifted = ball(1.0);
  shifted.h(0) = 0.1;
  EXPECT_NEAR(param_error(shifted, ball(1.0)), 0.1, 1e-15);
  EXPECT_EQ(param_error(ball(1.0), ball(1.0)), 0.0);

  Ellipsoid moved = ball(1.0);
  moved.q_ref(0) = 1.0;
  try {
    param_error(moved, ball(1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConventionMismatch);
  }
  Ellipsoid other_c = ball(1.0);
  other_c.c = 0.0;
  EXPECT_THROW(param_error(other_c, ball(1.0)), Error);
}

TEST(DataMatrix, LiftedRows) {
  const std::vector<LabeledPoint> one{pt(2, 3, Label::Feasible)};
  const auto dm = data_matrix(one, (Vector(2) << 1, 1).finished());
  ASSERT_EQ(dm.Z.rows(), 1);
  ASSERT_EQ(dm.Z.cols(), 6);
  const double expected[] = {1, 2, 1, 2, 2, 4};
  for (int k = 0; k < 6; ++k) EXPECT_EQ(dm.Z(0, k), expected[k]);
  EXPECT_EQ(data_matrix(one, Vector::Zero(2), true).Z.cols(), 7);
}

TEST(DataMatrix, ConditioningOfCollinearAndSpreadData) {
  std::vector<LabeledPoint> line;
  for (int k = 1; k <= 20; ++k) line.push_back(pt(0.1 * k, 0.2 * k, Label::Feasible));
  EXPECT_LT(min_eig_normalized(data_matrix(line, Vector::Zero(2))), 1e-12);

  std::mt19937_64 rng(6);
  std::vector<LabeledPoint> disk;
  while (disk.size() < 500) {
    const Vector q = testgen::uniform_vector(rng, 2, -1, 1);
    if (q.norm() <= 1) disk.push_back(LabeledPoint{q, Label::Feasible, 1.0, -1});
  }
  EXPECT_GT(min_eig_normalized(data_matrix(disk, Vector::Zero(2))), 1e-3);
  EXPECT_EQ(min_eig_normalized(data_matrix(std::vector<LabeledPoint>{}, Vector::Zero(2))), 0.0);
}

TEST(ProjectionBound, MatchesNormalEquations) {
  std::mt19937_64 rng(9);
  for (double c : {0.1, 1.0, 10.0}) {
    for (int trial = 0; trial < 100; ++trial) {
      Matrix Z(50, 7);
      for (Eigen::Index i = 0; i < Z.size(); ++i) Z(i) = testgen::uniform(rng, -1, 1);
      const Vector x = testgen::uniform_vector(rng, 50, -c, c);
      const auto [lhs, rhs] = lemma1_check(Z, x, c);
      EXPECT_NEAR(rhs, c * std::sqrt(7.0), 1e-12);
      EXPECT_LE(lhs, x.norm() * (1 + 1e-12));  // a projection never lengthens x
      // compare against the normal equations
      const Vector beta = (Z.transpose() * Z).ldlt().solve(Z.transpose() * x);
      EXPECT_NEAR(lhs, (Z * beta).norm(), 1e-9 * (1 + lhs));
    }
  }
  // x in the column space attains ||x||.
  Matrix Z = Matrix::Zero(10, 2);
  Z(0, 0) = 1;
  Z(1, 1) = 1;
  Vector x = Vector::Zero(10);
  x(0) = x(1) = 1;
  EXPECT_NEAR(lemma1_check(Z, x, 1.0).first, std::sqrt(2.0), 1e-15);
}

TEST(ProjectionBound, SqrtDBoundFailsForAlignedVectors) {
  // One all-ones column: P x = x for x = c * 1, so ||P x|| = c sqrt(N) while
  // the bound offers c sqrt(1).
  const Matrix Z = Matrix::Ones(10, 1);
  const auto [lhs, rhs] = lemma1_check(Z, Vector::Constant(10, 2.0), 2.0);
  EXPECT_NEAR(lhs, 2.0 * std::sqrt(10.0), 1e-12);
  EXPECT_NEAR(rhs, 2.0, 1e-15);
  EXPECT_GT(lhs, rhs);
}

TEST(ProjectionBound, Errors) {
  Matrix Z = Matrix::Ones(10, 2);
  try {
    lemma1_check(Z, Vector::Zero(10), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularGram);
  }
  EXPECT_THROW(lemma1_check(Matrix::Identity(3, 3), Vector::Zero(3), 1.0), Error);
  EXPECT_THROW(lemma1_check(Matrix::Identity(4, 2), Vector::Constant(4, 2.0), 1.0), Error);
}

TEST(Overlap, Examples) {
  const EllipsoidOracle unit(ball(1.0)), same(ball(1.0)), half(ball(0.5));
  const Box box = Box::uniform(2, -1.5, 1.5);
  EXPECT_GE(region_overlap(unit, same, box, 20000, 1), 0.99);
  EXPECT_NEAR(region_overlap(unit, half, box, 200000, 2), 0.25, 0.01);

  Ellipsoid far = ball(0.5);
  far.q_ref = Vector::Constant(2, 1.2);
  const EllipsoidOracle elsewhere(far);
  EXPECT_LT(region_overlap(unit, elsewhere, Box::uniform(2, -2, 2), 20000, 3), 1e-3);

  Ellipsoid gone = ball(0.01);
  gone.q_ref = Vector::Constant(2, 50);
  const EllipsoidOracle nowhere(gone);
  try {
    region_overlap(nowhere, nowhere, box, 1000, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyUnion);
  }
}

TEST(Overlap, FalsePositiveRate) {
  const EllipsoidOracle unit(ball(1.0)), half(ball(0.5)), twice(ball(2.0));
  const Box box = Box::uniform(2, -2, 2);
  EXPECT_EQ(false_positive_rate(unit, half, box, 20000, 1), 0.0);
  EXPECT_NEAR(false_positive_rate(unit, twice, box, 200000, 2), 0.75, 0.01);
}
