#include "chance_region/dispatch.hpp"

#include "generators.hpp"
#include "reference.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace chance_region;

namespace {

Vector v2(double x, double y) { return (Vector(2) << x, y).finished(); }

Ellipsoid ball_at(const Vector& center, double r) {
  return Ellipsoid::from_center_shape(Matrix::Identity(center.size(), center.size()) / (r * r), center, center);
}

Ellipsoid offset_ellipsoid(std::mt19937_64& rng) {
  const Matrix Q = testgen::random_rotation(rng, 2);
  const Vector ax = testgen::uniform_vector(rng, 2, 0.5, 1.5);
  const Matrix A = Q * ax.cwiseInverse().cwiseAbs2().asDiagonal() * Q.transpose();
  const double ang = testgen::uniform(rng, 0, 2 * std::acos(-1.0));
  const Vector center = testgen::uniform(rng, 2.0, 3.0) * v2(std::cos(ang), std::sin(ang));
  return Ellipsoid::from_center_shape(A, center, center);
}

}  // namespace

TEST(Projection, Examples) {
  const Ellipsoid unit{Matrix::Identity(2, 2), Vector::Zero(2), -1.0, Vector::Zero(2)};
  EXPECT_LT((project_onto_ellipsoid(unit, v2(0, 3)) - v2(0, 1)).norm(), 1e-9);
  EXPECT_EQ(project_onto_ellipsoid(unit, v2(0.2, 0.3)), v2(0.2, 0.3));
  EXPECT_LT((project_onto_ellipsoid(ball_at(v2(3, 0), 1.0), Vector::Zero(2)) - v2(2, 0)).norm(), 1e-9);
  const Ellipsoid flat{Matrix::Zero(2, 2), Vector::Zero(2), -1.0, Vector::Zero(2)};
  EXPECT_THROW(EllipsoidProjector{flat}, Error);
}

TEST(ProjectionProperty, NearestBoundaryPoint) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto e = testgen::random_ellipsoid(rng, 2);
    const EllipsoidProjector proj(e);
    const Vector y = testgen::uniform_vector(rng, 2, -6, 6);
    const Vector p = proj(y);
    if (e.contains(y)) {
      EXPECT_EQ(p, y);
      continue;
    }
    EXPECT_LT(std::abs(e.value(p)), 1e-9);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 20000; ++k) best = std::min(best, (reference::boundary_point(e, 2 * std::acos(-1.0) * k / 20000) - y).norm());
    EXPECT_LE((p - y).norm(), best + 1e-9);
    EXPECT_GE((p - y).norm(), best - 1e-3);
  }
}

TEST(Dispatch, BallWithoutBox) {
  const auto res = solve_dispatch(ball_at(v2(3, 0), 1.0));
  EXPECT_LT((res.q_star - v2(2, 0)).norm(), 1e-9);
  EXPECT_NEAR(res.objective, 2.0, 1e-9);
  EXPECT_NEAR(res.q_norm, 2.0, 1e-9);
  EXPECT_EQ(res.active_constraint, ActiveConstraint::Ellipsoid);
  EXPECT_FALSE(res.risk_heldout.has_value());
  const auto j = to_json(res);
  EXPECT_TRUE(j["risk_heldout"].is_null());
  EXPECT_EQ(j["active_constraint"], "ellipsoid");
}

TEST(Dispatch, OriginInsideIsInterior) {
  const auto res = solve_dispatch(ball_at(v2(0.5, 0), 1.0));
  EXPECT_EQ(res.q_star, Vector::Zero(2));
  EXPECT_EQ(res.objective, 0.0);
  EXPECT_EQ(res.active_constraint, ActiveConstraint::Interior);
  DispatchOptions opt;
  opt.target = v2(0.7, 0.1);
  EXPECT_EQ(solve_dispatch(ball_at(v2(0.5, 0), 1.0), opt).q_star, v2(0.7, 0.1));
}

TEST(Dispatch, DisjointBoxIsInfeasible) {
  try {
    solve_dispatch(ball_at(v2(3, 0), 1.0), with_box(Box::uniform(2, -0.1, 0.1)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleIntersection);
  }
}

TEST(Dispatch, BoxCutsTheBall) {
  // Lower y bound of 0.5 forces the solution off the x axis onto the circle.
  const auto e = ball_at(v2(3, 0), 1.0);
  const Box box{v2(-5, 0.5), v2(5, 5)};
  const auto res = solve_dispatch(e, with_box(box));
  EXPECT_EQ(res.active_constraint, ActiveConstraint::Both);
  const double x = 3 - std::sqrt(0.75);
  EXPECT_LT((res.q_star - v2(x, 0.5)).norm(), 1e-7);
  EXPECT_NEAR(res.objective, reference::min_half_norm_sq_2d(e, box), 1e-6);
}

TEST(DispatchProperty, MatchesGridSearchAndKkt) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 15; ++trial) {
    const auto e = offset_ellipsoid(rng);
    std::optional<Box> box;
    if (trial % 3 != 0) {
      const Vector c = e.center();
      box = Box{c - testgen::uniform_vector(rng, 2, 0.2, 2.0), c + testgen::uniform_vector(rng, 2, 0.2, 2.0)};
    }
    const auto res = solve_dispatch(e, with_box(box));
    EXPECT_LE(e.value(res.q_star), 1e-8);
    if (box) {
      EXPECT_TRUE(box->contains(res.q_star, 1e-12));
    }
    EXPECT_NEAR(res.objective, reference::min_half_norm_sq_2d(e, box), 1e-6);
    if (res.active_constraint == ActiveConstraint::Ellipsoid) {
      // q* = -mu grad f with mu >= 0
      const Vector g = e.gradient(res.q_star);
      EXPECT_LT((res.q_star / res.q_star.norm() + g / g.norm()).norm(), 1e-6);
    }
  }
}

TEST(DispatchProperty, ShrinkingTheBoxNeverHelps) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = offset_ellipsoid(rng);
    const Vector c = e.center();
    const Box wide{c - Vector::Constant(2, 2.0), c + Vector::Constant(2, 2.0)};
    Box narrow = wide;
    narrow.lo += testgen::uniform_vector(rng, 2, 0, 1.5);
    narrow.hi -= testgen::uniform_vector(rng, 2, 0, 1.5);
    const double loose = solve_dispatch(e).objective;
    const double boxed = solve_dispatch(e, with_box(wide)).objective;
    const double tight = solve_dispatch(e, with_box(narrow)).objective;
    EXPECT_LE(loose, boxed + 1e-9);
    EXPECT_LE(boxed, tight + 1e-7);
  }
}

TEST(Risk, ScalarExamples) {
  const NetworkModel net{Matrix::Zero(1, 1), Matrix::Constant(1, 1, 1.0), Vector::Zero(1)};
  const auto spec = ChanceSpec::uniform(1, -0.5, 0.5, 0.9);
  const ScenarioSet s{(Matrix(4, 1) << 0.6, 0.4, -0.7, 0.0).finished()};
  EXPECT_DOUBLE_EQ(evaluate_risk(net, spec, s, Vector::Zero(1)), 0.5);
  EXPECT_DOUBLE_EQ(evaluate_risk(net, spec, s, Vector::Constant(1, 5.0)), 1.0);
  EXPECT_DOUBLE_EQ(evaluate_risk(net, spec, s, Vector::Constant(1, -0.25)), 0.25);
}

TEST(Dispatch, BoxFaceInsideTheEllipsoid) {
  // The box corner nearest the origin lies inside the ball, so the ellipsoid is inactive.
  const auto e = ball_at(v2(3, 0), 1.5);
  const Box box{v2(2.2, 0.1), v2(4, 1)};
  const auto res = solve_dispatch(e, with_box(box));
  EXPECT_LT((res.q_star - v2(2.2, 0.1)).norm(), 1e-9);
  EXPECT_EQ(res.active_constraint, ActiveConstraint::Box);
}
