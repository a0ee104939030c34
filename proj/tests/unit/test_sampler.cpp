#include "chance_region/ellipsoid_fit.hpp"
#include "chance_region/sampler.hpp"

#include "generators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace chance_region;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

FunctionOracle half_line(double edge) {
  return FunctionOracle(1, [edge](const Vector& q) { return q(0) <= edge; });
}

}  // namespace

TEST(BinarySearch, HandTracedHalfLine) {
  const auto oracle = half_line(2.0);
  const auto res = binary_search_direction(oracle, v1(0), v1(1), 8.0, 0.5);
  ASSERT_EQ(res.points.size(), 5u);
  const double expected_q[] = {8, 4, 2, 3, 2.5};
  const Label expected_y[] = {Label::Infeasible, Label::Infeasible, Label::Feasible, Label::Infeasible,
                              Label::Infeasible};
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_DOUBLE_EQ(res.points[k].q(0), expected_q[k]);
    EXPECT_EQ(res.points[k].y, expected_y[k]);
  }
  EXPECT_DOUBLE_EQ(res.feasible_end(0), 2.0);
  EXPECT_DOUBLE_EQ(res.infeasible_end(0), 2.5);
  EXPECT_EQ(oracle.calls(), 5u);
}

TEST(BinarySearch, TauAboveLambdaStopsAfterOneQuery) {
  const auto oracle = half_line(2.0);
  const auto res = binary_search_direction(oracle, v1(0), v1(1), 8.0, 10.0);
  EXPECT_EQ(res.points.size(), 1u);
  EXPECT_DOUBLE_EQ(res.feasible_end(0), 0.0);
  EXPECT_DOUBLE_EQ(res.infeasible_end(0), 8.0);
}

TEST(BinarySearch, BoundaryPointCountsAsFeasible) {
  const auto oracle = half_line(4.0);
  const auto res = binary_search_direction(oracle, v1(0), v1(1), 8.0, 1.0);
  EXPECT_EQ(res.points[1].q(0), 4.0);
  EXPECT_EQ(res.points[1].y, Label::Feasible);
  EXPECT_GE(res.feasible_end(0), 4.0);
}

TEST(BinarySearch, Errors) {
  const auto oracle = half_line(2.0);
  try {
    binary_search_direction(oracle, v1(3), v1(1), 8.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleStart);
  }
  try {
    binary_search_direction(oracle, v1(0), v1(1), 1.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LambdaTooSmall);
  }
  EXPECT_THROW(binary_search_direction(oracle, v1(0), v1(0), 8.0, 0.5), Error);
  EXPECT_THROW(binary_search_direction(oracle, v1(0), v1(1), 8.0, 0.0), Error);
}

TEST(BinarySearchProperty, BracketInvariantCollinearityAndCallBound) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto truth = testgen::random_ellipsoid(rng, 2 + trial % 3);
    const EllipsoidOracle oracle(truth);
    const auto d = truth.dim();
    Vector e(d);
    std::normal_distribution<double> n;
    for (Eigen::Index i = 0; i < d; ++i) e(i) = n(rng);
    e.normalize();
    const double lambda = testgen::uniform(rng, 10, 20), tau = testgen::uniform(rng, 1e-3, 1e-1);
    const auto res = binary_search_direction(oracle, Vector::Zero(d), e, lambda, tau);
    EXPECT_LE(static_cast<double>(res.points.size()), 1 + std::ceil(std::log2(lambda / tau)));
    EXPECT_EQ(oracle.calls(), res.points.size());
    EXPECT_TRUE(oracle.feasible(res.feasible_end));
    EXPECT_FALSE(oracle.feasible(res.infeasible_end));
    EXPECT_LE((res.feasible_end - res.infeasible_end).norm(), tau + 1e-12);
    for (const auto& pt : res.points) {
      const double t = pt.q.dot(e);
      EXPECT_LT((pt.q - t * e).norm(), 1e-12);
      EXPECT_EQ(pt.y, oracle.classify(pt.q));
    }
  }
}

TEST(ActiveSample, DiskLabelsAndBudget) {
  EllipseOracle disk(Matrix::Identity(2, 2), Vector::Zero(2));
  const auto log = active_sample(disk, Vector::Zero(2), ActiveSamplingOptions{200, 1e-2, 8.0, 3, 20});
  EXPECT_LE(log.oracle_calls, 200u);
  EXPECT_EQ(log.oracle_calls, log.points.size());
  EXPECT_EQ(disk.calls(), log.oracle_calls);
  for (const auto& pt : log.points) {
    if (pt.y == Label::Feasible) {
      EXPECT_LE(pt.q.norm(), 1.0);
    } else {
      EXPECT_GT(pt.q.norm(), 1.0);
    }
  }
  EXPECT_EQ(static_cast<std::size_t>(log.direction_count), log.brackets.size());
  for (const auto& b : log.brackets) {
    EXPECT_TRUE(disk.feasible(b.feasible));
    EXPECT_FALSE(disk.feasible(b.infeasible));
  }
}

TEST(ActiveSample, BudgetCoversWholeDirectionsOnly) {
  EllipseOracle disk(Matrix::Identity(2, 2), Vector::Zero(2));
  const int per_direction = direction_cost(8.0, 1e-2);  // 1 + 10
  EXPECT_EQ(per_direction, 11);
  const auto log = active_sample(disk, Vector::Zero(2), ActiveSamplingOptions{3 * per_direction + 5, 1e-2, 8.0, 1, 20});
  EXPECT_EQ(log.direction_count, 3);
  EXPECT_EQ(log.oracle_calls, static_cast<std::size_t>(3 * per_direction));
}

TEST(ActiveSample, DoublesLambdaWhenRaysEndInside) {
  EllipseOracle big(Matrix::Identity(2, 2) / 10.0, Vector::Zero(2));  // radius 10
  const auto log = active_sample(big, Vector::Zero(2), ActiveSamplingOptions{300, 1e-2, 1.0, 2, 20});
  EXPECT_GT(log.direction_count, 0);
  EXPECT_LE(log.oracle_calls, 300u);
  for (const auto& b : log.brackets) EXPECT_NEAR(b.feasible.norm(), 10.0, 1e-2);

  FunctionOracle everything(2, [](const Vector&) { return true; });
  try {
    active_sample(everything, Vector::Zero(2), ActiveSamplingOptions{100000, 1e-2, 1.0, 2, 20});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LambdaTooSmall);
  }
}

TEST(ActiveSample, DeterministicAndValidated) {
  EllipseOracle disk(Matrix::Identity(2, 2), Vector::Zero(2));
  const auto a = active_sample(disk, Vector::Zero(2), ActiveSamplingOptions{150, 1e-2, 8.0, 9, 20});
  const auto b = active_sample(disk, Vector::Zero(2), ActiveSamplingOptions{150, 1e-2, 8.0, 9, 20});
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    EXPECT_EQ(a.points[k].q, b.points[k].q);
    EXPECT_EQ(a.points[k].direction_id, b.points[k].direction_id);
  }
  EXPECT_THROW(active_sample(disk, Vector::Constant(2, 5), ActiveSamplingOptions{}), Error);
  EXPECT_THROW(active_sample(disk, Vector::Zero(2), ActiveSamplingOptions{1, 1e-2, 8.0, 0, 20}), Error);
}

TEST(ActiveSample, SpreadDirectionsGiveWellConditionedLift) {
  std::mt19937_64 rng(41);
  const auto truth = testgen::random_ellipsoid(rng, 2);
  const EllipsoidOracle oracle(truth);
  // 4 * (d^2 + d + 1) = 28 directions at 11 calls each.
  const auto log = active_sample(oracle, Vector::Zero(2), ActiveSamplingOptions{28 * 11, 1e-2, 8.0, 4, 20});
  EXPECT_GE(log.direction_count, 28);
  EXPECT_GT(min_eig_normalized(data_matrix(log.points, Vector::Zero(2))), 1e-3);
}

TEST(RandomSample, AreaRatioCountAndDeterminism) {
  EllipseOracle disk(Matrix::Identity(2, 2), Vector::Zero(2));
  const Box box = Box::uniform(2, -2, 2);
  EXPECT_TRUE(random_sample(disk, box, 0, 1).points.empty());
  const auto log = random_sample(disk, box, 10000, 7);
  ASSERT_EQ(log.points.size(), 10000u);
  double feasible = 0;
  for (const auto& pt : log.points) {
    feasible += pt.y == Label::Feasible ? 1 : 0;
    EXPECT_TRUE(box.contains(pt.q));
    EXPECT_EQ(pt.direction_id, -1);
  }
  const double p = std::acos(-1.0) / 16.0;
  EXPECT_NEAR(feasible / 10000.0, p, 3 * std::sqrt(p * (1 - p) / 10000.0));
  const auto again = random_sample(disk, box, 10000, 7);
  EXPECT_EQ(again.points[1234].q, log.points[1234].q);
  EXPECT_THROW(random_sample(disk, Box::uniform(2, 1, -1), 10, 1), Error);
}

TEST(FindFeasibleStart, Candidates) {
  EllipseOracle disk(Matrix::Identity(2, 2), Vector::Zero(2));
  EXPECT_EQ(find_feasible_start(disk, std::vector<Vector>{Vector::Zero(2)}), Vector::Zero(2));
  EXPECT_EQ(disk.calls(), 1u);
  const std::vector<Vector> two{Vector::Constant(2, 5), Vector::Zero(2)};
  EXPECT_EQ(find_feasible_start(disk, two), Vector::Zero(2));
  const std::vector<Vector> none{Vector::Constant(2, 5), Vector::Constant(2, -3)};
  try {
    find_feasible_start(disk, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFeasibleStart);
    EXPECT_NE(std::string(e.what()).find("1,1"), std::string::npos);
  }
}

TEST(QueryLogCsv, RoundTrip) {
  EllipseOracle disk(Matrix::Identity(2, 2), Vector::Zero(2));
  const auto log = active_sample(disk, Vector::Zero(2), ActiveSamplingOptions{60, 1e-2, 8.0, 3, 20});
  const auto p = std::filesystem::temp_directory_path() / "cr_log.csv";
  write_query_log_csv(p, log, 2);
  const auto back = read_query_log_csv(p);
  ASSERT_EQ(back.points.size(), log.points.size());
  EXPECT_EQ(back.direction_count, log.direction_count);
  for (std::size_t k = 0; k < log.points.size(); ++k) {
    EXPECT_EQ(back.points[k].q, log.points[k].q);
    EXPECT_EQ(back.points[k].y, log.points[k].y);
    EXPECT_EQ(back.points[k].direction_id, log.points[k].direction_id);
  }
}
