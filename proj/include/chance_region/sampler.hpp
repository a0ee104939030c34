#pragma once

// Boundary-seeking query strategies: random binary search along random rays
// from a feasible anchor, and uniform random sampling as a passive baseline.

#include "chance_region/common.hpp"
#include "chance_region/io.hpp"
#include "chance_region/oracle.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace chance_region {

struct LabeledPoint {
  Vector q;
  Label y = Label::Feasible;
  double nu = 1.0;
  int direction_id = -1;  // -1 when not produced by a ray search
};

/// Final feasible/infeasible pair found along one direction.
struct Bracket {
  Vector feasible;
  Vector infeasible;
};

struct QueryLog {
  std::vector<LabeledPoint> points;
  std::vector<Bracket> brackets;
  int direction_count = 0;
  std::size_t oracle_calls = 0;
};

struct DirectionResult {
  Vector feasible_end;
  Vector infeasible_end;
  std::vector<LabeledPoint> points;
};

/// Midpoint queries needed to shrink a bracket of length `lambda` to at most `tau`.
inline int bisection_steps(double lambda, double tau) {
  int steps = 0;
  for (double width = lambda; width > tau; width *= 0.5) ++steps;
  return steps;
}

/// Worst-case oracle calls for one direction: the ray endpoint plus bisection.
inline int direction_cost(double lambda, double tau) { return 1 + bisection_steps(lambda, tau); }

namespace detail {

// Queries q0 + lambda e; bisects when it is infeasible. Returns nullopt (with the
// single endpoint logged) if the endpoint is feasible.
inline std::optional<Bracket> search_ray(const Oracle& oracle, const Vector& q0, const Vector& e, double lambda,
                                         double tau, int direction_id, std::vector<LabeledPoint>& out) {
  // Bracket tracked in ray parameter t so halving stays exact.
  double t_feasible = 0.0;
  double t_infeasible = lambda;
  const Vector end = q0 + lambda * e;
  const Label y_end = oracle.query(end);
  out.push_back(LabeledPoint{end, y_end, 1.0, direction_id});
  if (y_end == Label::Feasible) return std::nullopt;

  while (t_infeasible - t_feasible > tau) {
    const double t_mid = 0.5 * (t_feasible + t_infeasible);
    const Vector mid = q0 + t_mid * e;
    const Label y = oracle.query(mid);
    out.push_back(LabeledPoint{mid, y, 1.0, direction_id});
    (y == Label::Infeasible ? t_infeasible : t_feasible) = t_mid;
  }
  return Bracket{q0 + t_feasible * e, q0 + t_infeasible * e};
}

inline Vector unit_direction(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector e(d);
  double n = 0.0;
  while (n < 1e-12) {
    for (Eigen::Index i = 0; i < d; ++i) e(i) = normal(rng);
    n = e.norm();
  }
  return e / n;
}

}  // namespace detail

/// Bisection along q0 + t e, t in [0, lambda], until the feasible/infeasible
/// pair is at most `tau` apart. `e` is normalized internally. The start point is
/// checked with an uncounted classify; every logged point is a counted query.
inline DirectionResult binary_search_direction(const Oracle& oracle, const Vector& q0, const Vector& e, double lambda,
                                               double tau, int direction_id = 0) {
  require_size(q0.size(), oracle.dim(), "start point");
  require_size(e.size(), oracle.dim(), "direction");
  if (!(lambda > 0.0) || !(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda and tau must be positive");
  if (!(e.norm() > 0.0)) throw Error(ErrorCode::InvalidArgument, "direction must be nonzero");
  if (oracle.classify(q0) != Label::Feasible) throw Error(ErrorCode::InfeasibleStart, "start point is infeasible");

  DirectionResult result;
  const Vector unit = e / e.norm();
  auto bracket = detail::search_ray(oracle, q0, unit, lambda, tau, direction_id, result.points);
  if (!bracket) throw Error(ErrorCode::LambdaTooSmall, "ray endpoint is feasible; increase lambda");
  result.feasible_end = std::move(bracket->feasible);
  result.infeasible_end = std::move(bracket->infeasible);
  return result;
}

struct ActiveSamplingOptions {
  int budget = 400;          // N0, hard cap on oracle calls
  double tau = 1e-2;
  double lambda0 = 8.0;
  std::uint64_t seed = 0;
  int max_doublings = 20;
};

/// Random binary search: draws uniform unit directions and bisects along each
/// until the next direction's worst-case cost would exceed the budget. When a
/// ray endpoint is still feasible, lambda is doubled (and kept for later
/// directions) as long as the budget allows.
inline QueryLog active_sample(const Oracle& oracle, const Vector& q0, const ActiveSamplingOptions& opt) {
  require_size(q0.size(), oracle.dim(), "start point");
  if (opt.budget < 2) throw Error(ErrorCode::InvalidArgument, "budget N0 must be at least 2");
  if (!(opt.tau > 0.0) || !(opt.lambda0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau and lambda0 must be positive");
  if (oracle.classify(q0) != Label::Feasible) throw Error(ErrorCode::InfeasibleStart, "start point is infeasible");

  std::mt19937_64 rng(opt.seed);
  QueryLog log;
  double lambda = opt.lambda0;
  int doublings = 0;
  const auto budget = static_cast<std::size_t>(opt.budget);
  auto used = [&] { return log.points.size(); };

  while (used() + static_cast<std::size_t>(direction_cost(lambda, opt.tau)) <= budget) {
    const Vector e = detail::unit_direction(rng, oracle.dim());
    std::optional<Bracket> bracket;
    while (true) {
      bracket = detail::search_ray(oracle, q0, e, lambda, opt.tau, log.direction_count, log.points);
      if (bracket) break;
      if (++doublings > opt.max_doublings) {
        throw Error(ErrorCode::LambdaTooSmall, "ray endpoint still feasible after " +
                                                   std::to_string(opt.max_doublings) + " doublings of lambda");
      }
      lambda *= 2.0;
      if (used() + static_cast<std::size_t>(direction_cost(lambda, opt.tau)) > budget) break;
    }
    if (!bracket) break;
    log.brackets.push_back(std::move(*bracket));
    ++log.direction_count;
  }
  log.oracle_calls = log.points.size();
  return log;
}

/// Passive baseline: `count` uniform points in `box`, each queried.
inline QueryLog random_sample(const Oracle& oracle, const Box& box, int count, std::uint64_t seed) {
  require_size(box.dim(), oracle.dim(), "sampling box");
  validate_box(box);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  QueryLog log;
  log.points.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 0; k < count; ++k) {
    Vector q(box.dim());
    for (Eigen::Index i = 0; i < box.dim(); ++i) q(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * unit(rng);
    const Label y = oracle.query(q);
    log.points.push_back(LabeledPoint{std::move(q), y, 1.0, -1});
  }
  log.oracle_calls = log.points.size();
  return log;
}

/// First candidate the oracle labels feasible.
inline Vector find_feasible_start(const Oracle& oracle, std::span<const Vector> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no start candidates given");
  std::string labels;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const Label y = oracle.query(candidates[k]);
    if (y == Label::Feasible) return candidates[k];
    labels += (labels.empty() ? "" : ",") + std::to_string(sign(y));
  }
  throw Error(ErrorCode::NoFeasibleStart, "all " + std::to_string(candidates.size()) + " candidates infeasible (labels " +
                                              labels + ")");
}

/// CSV with columns `direction_id,q_1..q_d,label`.
inline void write_query_log_csv(const std::filesystem::path& path, const QueryLog& log, Eigen::Index d) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::MissingInput, "cannot write " + path.string());
  out << "direction_id";
  for (Eigen::Index i = 1; i <= d; ++i) out << ",q_" << i;
  out << ",label\n";
  for (const auto& pt : log.points) {
    out << pt.direction_id;
    for (Eigen::Index i = 0; i < pt.q.size(); ++i) out << ',' << io::format_double(pt.q(i));
    out << ',' << sign(pt.y) << '\n';
  }
}

inline QueryLog read_query_log_csv(const std::filesystem::path& path) {
  const auto rows = io::read_csv(path);
  QueryLog log;
  if (rows.empty()) return log;
  const auto cols = rows.front().size();
  if (cols < 3 || rows.front().front() != "direction_id") {
    throw Error(ErrorCode::ParseError, path.string() + ": missing query log header");
  }
  int max_dir = -1;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string where = path.string() + ":" + std::to_string(r + 1);
    if (rows[r].size() != cols) throw Error(ErrorCode::ParseError, where + ": ragged row");
    LabeledPoint pt;
    pt.direction_id = static_cast<int>(io::parse_double(rows[r][0], where));
    pt.q.resize(static_cast<Eigen::Index>(cols - 2));
    for (std::size_t i = 1; i + 1 < cols; ++i) pt.q(static_cast<Eigen::Index>(i - 1)) = io::parse_double(rows[r][i], where);
    pt.y = io::parse_double(rows[r].back(), where) < 0 ? Label::Feasible : Label::Infeasible;
    max_dir = std::max(max_dir, pt.direction_id);
    log.points.push_back(std::move(pt));
  }
  log.direction_count = max_dir + 1;
  log.oracle_calls = log.points.size();
  return log;
}

}  // namespace chance_region
