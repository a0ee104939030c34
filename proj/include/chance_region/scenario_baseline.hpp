#pragma once

// Exact scenario-approximation baseline: choose which k = S - ceil(alpha S)
// scenarios to drop by enumeration and solve the minimum-norm dispatch for the
// rest. Only practical for small S.

#include "chance_region/common.hpp"
#include "chance_region/dispatch.hpp"
#include "chance_region/grid_model.hpp"
#include "chance_region/oracle.hpp"
#include "chance_region/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

namespace chance_region {

struct ScenarioSelection {
  std::vector<Eigen::Index> satisfied;  // kept scenario indices, ascending
  Eigen::Index k_drop = 0;
};

/// Selection keeping everything except `dropped` (ascending indices).
inline ScenarioSelection keep_all_but(Eigen::Index S, const std::vector<Eigen::Index>& dropped) {
  ScenarioSelection sel;
  sel.k_drop = static_cast<Eigen::Index>(dropped.size());
  std::size_t next = 0;
  for (Eigen::Index s = 0; s < S; ++s) {
    if (next < dropped.size() && dropped[next] == s) {
      ++next;
      continue;
    }
    sel.satisfied.push_back(s);
  }
  return sel;
}

struct InnerSolution {
  Vector q;
  double objective = 0.0;
};

/// min 1/2 ||q||^2 subject to v_lo <= Rp + Xq + eps_s <= v_hi for every kept s,
/// plus the optional reactive box. Per bus the kept scenarios collapse to one
/// interval on (Xq)_i. Bounds are pulled in by a few ulps-worth so that the
/// returned point re-checks as strictly feasible in floating point.
inline std::optional<InnerSolution> inner_qp(const NetworkModel& net, const ChanceSpec& spec, const ScenarioSet& scen,
                                             const ScenarioSelection& sel, const std::optional<Box>& box = std::nullopt) {
  const auto d = net.dim();
  require_size(scen.dim(), d, "scenario columns");
  require_size(spec.v_lo.size(), d, "v_lo");
  require_size(spec.v_hi.size(), d, "v_hi");
  if (box) require_size(box->dim(), d, "reactive box");

  const Vector rp = net.R * net.p;
  Vector lo = Vector::Constant(d, -std::numeric_limits<double>::infinity());
  Vector hi = Vector::Constant(d, std::numeric_limits<double>::infinity());
  for (auto s : sel.satisfied) {
    if (s < 0 || s >= scen.count()) throw Error(ErrorCode::DimensionMismatch, "scenario index out of range");
    for (Eigen::Index i = 0; i < d; ++i) {
      lo(i) = std::max(lo(i), spec.v_lo(i) - rp(i) - scen.samples(s, i));
      hi(i) = std::min(hi(i), spec.v_hi(i) - rp(i) - scen.samples(s, i));
    }
  }

  std::vector<std::pair<Vector, double>> rows;  // a^T q <= b
  auto add_interval = [&](const Vector& a, double l, double u) {
    if (l > u) return false;
    const double margin = 1e-11 * std::max({1.0, std::abs(l), std::abs(u)});
    if (u - l > 4.0 * margin) {
      l += margin;
      u -= margin;
    }
    if (std::isfinite(u)) rows.emplace_back(a, u);
    if (std::isfinite(l)) rows.emplace_back(-a, -l);
    return true;
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!add_interval(net.X.row(i).transpose(), lo(i), hi(i))) return std::nullopt;
  }
  if (box) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!add_interval(Vector::Unit(d, j), box->lo(j), box->hi(j))) return std::nullopt;
    }
  }

  Matrix A(static_cast<Eigen::Index>(rows.size()), d);
  Vector b(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    A.row(static_cast<Eigen::Index>(r)) = rows[r].first.transpose();
    b(static_cast<Eigen::Index>(r)) = rows[r].second;
  }
  auto q = rows.empty() ? std::optional<Vector>(Vector::Zero(d)) : min_norm_point(A, b);
  if (!q) return std::nullopt;

  // Joint-membership test against the untightened bounds.
  const Vector xq = net.X * *q;
  const double slack = 1e-9;
  if (((xq - lo).array() < -slack).any() || ((xq - hi).array() > slack).any()) return std::nullopt;
  if (box && !box->contains(*q, slack)) return std::nullopt;
  return InnerSolution{*q, 0.5 * q->squaredNorm()};
}

struct ScenarioBaselineOptions {
  std::optional<Box> box;
  double enumeration_cap = 1e6;
  unsigned threads = 1;
};

struct ScenarioResult {
  SolveResult result;
  std::vector<Eigen::Index> drop_set;
  std::uint64_t combinations = 0;
  std::size_t feasible_selections = 0;
};

inline nlohmann::json to_json(const ScenarioResult& r) {
  nlohmann::json j = to_json(r.result);
  j["drop_set"] = r.drop_set;
  j["combinations"] = r.combinations;
  return j;
}

/// C(n, k) as a double (exact well past the enumeration cap).
inline double binomial(Eigen::Index n, Eigen::Index k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (Eigen::Index i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(c);
}

namespace detail {

// Advance a size-k combination of {0..n-1} in lexicographic order.
inline bool next_combination(std::vector<Eigen::Index>& c, Eigen::Index n) {
  const auto k = static_cast<Eigen::Index>(c.size());
  Eigen::Index i = k - 1;
  while (i >= 0 && c[static_cast<std::size_t>(i)] == n - k + i) --i;
  if (i < 0) return false;
  ++c[static_cast<std::size_t>(i)];
  for (Eigen::Index j = i + 1; j < k; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
  return true;
}

struct Candidate {
  std::optional<InnerSolution> sol;
  std::vector<Eigen::Index> drop;
  std::size_t feasible = 0;

  void offer(InnerSolution s, const std::vector<Eigen::Index>& d) {
    ++feasible;
    if (!sol || s.objective < sol->objective || (s.objective == sol->objective && d < drop)) {
      sol = std::move(s);
      drop = d;
    }
  }
};

}  // namespace detail

/// Best scenario-approximation dispatch over every drop-set of size exactly
/// S - ceil(alpha S); dropping fewer can never do better. Work is striped over
/// `threads` workers and reduced with a (objective, drop-set) total order, so
/// the answer does not depend on the thread count.
inline ScenarioResult solve_scenario(const NetworkModel& net, const ChanceSpec& spec, const ScenarioSet& scen,
                                     const ScenarioBaselineOptions& opt = {}) {
  validate(spec, net.dim());
  require_size(scen.dim(), net.dim(), "scenario columns");
  const Eigen::Index S = scen.count();
  if (S < 1) throw Error(ErrorCode::DimensionMismatch, "scenario set is empty");
  const Eigen::Index k = S - required_count(spec.alpha, S);
  const double combos = binomial(S, k);
  if (combos > opt.enumeration_cap) {
    Eigen::Index s_ok = S;
    while (s_ok > 1 && binomial(s_ok, s_ok - required_count(spec.alpha, s_ok)) > opt.enumeration_cap) --s_ok;
    throw Error(ErrorCode::EnumerationCapExceeded,
                "C(" + std::to_string(S) + ", " + std::to_string(k) + ") = " + std::to_string(combos) +
                    " drop-sets exceed the cap of " + std::to_string(opt.enumeration_cap) + "; reduce S to at most " +
                    std::to_string(s_ok) + " or raise alpha");
  }

  const unsigned workers = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(combos)));
  std::vector<detail::Candidate> best(workers);
  auto work = [&](unsigned w) {
    std::vector<Eigen::Index> drop(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) drop[static_cast<std::size_t>(i)] = i;
    std::size_t index = 0;
    do {
      if (index++ % workers != w) continue;
      if (auto sol = inner_qp(net, spec, scen, keep_all_but(S, drop), opt.box)) best[w].offer(std::move(*sol), drop);
    } while (detail::next_combination(drop, S));
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }

  detail::Candidate overall;
  std::size_t feasible = 0;
  for (auto& c : best) {
    feasible += c.feasible;
    if (c.sol) overall.offer(*c.sol, c.drop);
  }
  if (!overall.sol) {
    throw Error(ErrorCode::InfeasibleIntersection, "no selection of " + std::to_string(S - k) +
                                                       " scenarios admits a feasible dispatch");
  }

  ScenarioResult out;
  out.result.q_star = overall.sol->q;
  out.result.objective = overall.sol->objective;
  out.result.q_norm = overall.sol->q.norm();
  out.result.active_constraint = ActiveConstraint::Interior;
  if (opt.box) {
    const auto& q = out.result.q_star;
    const bool on_box = ((q - opt.box->lo).array().abs() <= 1e-9).any() || ((opt.box->hi - q).array().abs() <= 1e-9).any();
    if (on_box) out.result.active_constraint = ActiveConstraint::Box;
  }
  // The unconstrained optimum is q = 0, so a nonzero answer means a kept
  // scenario's voltage bound is binding.
  if (out.result.active_constraint == ActiveConstraint::Interior && out.result.q_norm > 0.0) {
    out.result.active_constraint = ActiveConstraint::Scenario;
  }
  out.drop_set = std::move(overall.drop);
  out.combinations = static_cast<std::uint64_t>(combos);
  out.feasible_selections = feasible;
  return out;
}

}  // namespace chance_region
