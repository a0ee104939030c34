#pragma once

// Reactive-power dispatch over a learned ellipsoid: minimize 1/2 ||q - target||^2
// (target = 0 gives the minimum-norm dispatch) subject to f(q) <= 0 and an
// optional per-bus box.

#include "chance_region/common.hpp"
#include "chance_region/ellipsoid.hpp"
#include "chance_region/oracle.hpp"
#include "chance_region/projection.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace chance_region {

enum class ActiveConstraint { Interior, Ellipsoid, Box, Both, Scenario };

constexpr std::string_view to_string(ActiveConstraint a) {
  switch (a) {
    case ActiveConstraint::Interior: return "interior";
    case ActiveConstraint::Ellipsoid: return "ellipsoid";
    case ActiveConstraint::Box: return "box";
    case ActiveConstraint::Both: return "both";
    case ActiveConstraint::Scenario: return "scenario";
  }
  return "interior";
}

struct SolveResult {
  Vector q_star;
  double objective = 0.0;  // 1/2 ||q*||^2
  double q_norm = 0.0;
  ActiveConstraint active_constraint = ActiveConstraint::Interior;
  std::optional<double> risk_heldout;
};

inline nlohmann::json to_json(const SolveResult& r) {
  nlohmann::json j{{"q_star", to_json_vector(r.q_star)},
                   {"objective", r.objective},
                   {"q_norm", r.q_norm},
                   {"active_constraint", std::string(to_string(r.active_constraint))}};
  j["risk_heldout"] = r.risk_heldout ? nlohmann::json(*r.risk_heldout) : nlohmann::json(nullptr);
  return j;
}

/// Euclidean projection onto {f <= 0} via the scalar secular equation
/// f(q(lambda)) = 0 with q(lambda) = q_ref + (I + 2 lambda M)^{-1}(u_y - lambda h).
/// The eigendecomposition of M is computed once and reused.
class EllipsoidProjector {
 public:
  explicit EllipsoidProjector(const Ellipsoid& e) : e_(e) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (e.M + e.M.transpose()));
    lam_ = eig.eigenvalues();
    V_ = eig.eigenvectors();
    if (!(lam_.minCoeff() > 0.0)) throw Error(ErrorCode::InvalidArgument, "ellipsoid matrix must be positive definite");
    hb_ = V_.transpose() * e.h;
  }

  const Ellipsoid& ellipsoid() const { return e_; }

  Vector operator()(const Vector& y) const { return project(y); }

  Vector project(const Vector& y, double ftol = 1e-10) const {
    require_size(y.size(), e_.dim(), "projected point");
    if (e_.value(y) <= 0.0) return y;
    const Vector a = V_.transpose() * (y - e_.q_ref);

    auto w_of = [&](double lam) { return Vector((a - lam * hb_).array() / (1.0 + 2.0 * lam * lam_.array())); };
    auto phi = [&](const Vector& w) { return (lam_.array() * w.array().square()).sum() + hb_.dot(w) - 1.0; };

    double lo = 0.0, hi = 1.0 / std::max(lam_.maxCoeff(), 1e-300);
    int doublings = 0;
    while (phi(w_of(hi)) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 200) {
        throw Error(ErrorCode::MaxIterations, "could not bracket the projection multiplier (lambda up to " +
                                                  std::to_string(hi) + ")");
      }
    }
    double lam = 0.5 * (lo + hi);
    for (int it = 0; it < 500; ++it) {
      const Vector w = w_of(lam);
      const double val = phi(w);
      if (std::abs(val) <= ftol) return e_.q_ref + V_ * w;
      (val > 0.0 ? lo : hi) = lam;
      // Newton step on phi, falling back to bisection outside the bracket.
      const Vector dw = -(hb_.array() + 2.0 * lam_.array() * a.array()) / (1.0 + 2.0 * lam * lam_.array()).square();
      const double dphi = (2.0 * lam_.array() * w.array() + hb_.array()).matrix().dot(dw);
      double next = dphi < 0.0 ? lam - val / dphi : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (hi - lo <= 1e-16 * std::max(1.0, hi)) {
        return e_.q_ref + V_ * w_of(hi);  // hi keeps phi <= 0
      }
      lam = next;
    }
    throw Error(ErrorCode::MaxIterations,
                "projection root-finding stalled with lambda in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

 private:
  Ellipsoid e_;
  Vector lam_;
  Matrix V_;
  Vector hb_;
};

inline Vector project_onto_ellipsoid(const Ellipsoid& e, const Vector& y) { return EllipsoidProjector(e).project(y); }

struct DispatchOptions {
  std::optional<Box> box;
  std::optional<Vector> target;  // minimize 1/2 ||q - target||^2; default origin
  double tol = 1e-10;
  int max_iters = 100000;
  double membership_tol = 1e-8;
};

inline DispatchOptions with_box(std::optional<Box> box) {
  DispatchOptions opt;
  opt.box = std::move(box);
  return opt;
}

inline ActiveConstraint classify_active(const Ellipsoid& e, const std::optional<Box>& box, const Vector& q) {
  const bool on_e = std::abs(e.value(q)) <= 1e-7;
  bool on_box = false;
  if (box) {
    on_box = ((q - box->lo).array().abs() <= 1e-10).any() || ((box->hi - q).array().abs() <= 1e-10).any();
  }
  if (on_e && on_box) return ActiveConstraint::Both;
  if (on_e) return ActiveConstraint::Ellipsoid;
  if (on_box) return ActiveConstraint::Box;
  return ActiveConstraint::Interior;
}

/// Minimum-norm (or nearest-to-target) point of the ellipsoid, intersected with
/// the box through Dykstra's algorithm when one is given.
inline SolveResult solve_dispatch(const Ellipsoid& e, const DispatchOptions& opt = {}) {
  const auto d = e.dim();
  const Vector target = opt.target.value_or(Vector::Zero(d));
  require_size(target.size(), d, "target");
  const EllipsoidProjector proj(e);

  Vector q = proj.project(target);
  if (opt.box) {
    require_size(opt.box->dim(), d, "reactive box");
    validate_box(*opt.box);
    if (!opt.box->contains(q)) {
      const Box box = *opt.box;
      auto res = dykstra(target, {[&](const Vector& y) { return proj.project(y); },
                                  [&](const Vector& y) { return box.clamp(y); }},
                         opt.tol, opt.max_iters);
      q = res.x;
      if (e.value(q) > opt.membership_tol) {
        // Pull the box iterate back onto the ellipsoid and re-clip once; this
        // removes the last Dykstra residual when the sets do intersect.
        const Vector polished = box.clamp(proj.project(q));
        if (e.value(polished) <= opt.membership_tol) q = polished;
      }
      if (!box.contains(q, 1e-12) || e.value(q) > opt.membership_tol) {
        throw Error(ErrorCode::InfeasibleIntersection,
                    "ellipsoid and box do not intersect (f = " + std::to_string(e.value(q)) + " after " +
                        std::to_string(res.iterations) + " Dykstra sweeps)");
      }
    }
  }

  SolveResult out;
  out.q_star = q;
  out.objective = 0.5 * (q - target).squaredNorm();
  out.q_norm = q.norm();
  out.active_constraint = classify_active(e, opt.box, q);
  return out;
}

/// Held-out violation rate 1 - g_hat(q).
inline double evaluate_risk(const NetworkModel& net, const ChanceSpec& spec, const ScenarioSet& heldout, const Vector& q) {
  return 1.0 - empirical_g(net, spec, heldout, q);
}

}  // namespace chance_region
