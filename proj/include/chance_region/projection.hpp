#pragma once

// Projection machinery: Dykstra's alternating projections for an intersection
// of convex sets, and an exact dual active-set solver for the minimum-norm
// point of a polyhedron {q : A q <= b}.

#include "chance_region/common.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

namespace chance_region {

using Projector = std::function<Vector(const Vector&)>;

struct DykstraResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
};

/// Dykstra's algorithm: converges to the Euclidean projection of `start` onto
/// the intersection of the sets (plain alternation would only find some point
/// of the intersection). Stops when a full sweep moves both the iterate and the
/// correction terms by less than `tol`; the iterate alone can sit still for a
/// sweep while the corrections are still far from their limits.
inline DykstraResult dykstra(const Vector& start, const std::vector<Projector>& sets, double tol = 1e-10,
                             int max_iters = 100000) {
  const std::size_t m = sets.size();
  std::vector<Vector> incr(m, Vector::Zero(start.size()));
  Vector x = start;
  DykstraResult res;
  for (int it = 1; it <= max_iters; ++it) {
    const Vector prev = x;
    double incr_change = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const Vector y = x + incr[k];
      x = sets[k](y);
      Vector next = y - x;
      incr_change += (next - incr[k]).norm();
      incr[k] = std::move(next);
    }
    res.iterations = it;
    if ((x - prev).norm() < tol && incr_change < tol) {
      res.converged = true;
      break;
    }
  }
  res.x = std::move(x);
  return res;
}

inline Vector project_halfspace(const Vector& y, const Vector& a, double b) {
  const double viol = a.dot(y) - b;
  if (viol <= 0.0) return y;
  return y - (viol / a.squaredNorm()) * a;
}

/// argmin ||q||^2 s.t. A q <= b, or nullopt when the polyhedron is empty.
///
/// Goldfarb-Idnani dual method specialized to an identity Hessian: start from
/// the unconstrained minimizer q = 0 and repeatedly add the most violated
/// constraint, dropping active ones whose multipliers would turn negative.
inline std::optional<Vector> min_norm_point(const Matrix& A, const Vector& b, double tol = 1e-12) {
  require_size(b.size(), A.rows(), "constraint bounds");
  const auto d = A.cols();
  const auto m = A.rows();
  Vector x = Vector::Zero(d);
  std::vector<Eigen::Index> active;
  std::vector<double> u;  // multipliers of active constraints

  // Constraints in ">=" form: n_j = -a_j, n_j^T x >= -b_j.
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  const int max_outer = static_cast<int>(10 * (m + d) + 100);
  for (int outer = 0; outer < max_outer; ++outer) {
    Eigen::Index p = -1;
    double worst = tol * scale;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double viol = (A.row(j).dot(x) - b(j)) / std::max(1e-300, A.row(j).norm());
      if (viol > worst) {
        worst = viol;
        p = j;
      }
    }
    if (p < 0) return x;
    // Already active yet flagged: residual round-off only.
    if (std::find(active.begin(), active.end(), p) != active.end()) return x;

    const Vector np = -A.row(p).transpose();
    double up = 0.0;
    for (int inner = 0; inner < max_outer; ++inner) {
      const auto k = static_cast<Eigen::Index>(active.size());
      Vector z = np;
      Vector r = Vector::Zero(k);
      if (k > 0) {
        Matrix N(d, k);
        for (Eigen::Index c = 0; c < k; ++c) N.col(c) = -A.row(active[static_cast<std::size_t>(c)]).transpose();
        r = (N.transpose() * N).ldlt().solve(N.transpose() * np);
        z = np - N * r;
      }
      // Partial step limited by an active multiplier reaching zero.
      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (Eigen::Index c = 0; c < k; ++c) {
        if (r(c) > 1e-14) {
          const double ratio = u[static_cast<std::size_t>(c)] / r(c);
          if (ratio < t1) {
            t1 = ratio;
            drop = c;
          }
        }
      }
      // Full step that makes constraint p active.
      double t2 = std::numeric_limits<double>::infinity();
      const double zn = z.dot(np);
      if (z.norm() > 1e-12 * np.norm() && zn > 0.0) t2 = (A.row(p).dot(x) - b(p)) / zn;

      if (!std::isfinite(t1) && !std::isfinite(t2)) return std::nullopt;
      const double t = std::min(t1, t2);
      if (std::isfinite(t2)) x += t * z;
      for (Eigen::Index c = 0; c < k; ++c) u[static_cast<std::size_t>(c)] -= t * r(c);
      up += t;
      if (t2 <= t1) {
        active.push_back(p);
        u.push_back(up);
        break;
      }
      active.erase(active.begin() + drop);
      u.erase(u.begin() + drop);
    }
  }
  throw Error(ErrorCode::MaxIterations, "active-set QP did not terminate");
}

}  // namespace chance_region
