#pragma once

// Seeded random instances shared by the property tests.

#include "chance_region/common.hpp"
#include "chance_region/ellipsoid.hpp"
#include "chance_region/grid_model.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace testgen {

using chance_region::Ellipsoid;
using chance_region::Line;
using chance_region::Matrix;
using chance_region::Vector;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vector uniform_vector(std::mt19937_64& rng, Eigen::Index d, double lo, double hi) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

inline Matrix random_rotation(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = n(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ();
}

/// Random tree on buses 0..d: every bus k >= 1 hangs off a bus < k.
inline std::vector<Line> random_tree(std::mt19937_64& rng, int d) {
  std::vector<Line> lines;
  for (int k = 1; k <= d; ++k) {
    const int parent = std::uniform_int_distribution<int>(0, k - 1)(rng);
    lines.push_back(Line{parent, k, uniform(rng, 0.0, 0.1), uniform(rng, 0.0, 0.2)});
  }
  return lines;
}

/// Ellipsoid containing the origin, semi-axes in [ax_lo, ax_hi], center placed at
/// Mahalanobis radius at most `offset` (< 1), expressed with c = -1 around 0.
inline Ellipsoid random_ellipsoid(std::mt19937_64& rng, Eigen::Index d, double ax_lo = 0.5, double ax_hi = 2.0,
                                  double offset = 0.7) {
  const Matrix Q = random_rotation(rng, d);
  Vector inv_sq(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double a = uniform(rng, ax_lo, ax_hi);
    inv_sq(i) = 1.0 / (a * a);
  }
  const Matrix A = Q * inv_sq.asDiagonal() * Q.transpose();
  std::normal_distribution<double> n(0.0, 1.0);
  Vector u(d);
  for (Eigen::Index i = 0; i < d; ++i) u(i) = n(rng);
  u /= std::sqrt(u.dot(A * u));
  const Vector center = u * uniform(rng, 0.0, offset);
  return Ellipsoid::from_center_shape(A, center, Vector::Zero(d));
}

}  // namespace testgen
