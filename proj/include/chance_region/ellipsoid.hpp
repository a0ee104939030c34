#pragma once

#include "chance_region/common.hpp"

#include <nlohmann/json.hpp>

namespace chance_region {

/// Quadratic surface f(q) = u^T M u + h^T u + c with u = q - q_ref and c = -1.
/// The region {f <= 0} always contains q_ref strictly (f(q_ref) = -1).
struct Ellipsoid {
  Matrix M;
  Vector h;
  double c = -1.0;
  Vector q_ref;

  Eigen::Index dim() const { return h.size(); }

  double value(const Vector& q) const {
    const Vector u = q - q_ref;
    return u.dot(M * u) + h.dot(u) + c;
  }

  Vector gradient(const Vector& q) const { return 2.0 * M * (q - q_ref) + h; }

  bool contains(const Vector& q, double slack = 0.0) const { return value(q) <= slack; }

  /// Center of the quadric in original coordinates, -M^{-1} h / 2 + q_ref.
  Vector center() const { return q_ref - 0.5 * M.ldlt().solve(h); }

  /// Flattened parameters [h; vec(M)] using all d^2 entries of M, row-major.
  Vector flat_params() const {
    const auto d = dim();
    Vector w(d + d * d);
    w.head(d) = h;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) w(d + i * d + j) = M(i, j);
    return w;
  }

  /// Ellipsoid {x : (x - center)^T A (x - center) <= 1} rewritten with c = -1
  /// around `q_ref`; q_ref must lie strictly inside.
  static Ellipsoid from_center_shape(const Matrix& A, const Vector& center, const Vector& q_ref) {
    const Vector m = center - q_ref;
    const double s = 1.0 - m.dot(A * m);
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "reference point is not strictly inside the ellipsoid");
    return Ellipsoid{A / s, -2.0 * A * m / s, -1.0, q_ref};
  }
};

inline nlohmann::json to_json_vector(const Vector& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

inline nlohmann::json to_json_matrix(const Matrix& m) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) j.push_back(to_json_vector(m.row(i).transpose()));
  return j;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    require_size(static_cast<Eigen::Index>(row.size()), cols, "matrix row");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

/// {"d", "c": -1, "q_ref": [...], "h": [...], "M": [[...]]}
inline nlohmann::json to_json(const Ellipsoid& e) {
  nlohmann::json j;
  j["d"] = e.dim();
  j["c"] = e.c;
  j["q_ref"] = to_json_vector(e.q_ref);
  j["h"] = to_json_vector(e.h);
  j["M"] = to_json_matrix(e.M);
  return j;
}

inline Ellipsoid ellipsoid_from_json(const nlohmann::json& j) {
  try {
    Ellipsoid e{matrix_from_json(j.at("M")), vector_from_json(j.at("h")), j.at("c").get<double>(),
                vector_from_json(j.at("q_ref"))};
    const auto d = j.at("d").get<Eigen::Index>();
    require_size(e.h.size(), d, "h");
    require_size(e.q_ref.size(), d, "q_ref");
    require_size(e.M.rows(), d, "M rows");
    require_size(e.M.cols(), d, "M cols");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("ellipsoid JSON: ") + ex.what());
  }
}

}  // namespace chance_region
