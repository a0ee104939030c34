#pragma once

// Fits {q : (q-q_ref)^T M (q-q_ref) + h^T (q-q_ref) - 1 <= 0}, M PSD, to labeled
// points by minimizing the weighted one-sided loss
//
//   sum_n nu_n * max(0, -y_n f(q_n))
//
// with projected subgradient descent, plus the diagnostics used to judge a fit:
// parameter error, lifted data matrix, projection bound and Monte-Carlo overlap.

#include "chance_region/common.hpp"
#include "chance_region/ellipsoid.hpp"
#include "chance_region/oracle.hpp"
#include "chance_region/sampler.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <utility>

namespace chance_region {

struct FitConfig {
  int max_iters = 20000;
  /// Step length at t = 1 along the normalized subgradient, relative to the
  /// norm of the initial parameters; later steps scale as 1/sqrt(t).
  double step0 = 0.5;
  double eig_floor = 1e-6;
  double nu_feasible = 1.0;
  double nu_infeasible = 10.0;  // false positives cost more
  double volume_reg_mu = 0.0;
  /// Called after every projected step with the current iterate.
  std::function<void(int, const Ellipsoid&)> on_iteration;
};

struct FitReport {
  double loss = 0.0;       // weighted one-sided loss of the returned ellipsoid
  double objective = 0.0;  // loss plus the volume term when enabled
  int iterations = 0;
  int misclassified_feasible = 0;    // y = -1 but f > 0
  int misclassified_infeasible = 0;  // y = +1 but f < 0
  Vector w;                          // [h; vec(M)]
};

inline nlohmann::json to_json(const FitReport& r) {
  return nlohmann::json{{"loss", r.loss},
                        {"objective", r.objective},
                        {"iterations", r.iterations},
                        {"misclassified_feasible", r.misclassified_feasible},
                        {"misclassified_infeasible", r.misclassified_infeasible},
                        {"w", to_json_vector(r.w)}};
}

inline double point_weight(const LabeledPoint& pt, const FitConfig& cfg) {
  return pt.nu * (pt.y == Label::Feasible ? cfg.nu_feasible : cfg.nu_infeasible);
}

/// Direct evaluation of the weighted one-sided loss (no volume term).
inline double weighted_loss(std::span<const LabeledPoint> points, const Ellipsoid& e, const FitConfig& cfg) {
  double loss = 0.0;
  for (const auto& pt : points) loss += point_weight(pt, cfg) * std::max(0.0, -sign(pt.y) * e.value(pt.q));
  return loss;
}

// --- symmetric parameterization ---------------------------------------------
// theta = [h (d); M_ii (d); M_ij, i<j], lifted features z(u) = [u; u_i^2; 2 u_i u_j]
// so that f(u) = theta . z(u) - 1.

namespace quadric {

inline Eigen::Index param_count(Eigen::Index d) { return d + d * (d + 1) / 2; }

inline Vector to_theta(const Matrix& M, const Vector& h) {
  const auto d = h.size();
  Vector th(param_count(d));
  th.head(d) = h;
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i) th(k++) = M(i, i);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) th(k++) = 0.5 * (M(i, j) + M(j, i));
  return th;
}

inline std::pair<Matrix, Vector> from_theta(const Vector& th, Eigen::Index d) {
  Vector h = th.head(d);
  Matrix M(d, d);
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i) M(i, i) = th(k++);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) M(i, j) = M(j, i) = th(k++);
  return {std::move(M), std::move(h)};
}

inline void lift_into(const Vector& u, Eigen::Ref<Vector> z) {
  const auto d = u.size();
  z.head(d) = u;
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i) z(k++) = u(i) * u(i);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) z(k++) = 2.0 * u(i) * u(j);
}

/// Gradient of mu * log det(M + floor I) in theta coordinates (h block is zero).
inline Vector logdet_gradient(const Matrix& M, double floor, double mu) {
  const auto d = M.rows();
  const Matrix inv = (M + floor * Matrix::Identity(d, d)).ldlt().solve(Matrix::Identity(d, d));
  Vector g = Vector::Zero(param_count(d));
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i) g(k++) = mu * inv(i, i);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i + 1; j < d; ++j) g(k++) = 2.0 * mu * inv(i, j);
  return g;
}

inline double logdet(const Matrix& M, double floor) {
  const auto d = M.rows();
  Eigen::LDLT<Matrix> ldlt(M + floor * Matrix::Identity(d, d));
  return ldlt.vectorD().array().log().sum();
}

/// Symmetric projection onto {M : lambda_min(M) >= floor}.
inline Matrix project_psd(const Matrix& M, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (M + M.transpose()));
  const Vector lam = eig.eigenvalues().cwiseMax(floor);
  Matrix P = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (P + P.transpose());
}

}  // namespace quadric

namespace detail {

struct FitProblem {
  Matrix Z;       // N x param_count, row-major features of translated points
  Vector weight;  // nu_n
  Vector ysign;   // y_n as +-1
  Eigen::Index d = 0;

  FitProblem(std::span<const LabeledPoint> points, const Vector& q_ref, const FitConfig& cfg) : d(q_ref.size()) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Z.resize(n, quadric::param_count(d));
    weight.resize(n);
    ysign.resize(n);
    Vector z(quadric::param_count(d));
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& pt = points[static_cast<std::size_t>(k)];
      require_size(pt.q.size(), d, "labeled point");
      quadric::lift_into(pt.q - q_ref, z);
      Z.row(k) = z.transpose();
      weight(k) = point_weight(pt, cfg);
      ysign(k) = sign(pt.y);
    }
  }

  // Loss and subgradient at theta. At f = 0 the zero subgradient is used.
  double loss(const Vector& theta, Vector* grad) const {
    const Vector f = (Z * theta).array() - 1.0;
    Vector coef = Vector::Zero(f.size());
    double total = 0.0;
    for (Eigen::Index k = 0; k < f.size(); ++k) {
      const double m = -ysign(k) * f(k);
      if (m > 0.0) {
        total += weight(k) * m;
        coef(k) = -ysign(k) * weight(k);
      }
    }
    if (grad) *grad = Z.transpose() * coef;
    return total;
  }
};

}  // namespace detail

/// Subgradient of the fitting objective with respect to the symmetric parameters
/// (see quadric::to_theta), evaluated at `e`. Includes the volume term when mu > 0.
inline Vector loss_subgradient(std::span<const LabeledPoint> points, const Ellipsoid& e, const FitConfig& cfg) {
  detail::FitProblem prob(points, e.q_ref, cfg);
  Vector g;
  prob.loss(quadric::to_theta(e.M, e.h), &g);
  if (cfg.volume_reg_mu > 0.0) g += quadric::logdet_gradient(e.M, cfg.eig_floor, cfg.volume_reg_mu);
  return g;
}

inline double fit_objective(std::span<const LabeledPoint> points, const Ellipsoid& e, const FitConfig& cfg) {
  double obj = weighted_loss(points, e, cfg);
  if (cfg.volume_reg_mu > 0.0) obj += cfg.volume_reg_mu * quadric::logdet(e.M, cfg.eig_floor);
  return obj;
}

inline FitReport make_report(std::span<const LabeledPoint> points, const Ellipsoid& e, const FitConfig& cfg,
                             int iterations) {
  FitReport rep;
  rep.loss = weighted_loss(points, e, cfg);
  rep.objective = fit_objective(points, e, cfg);
  rep.iterations = iterations;
  for (const auto& pt : points) {
    const double f = e.value(pt.q);
    if (pt.y == Label::Feasible && f > 0.0) ++rep.misclassified_feasible;
    if (pt.y == Label::Infeasible && f < 0.0) ++rep.misclassified_infeasible;
  }
  rep.w = e.flat_params();
  return rep;
}

/// Projected subgradient descent on the weighted one-sided loss. Points are in
/// original coordinates; the fit is parameterized around `q_ref`, which must be
/// a known feasible point. Returns the iterate with the smallest objective.
inline std::pair<Ellipsoid, FitReport> fit(std::span<const LabeledPoint> points, const Vector& q_ref,
                                           const FitConfig& cfg = {}) {
  const auto d = q_ref.size();
  double r_sum = 0.0;
  int n_feasible = 0, n_infeasible = 0;
  for (const auto& pt : points) {
    require_size(pt.q.size(), d, "labeled point");
    if (!(pt.nu > 0.0)) throw Error(ErrorCode::InvalidArgument, "point weights must be positive");
    if (pt.y == Label::Feasible) {
      ++n_feasible;
    } else {
      ++n_infeasible;
      r_sum += (pt.q - q_ref).norm();
    }
  }
  if (n_feasible == 0) throw Error(ErrorCode::NoFeasiblePoints, "fit needs at least one feasible point");
  if (n_infeasible == 0) throw Error(ErrorCode::NoInfeasiblePoints, "fit needs at least one infeasible point");
  if (!(cfg.eig_floor > 0.0)) throw Error(ErrorCode::InvalidArgument, "eig_floor must be positive");
  if (cfg.max_iters < 0 || !(cfg.step0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "bad solver settings");

  const detail::FitProblem prob(points, q_ref, cfg);
  const bool regularized = cfg.volume_reg_mu > 0.0;

  // Start from the ball through the mean infeasible distance; q_ref is inside.
  const double r = std::max(r_sum / n_infeasible, 1e-12);
  Matrix M = Matrix::Identity(d, d) / (r * r);
  Vector theta = quadric::to_theta(M, Vector::Zero(d));
  const double scale = theta.norm();

  auto objective = [&](const Vector& th, const Matrix& Mcur, Vector* grad) {
    double obj = prob.loss(th, grad);
    if (regularized) {
      obj += cfg.volume_reg_mu * quadric::logdet(Mcur, cfg.eig_floor);
      if (grad) *grad += quadric::logdet_gradient(Mcur, cfg.eig_floor, cfg.volume_reg_mu);
    }
    return obj;
  };

  Vector grad;
  double best_obj = objective(theta, M, &grad);
  Vector best_theta = theta;
  int iter = 0;
  for (int t = 1; t <= cfg.max_iters; ++t) {
    if (!regularized && best_obj == 0.0) break;
    const double gnorm = grad.norm();
    if (!(gnorm > 0.0)) break;
    theta -= (cfg.step0 * scale / std::sqrt(static_cast<double>(t)) / gnorm) * grad;

    auto [Mt, ht] = quadric::from_theta(theta, d);
    M = quadric::project_psd(Mt, cfg.eig_floor);
    theta = quadric::to_theta(M, ht);
    iter = t;
    if (cfg.on_iteration) cfg.on_iteration(t, Ellipsoid{M, ht, -1.0, q_ref});

    const double obj = objective(theta, M, &grad);
    if (!std::isfinite(obj) || !theta.allFinite()) {
      throw Error(ErrorCode::NonFiniteLoss, "objective diverged at iteration " + std::to_string(t));
    }
    if (obj < best_obj) {
      best_obj = obj;
      best_theta = theta;
    }
  }

  auto [Mb, hb] = quadric::from_theta(best_theta, d);
  Ellipsoid e{std::move(Mb), std::move(hb), -1.0, q_ref};
  FitReport rep = make_report(points, e, cfg, iter);
  return {std::move(e), std::move(rep)};
}

// --- diagnostics ------------------------------------------------------------

/// || [h_a; vec(M_a)] - [h_b; vec(M_b)] ||_2 for ellipsoids sharing c and q_ref.
inline double param_error(const Ellipsoid& fitted, const Ellipsoid& truth) {
  require_size(fitted.dim(), truth.dim(), "ellipsoid dimension");
  if (fitted.c != truth.c) throw Error(ErrorCode::ConventionMismatch, "intercepts differ");
  if ((fitted.q_ref - truth.q_ref).cwiseAbs().maxCoeff() > 1e-12) {
    throw Error(ErrorCode::ConventionMismatch, "reference points differ");
  }
  return (fitted.flat_params() - truth.flat_params()).norm();
}

/// Lifted data matrix with rows [q; vec(q q^T)] (all d^2 entries), optionally
/// followed by an intercept column of ones.
struct DataMatrix {
  Matrix Z;
  Eigen::Index d = 0;
  bool intercept = false;
};

inline DataMatrix data_matrix(std::span<const LabeledPoint> points, const Vector& q_ref, bool with_intercept = false) {
  const auto d = q_ref.size();
  const auto D = d + d * d + (with_intercept ? 1 : 0);
  DataMatrix out{Matrix(static_cast<Eigen::Index>(points.size()), D), d, with_intercept};
  for (Eigen::Index n = 0; n < out.Z.rows(); ++n) {
    const Vector u = points[static_cast<std::size_t>(n)].q - q_ref;
    require_size(u.size(), d, "labeled point");
    out.Z.row(n).head(d) = u.transpose();
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) out.Z(n, d + i * d + j) = u(i) * u(j);
    if (with_intercept) out.Z(n, D - 1) = 1.0;
  }
  return out;
}

/// lambda_min(Z^T Z / N) over the distinct lifted coordinates. vec(q q^T)
/// repeats every off-diagonal product, so the duplicates are dropped first;
/// otherwise the Gram matrix is singular for any data when d >= 2.
inline double min_eig_normalized(const DataMatrix& dm) {
  const auto N = dm.Z.rows();
  if (N == 0) return 0.0;
  const auto d = dm.d;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < d; ++i) cols.push_back(i);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = i; j < d; ++j) cols.push_back(d + i * d + j);
  if (dm.intercept) cols.push_back(dm.Z.cols() - 1);
  Matrix Zu(N, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) Zu.col(static_cast<Eigen::Index>(k)) = dm.Z.col(cols[k]);
  const Matrix gram = Zu.transpose() * Zu / static_cast<double>(N);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().minCoeff());
}

/// Returns (||P_Z x||_2, c sqrt(D)) with P_Z = Z (Z^T Z)^{-1} Z^T.
inline std::pair<double, double> lemma1_check(const Matrix& Z, const Vector& x, double c) {
  const auto N = Z.rows(), D = Z.cols();
  require_size(x.size(), N, "x");
  if (N <= D) throw Error(ErrorCode::InvalidArgument, "projection bound needs N > D");
  if (x.size() > 0 && x.cwiseAbs().maxCoeff() > c) throw Error(ErrorCode::InvalidArgument, "||x||_inf exceeds c");
  Eigen::ColPivHouseholderQR<Matrix> qr(Z);
  if (qr.rank() < D) throw Error(ErrorCode::SingularGram, "Z^T Z is singular");
  const Matrix Q = qr.householderQ() * Matrix::Identity(N, D);
  const Vector proj = Q * (Q.transpose() * x);
  return {proj.norm(), c * std::sqrt(static_cast<double>(D))};
}

/// Monte-Carlo Jaccard index |A n B| / |A u B| from uniform samples in `box`.
inline double region_overlap(const Oracle& a, const Oracle& b, const Box& box, int mc_samples, std::uint64_t seed) {
  require_size(a.dim(), box.dim(), "region a");
  require_size(b.dim(), box.dim(), "region b");
  validate_box(box);
  if (mc_samples < 1) throw Error(ErrorCode::InvalidArgument, "mc_samples must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long inter = 0, uni = 0;
  Vector q(box.dim());
  for (int s = 0; s < mc_samples; ++s) {
    for (Eigen::Index i = 0; i < box.dim(); ++i) q(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * unit(rng);
    const bool in_a = a.feasible(q), in_b = b.feasible(q);
    inter += (in_a && in_b) ? 1 : 0;
    uni += (in_a || in_b) ? 1 : 0;
  }
  if (uni == 0) throw Error(ErrorCode::EmptyUnion, "no sample fell in either region");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Fraction of the region `fitted` lying outside `truth` (false-positive rate).
inline double false_positive_rate(const Oracle& truth, const Oracle& fitted, const Box& box, int mc_samples,
                                  std::uint64_t seed) {
  validate_box(box);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  long in_fit = 0, outside = 0;
  Vector q(box.dim());
  for (int s = 0; s < mc_samples; ++s) {
    for (Eigen::Index i = 0; i < box.dim(); ++i) q(i) = box.lo(i) + (box.hi(i) - box.lo(i)) * unit(rng);
    if (fitted.feasible(q)) {
      ++in_fit;
      outside += truth.feasible(q) ? 0 : 1;
    }
  }
  if (in_fit == 0) throw Error(ErrorCode::EmptyUnion, "fitted region has no samples");
  return static_cast<double>(outside) / static_cast<double>(in_fit);
}

}  // namespace chance_region
