#pragma once

// Membership oracles. A query returns Label::Feasible (-1) or Label::Infeasible (+1).

#include "chance_region/common.hpp"
#include "chance_region/ellipsoid.hpp"
#include "chance_region/grid_model.hpp"
#include "chance_region/io.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <utility>

namespace chance_region {

enum class Label : int { Feasible = -1, Infeasible = 1 };

constexpr int sign(Label y) { return static_cast<int>(y); }

/// S x d matrix of noise realizations, one scenario per row.
struct ScenarioSet {
  Matrix samples;

  Eigen::Index count() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }

  ScenarioSet head(Eigen::Index n) const { return ScenarioSet{samples.topRows(n)}; }
};

struct ChanceSpec {
  Vector v_lo;
  Vector v_hi;
  double alpha = 0.9;

  static ChanceSpec uniform(Eigen::Index d, double lo, double hi, double alpha) {
    return ChanceSpec{Vector::Constant(d, lo), Vector::Constant(d, hi), alpha};
  }
};

inline void validate(const ChanceSpec& spec, Eigen::Index d) {
  require_size(spec.v_lo.size(), d, "v_lo");
  require_size(spec.v_hi.size(), d, "v_hi");
  if (!(spec.v_lo.array() < spec.v_hi.array()).all()) {
    throw Error(ErrorCode::InvalidArgument, "voltage bounds require v_lo < v_hi");
  }
  if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must lie in (0, 1]");
  }
}

/// Number of scenarios whose voltage profile stays within [v_lo, v_hi] on every bus.
inline Eigen::Index satisfied_count(const NetworkModel& net, const ChanceSpec& spec, const ScenarioSet& scen,
                                    const Vector& q) {
  const auto d = net.dim();
  require_size(q.size(), d, "q");
  require_size(scen.dim(), d, "scenario columns");
  require_size(spec.v_lo.size(), d, "v_lo");
  require_size(spec.v_hi.size(), d, "v_hi");
  const Vector mean = net.R * net.p + net.X * q;
  Eigen::Index count = 0;
  for (Eigen::Index s = 0; s < scen.count(); ++s) {
    bool ok = true;
    for (Eigen::Index i = 0; i < d && ok; ++i) {
      const double v = mean(i) + scen.samples(s, i);
      ok = v >= spec.v_lo(i) && v <= spec.v_hi(i);
    }
    count += ok ? 1 : 0;
  }
  return count;
}

/// Fraction of scenarios with all voltages in bounds.
inline double empirical_g(const NetworkModel& net, const ChanceSpec& spec, const ScenarioSet& scen, const Vector& q) {
  if (scen.count() == 0) throw Error(ErrorCode::DimensionMismatch, "scenario set is empty");
  return static_cast<double>(satisfied_count(net, spec, scen, q)) / static_cast<double>(scen.count());
}

/// Minimum number of satisfied scenarios for g >= alpha; ties count as feasible.
inline Eigen::Index required_count(double alpha, Eigen::Index S) {
  return static_cast<Eigen::Index>(std::ceil(alpha * static_cast<double>(S) - 1e-9));
}

// --- oracle interface -------------------------------------------------------

class Oracle {
 public:
  Oracle() = default;
  Oracle(const Oracle&) = delete;
  Oracle& operator=(const Oracle&) = delete;
  virtual ~Oracle() = default;

  virtual Eigen::Index dim() const = 0;

  /// Label without touching the query counter (used by evaluation metrics).
  virtual Label classify(const Vector& q) const = 0;

  Label query(const Vector& q) const {
    require_size(q.size(), dim(), "query point");
    calls_.fetch_add(1, std::memory_order_relaxed);
    return classify(q);
  }

  bool feasible(const Vector& q) const { return classify(q) == Label::Feasible; }

  std::size_t calls() const { return calls_.load(std::memory_order_relaxed); }
  void reset_calls() { calls_.store(0, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::size_t> calls_{0};
};

/// Monte-Carlo chance-constraint oracle: feasible iff g_hat(q) >= alpha.
/// An optional reactive-power box is part of the feasible set when supplied.
class EmpiricalChanceOracle final : public Oracle {
 public:
  EmpiricalChanceOracle(NetworkModel net, ChanceSpec spec, ScenarioSet scen, std::optional<Box> q_box = std::nullopt)
      : net_(std::move(net)), spec_(std::move(spec)), scen_(std::move(scen)), q_box_(std::move(q_box)) {
    validate(spec_, net_.dim());
    require_size(scen_.dim(), net_.dim(), "scenario columns");
    if (scen_.count() < 1) throw Error(ErrorCode::DimensionMismatch, "scenario set is empty");
    if (q_box_) {
      require_size(q_box_->dim(), net_.dim(), "reactive box");
      validate_box(*q_box_);
    }
    needed_ = required_count(spec_.alpha, scen_.count());
  }

  Eigen::Index dim() const override { return net_.dim(); }

  Label classify(const Vector& q) const override {
    if (q_box_ && !q_box_->contains(q)) return Label::Infeasible;
    return satisfied_count(net_, spec_, scen_, q) >= needed_ ? Label::Feasible : Label::Infeasible;
  }

  double g(const Vector& q) const { return empirical_g(net_, spec_, scen_, q); }

  const NetworkModel& network() const { return net_; }
  const ChanceSpec& spec() const { return spec_; }
  const ScenarioSet& scenarios() const { return scen_; }
  const std::optional<Box>& reactive_box() const { return q_box_; }

 private:
  NetworkModel net_;
  ChanceSpec spec_;
  ScenarioSet scen_;
  std::optional<Box> q_box_;
  Eigen::Index needed_ = 0;
};

/// Ground truth {x : ||A x - b||_2 <= 1}.
class EllipseOracle final : public Oracle {
 public:
  EllipseOracle(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b)) {
    require_size(A_.cols(), A_.rows(), "A columns");
    require_size(b_.size(), A_.rows(), "b");
    if (Eigen::FullPivLU<Matrix>(A_).rank() < A_.rows()) {
      throw Error(ErrorCode::SingularMatrix, "ellipse matrix A is rank deficient");
    }
  }

  Eigen::Index dim() const override { return A_.cols(); }
  Label classify(const Vector& x) const override {
    return (A_ * x - b_).norm() <= 1.0 ? Label::Feasible : Label::Infeasible;
  }

  const Matrix& A() const { return A_; }
  const Vector& b() const { return b_; }

  /// Same set as an Ellipsoid with c = -1 around `q_ref`.
  Ellipsoid as_ellipsoid(const Vector& q_ref) const {
    const Vector center = A_.fullPivLu().solve(b_);
    return Ellipsoid::from_center_shape(A_.transpose() * A_, center, q_ref);
  }

 private:
  Matrix A_;
  Vector b_;
};

/// Ground truth {x : lo <= x <= hi} (closed).
class BoxOracle final : public Oracle {
 public:
  explicit BoxOracle(Box box) : box_(std::move(box)) { validate_box(box_); }
  BoxOracle(Vector lo, Vector hi) : BoxOracle(Box{std::move(lo), std::move(hi)}) {}

  Eigen::Index dim() const override { return box_.dim(); }
  Label classify(const Vector& x) const override { return box_.contains(x) ? Label::Feasible : Label::Infeasible; }
  const Box& box() const { return box_; }

 private:
  Box box_;
};

/// Membership in a fitted (or known) ellipsoid.
class EllipsoidOracle final : public Oracle {
 public:
  explicit EllipsoidOracle(Ellipsoid e) : e_(std::move(e)) {}
  Eigen::Index dim() const override { return e_.dim(); }
  Label classify(const Vector& q) const override { return e_.contains(q) ? Label::Feasible : Label::Infeasible; }
  const Ellipsoid& ellipsoid() const { return e_; }

 private:
  Ellipsoid e_;
};

/// Adapter for ad-hoc regions given as a predicate.
class FunctionOracle final : public Oracle {
 public:
  FunctionOracle(Eigen::Index d, std::function<bool(const Vector&)> is_feasible)
      : d_(d), is_feasible_(std::move(is_feasible)) {}
  Eigen::Index dim() const override { return d_; }
  Label classify(const Vector& q) const override { return is_feasible_(q) ? Label::Feasible : Label::Infeasible; }

 private:
  Eigen::Index d_;
  std::function<bool(const Vector&)> is_feasible_;
};

// --- scenario generation ----------------------------------------------------

/// Draws S zero-mean Gaussian rows with covariance `sigma`, deterministic for a seed.
/// Semidefinite inputs are factored through their eigenvalues clamped at zero.
inline ScenarioSet gen_scenarios(const Matrix& sigma, Eigen::Index S, std::uint64_t seed) {
  require_size(sigma.cols(), sigma.rows(), "covariance columns");
  if (S < 0) throw Error(ErrorCode::InvalidArgument, "scenario count must be nonnegative");
  const Matrix sym = 0.5 * (sigma + sigma.transpose());
  if ((sigma - sym).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
    throw Error(ErrorCode::NotPSD, "covariance is not symmetric");
  }
  const auto d = sym.rows();
  Matrix factor;
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) {
    factor = llt.matrixL();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.eigenvalues().minCoeff() < -1e-8) throw Error(ErrorCode::NotPSD, "covariance has a negative eigenvalue");
    factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ScenarioSet out{Matrix(S, d)};
  Vector z(d);
  for (Eigen::Index s = 0; s < S; ++s) {
    for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
    out.samples.row(s) = (factor * z).transpose();
  }
  return out;
}

/// Block-correlated covariance: `sigma_hi` with pairwise correlation `rho` on
/// the listed indices, independent `sigma_lo` elsewhere; floored to PSD.
inline Matrix correlated_covariance(Eigen::Index d, std::span<const Eigen::Index> correlated, double sigma_hi,
                                    double sigma_lo, double rho) {
  Vector sd = Vector::Constant(d, sigma_lo);
  for (auto i : correlated) {
    if (i < 0 || i >= d) throw Error(ErrorCode::DimensionMismatch, "correlated index out of range");
    sd(i) = sigma_hi;
  }
  Matrix cov = sd.cwiseProduct(sd).asDiagonal();
  for (auto i : correlated)
    for (auto j : correlated)
      if (i != j) cov(i, j) = rho * sd(i) * sd(j);
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.eigenvalues().minCoeff() < 0.0) {
    cov = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  }
  return cov;
}

inline ScenarioSet read_scenarios_csv(const std::filesystem::path& path) { return ScenarioSet{io::read_matrix_csv(path)}; }

inline void write_scenarios_csv(const std::filesystem::path& path, const ScenarioSet& scen) {
  io::write_matrix_csv(path, scen.samples);
}

}  // namespace chance_region
