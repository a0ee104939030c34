#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chance_region {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Machine-readable failure categories. The CLI reports these names verbatim
/// in its error JSON, so the spelling is part of the external interface.
enum class ErrorCode {
  DimensionMismatch,
  NotATree,
  SingularMatrix,
  NotPSD,
  LambdaTooSmall,
  InfeasibleStart,
  NoFeasibleStart,
  NoFeasiblePoints,
  NoInfeasiblePoints,
  NonFiniteLoss,
  ConventionMismatch,
  SingularGram,
  EmptyUnion,
  MaxIterations,
  InfeasibleIntersection,
  EnumerationCapExceeded,
  DimensionTooHigh,
  MissingInput,
  ParseError,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotATree: return "NotATree";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::LambdaTooSmall: return "LambdaTooSmall";
    case ErrorCode::InfeasibleStart: return "InfeasibleStart";
    case ErrorCode::NoFeasibleStart: return "NoFeasibleStart";
    case ErrorCode::NoFeasiblePoints: return "NoFeasiblePoints";
    case ErrorCode::NoInfeasiblePoints: return "NoInfeasiblePoints";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ConventionMismatch: return "ConventionMismatch";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::EmptyUnion: return "EmptyUnion";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::InfeasibleIntersection: return "InfeasibleIntersection";
    case ErrorCode::EnumerationCapExceeded: return "EnumerationCapExceeded";
    case ErrorCode::DimensionTooHigh: return "DimensionTooHigh";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require_size(Eigen::Index actual, Eigen::Index expected, std::string_view what) {
  if (actual != expected) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + " has length " + std::to_string(actual) + ", expected " +
                    std::to_string(expected));
  }
}

/// Axis-aligned box [lo, hi], closed on both ends.
struct Box {
  Vector lo;
  Vector hi;

  Eigen::Index dim() const { return lo.size(); }

  bool contains(const Vector& x, double slack = 0.0) const {
    return ((x - lo).array() >= -slack).all() && ((hi - x).array() >= -slack).all();
  }

  Vector clamp(const Vector& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

  static Box uniform(Eigen::Index d, double lo, double hi) {
    return Box{Vector::Constant(d, lo), Vector::Constant(d, hi)};
  }
};

inline void validate_box(const Box& box) {
  require_size(box.hi.size(), box.lo.size(), "box upper bound");
  if (!(box.lo.array() < box.hi.array()).all()) {
    throw Error(ErrorCode::InvalidArgument, "box requires lo < hi componentwise");
  }
}

}  // namespace chance_region
