// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace conecalc {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

/// Machine-readable failure categories. The CLI maps these onto exit codes.
enum class ErrorCode {
  SingularFamily,
  ContourTooWide,
  QuadratureDiverged,
  ShapeMismatch,
  PoleCollision,
  WeightOnPole,
  DegenerateWeight,
  RecursionTooShallow,
  NotInDomainSpan,
  NoConvergence,
  DegeneratePairing,
  GridTooCoarse,
  SpectrumHit,
  ContourNotAbsorbed,
  PositivityLost,
  LinearSolveFailed,
  InvalidInput,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularFamily: return "SingularFamily";
    case ErrorCode::ContourTooWide: return "ContourTooWide";
    case ErrorCode::QuadratureDiverged: return "QuadratureDiverged";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::PoleCollision: return "PoleCollision";
    case ErrorCode::WeightOnPole: return "WeightOnPole";
    case ErrorCode::DegenerateWeight: return "DegenerateWeight";
    case ErrorCode::RecursionTooShallow: return "RecursionTooShallow";
    case ErrorCode::NotInDomainSpan: return "NotInDomainSpan";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegeneratePairing: return "DegeneratePairing";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::SpectrumHit: return "SpectrumHit";
    case ErrorCode::ContourNotAbsorbed: return "ContourNotAbsorbed";
    case ErrorCode::PositivityLost: return "PositivityLost";
    case ErrorCode::LinearSolveFailed: return "LinearSolveFailed";
    case ErrorCode::InvalidInput: return "InvalidInput";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Validation failures (bad input) versus numerical failures.
  bool is_validation() const noexcept {
    return code_ == ErrorCode::ShapeMismatch || code_ == ErrorCode::InvalidInput ||
           code_ == ErrorCode::WeightOnPole || code_ == ErrorCode::DegenerateWeight ||
           code_ == ErrorCode::NotInDomainSpan || code_ == ErrorCode::RecursionTooShallow;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace conecalc
