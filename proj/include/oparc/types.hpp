#pragma once

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace oparc {

using Real = double;
using Complex = std::complex<double>;

using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

enum class ErrorCode {
  kDomain,
  kDegenerateBeam,
  kMatrixDomain,
  kUpdateSingular,
  kDefiniteness,
  kRankDeficient,
  kBijectionSingular,
  kConsistency,
  kInfeasibleLevel,
  kDegenerateGeometry,
  kDegreesOfFreedom,
  kProjectionInfeasible,
  kDimension,
  kConfig,
  kIo,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kDegenerateBeam: return "degenerate-beam";
    case ErrorCode::kMatrixDomain: return "matrix-domain";
    case ErrorCode::kUpdateSingular: return "update-singular";
    case ErrorCode::kDefiniteness: return "definiteness";
    case ErrorCode::kRankDeficient: return "rank-deficient";
    case ErrorCode::kBijectionSingular: return "bijection-singularity";
    case ErrorCode::kConsistency: return "consistency";
    case ErrorCode::kInfeasibleLevel: return "infeasible-level";
    case ErrorCode::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::kDegreesOfFreedom: return "degrees-of-freedom";
    case ErrorCode::kProjectionInfeasible: return "projection-infeasible";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline constexpr Real kPi = std::numbers::pi;

inline Real deg2rad(Real deg) { return deg * kPi / 180.0; }
inline Real rad2deg(Real rad) { return rad * 180.0 / kPi; }

inline Real to_db(Real linear) { return 10.0 * std::log10(linear); }
inline Real from_db(Real db) { return std::pow(10.0, db / 10.0); }

}  // namespace oparc
