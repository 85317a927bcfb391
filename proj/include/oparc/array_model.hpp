#pragma once

#include "oparc/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace oparc {

inline constexpr Real kSpeedOfLight = 2.99792458e8;
inline constexpr Real kDefaultOmega = 6.0 * std::numbers::pi * 1e8;

// Element gain models g(theta). All return a dimensionless amplitude.

struct IsotropicPattern {};

/// g(theta) = max(cos(theta), 0)^power
struct CosinePowerPattern {
  Real power = 1.0;
};

/// Gain tabulated over ascending angles (degrees), linearly interpolated and
/// held constant beyond the table ends.
struct TabulatedPattern {
  std::vector<Real> angles_deg;
  std::vector<Real> gains;
};

using ElementPattern = std::variant<IsotropicPattern, CosinePowerPattern, TabulatedPattern>;

inline Real evaluate_pattern(const ElementPattern& pattern, Real theta_rad) {
  struct Visitor {
    Real theta;
    Real operator()(const IsotropicPattern&) const { return 1.0; }
    Real operator()(const CosinePowerPattern& p) const {
      return std::pow(std::max(std::cos(theta), 0.0), p.power);
    }
    Real operator()(const TabulatedPattern& p) const {
      const Real deg = rad2deg(theta);
      const auto& xs = p.angles_deg;
      if (deg <= xs.front()) return p.gains.front();
      if (deg >= xs.back()) return p.gains.back();
      const auto hi = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), deg) - xs.begin());
      const std::size_t lo = hi - 1;
      const Real frac = (deg - xs[lo]) / (xs[hi] - xs[lo]);
      return p.gains[lo] + frac * (p.gains[hi] - p.gains[lo]);
    }
  };
  return std::visit(Visitor{theta_rad}, pattern);
}

inline void validate_pattern(const ElementPattern& pattern) {
  if (const auto* tab = std::get_if<TabulatedPattern>(&pattern)) {
    if (tab->angles_deg.size() < 2 || tab->angles_deg.size() != tab->gains.size()) {
      throw Error(ErrorCode::kDomain, "tabulated pattern needs >= 2 (angle, gain) pairs");
    }
    for (std::size_t i = 0; i < tab->gains.size(); ++i) {
      if (!std::isfinite(tab->gains[i]) || tab->gains[i] < 0.0 || !std::isfinite(tab->angles_deg[i])) {
        throw Error(ErrorCode::kDomain, "tabulated gains must be finite and nonnegative");
      }
      if (i > 0 && !(tab->angles_deg[i] > tab->angles_deg[i - 1])) {
        throw Error(ErrorCode::kDomain, "tabulated angles must be strictly ascending");
      }
    }
  }
  if (const auto* cp = std::get_if<CosinePowerPattern>(&pattern)) {
    if (!std::isfinite(cp->power) || cp->power < 0.0) {
      throw Error(ErrorCode::kDomain, "cosine pattern power must be finite and >= 0");
    }
  }
}

/// Array of N elements at arbitrary 3-D positions (meters). Element n uses
/// patterns[n], or patterns[0] for every element when only one is given.
/// Directions are measured from broadside in the x-z plane: the unit
/// direction for angle theta is (sin theta, 0, 0) projected on x.
class ArrayGeometry {
 public:
  ArrayGeometry(std::vector<Eigen::Vector3d> positions, std::vector<ElementPattern> patterns,
                Real omega = kDefaultOmega, Real wave_speed = kSpeedOfLight)
      : positions_(std::move(positions)),
        patterns_(std::move(patterns)),
        omega_(omega),
        wave_speed_(wave_speed) {
    if (positions_.size() < 2) throw Error(ErrorCode::kDomain, "array needs at least 2 elements");
    for (const auto& p : positions_) {
      if (!p.allFinite()) throw Error(ErrorCode::kDomain, "element positions must be finite");
    }
    if (patterns_.empty()) patterns_.emplace_back(IsotropicPattern{});
    if (patterns_.size() != 1 && patterns_.size() != positions_.size()) {
      throw Error(ErrorCode::kDomain, "need one element pattern or one per element");
    }
    for (const auto& pat : patterns_) validate_pattern(pat);
    if (!(omega_ > 0.0) || !(wave_speed_ > 0.0)) {
      throw Error(ErrorCode::kDomain, "omega and wave speed must be positive");
    }
  }

  /// Uniform linear array along x with the given spacing in wavelengths.
  static ArrayGeometry ula(int n, Real spacing_wavelengths, ElementPattern pattern = IsotropicPattern{},
                           Real omega = kDefaultOmega, Real wave_speed = kSpeedOfLight) {
    const Real lambda = 2.0 * kPi * wave_speed / omega;
    std::vector<Eigen::Vector3d> pos;
    pos.reserve(static_cast<std::size_t>(std::max(n, 0)));
    for (int i = 0; i < n; ++i) pos.emplace_back(i * spacing_wavelengths * lambda, 0.0, 0.0);
    return ArrayGeometry(std::move(pos), {std::move(pattern)}, omega, wave_speed);
  }

  int size() const { return static_cast<int>(positions_.size()); }
  Real omega() const { return omega_; }
  Real wave_speed() const { return wave_speed_; }
  Real wavelength() const { return 2.0 * kPi * wave_speed_ / omega_; }
  const std::vector<Eigen::Vector3d>& positions() const { return positions_; }
  const std::vector<ElementPattern>& patterns() const { return patterns_; }

  const ElementPattern& pattern_of(int n) const {
    return patterns_.size() == 1 ? patterns_.front() : patterns_[static_cast<std::size_t>(n)];
  }

  /// Stable 64-bit FNV-1a digest over a canonical text rendering of the
  /// geometry. Used to bind persisted designs to the array they came from.
  std::uint64_t fingerprint() const {
    std::string text;
    char buf[64];
    auto put = [&](Real v) {
      std::snprintf(buf, sizeof buf, "%.17g;", v);
      text += buf;
    };
    put(omega_);
    put(wave_speed_);
    for (const auto& p : positions_) {
      put(p.x());
      put(p.y());
      put(p.z());
    }
    for (const auto& pat : patterns_) {
      text += std::to_string(pat.index()) + ":";
      if (const auto* cp = std::get_if<CosinePowerPattern>(&pat)) put(cp->power);
      if (const auto* tab = std::get_if<TabulatedPattern>(&pat)) {
        for (std::size_t i = 0; i < tab->gains.size(); ++i) {
          put(tab->angles_deg[i]);
          put(tab->gains[i]);
        }
      }
    }
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  std::vector<Eigen::Vector3d> positions_;
  std::vector<ElementPattern> patterns_;
  Real omega_;
  Real wave_speed_;
};

inline void check_angle(Real theta_deg) {
  if (!(theta_deg >= -90.0 && theta_deg <= 90.0)) {
    throw Error(ErrorCode::kDomain, "angle " + std::to_string(theta_deg) + " deg outside [-90, 90]");
  }
}

/// a(theta)_n = g_n(theta) exp(-j omega tau_n(theta)), tau_n = x_n sin(theta) / c.
inline CVector steering_vector(const ArrayGeometry& geom, Real theta_deg) {
  check_angle(theta_deg);
  const Real theta = deg2rad(theta_deg);
  const Real s = std::sin(theta);
  const Real k = geom.omega() / geom.wave_speed();
  CVector a(geom.size());
  for (int n = 0; n < geom.size(); ++n) {
    const Real phase = k * geom.positions()[static_cast<std::size_t>(n)].x() * s;
    a(n) = evaluate_pattern(geom.pattern_of(n), theta) * std::polar(1.0, -phase);
  }
  return a;
}

inline CMatrix steering_matrix(const ArrayGeometry& geom, std::span<const Real> thetas_deg) {
  CMatrix a(geom.size(), static_cast<Eigen::Index>(thetas_deg.size()));
  for (std::size_t m = 0; m < thetas_deg.size(); ++m) {
    a.col(static_cast<Eigen::Index>(m)) = steering_vector(geom, thetas_deg[m]);
  }
  return a;
}

/// |w^H a|^2 / |w^H a0|^2 for precomputed steering vectors.
inline Real response_ratio(const CVector& w, const CVector& a, const CVector& a0) {
  const Real den = std::norm(w.dot(a0));
  const Real num = std::norm(w.dot(a));
  if (!(den > 0.0) || den <= 1e-300) throw Error(ErrorCode::kDegenerateBeam, "zero response on the beam axis");
  return num / den;
}

inline Real response_level(const CVector& w, Real theta_deg, Real theta0_deg, const ArrayGeometry& geom) {
  return response_ratio(w, steering_vector(geom, theta_deg), steering_vector(geom, theta0_deg));
}

inline void require_positive_definite(const CMatrix& m, const char* what) {
  Eigen::LLT<CMatrix> llt(0.5 * (m + m.adjoint()));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kMatrixDomain, std::string(what) + " is not Hermitian positive definite");
  }
}

/// |w^H a0|^2 / (w^H T w)
inline Real array_gain(const CVector& w, const CMatrix& t, const CVector& a0) {
  require_positive_definite(t, "T");
  const Real den = (w.adjoint() * t * w)(0).real();
  return std::norm(w.dot(a0)) / den;
}

/// sigma_s^2 |w^H a0|^2 / (w^H R w)
inline Real output_sinr(const CVector& w, const CMatrix& r, Real sigma_s2, const CVector& a0) {
  if (!(sigma_s2 > 0.0)) throw Error(ErrorCode::kDomain, "signal power must be positive");
  require_positive_definite(r, "R");
  const Real den = (w.adjoint() * r * w)(0).real();
  return sigma_s2 * std::norm(w.dot(a0)) / den;
}

struct AngleGrid {
  Real start_deg = -90.0;
  Real stop_deg = 90.0;
  Real step_deg = 0.1;

  std::vector<Real> points() const {
    if (!(step_deg > 0.0)) throw Error(ErrorCode::kDomain, "grid step must be positive");
    if (stop_deg < start_deg) throw Error(ErrorCode::kDomain, "grid start must not exceed stop");
    const auto count = static_cast<std::size_t>(std::llround((stop_deg - start_deg) / step_deg)) + 1;
    std::vector<Real> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = start_deg + static_cast<Real>(i) * step_deg;
    out.back() = std::min(out.back(), stop_deg);
    if (count > 1 && std::abs(out.back() - stop_deg) <= 0.5 * step_deg) out.back() = stop_deg;
    return out;
  }
};

struct PatternSample {
  Real theta_deg;
  Real level_db;
};

inline std::vector<PatternSample> pattern_over_grid(const CVector& w, Real theta0_deg, const AngleGrid& grid,
                                                    const ArrayGeometry& geom) {
  const CVector a0 = steering_vector(geom, theta0_deg);
  const Real den = std::norm(w.dot(a0));
  if (!(den > 1e-300)) throw Error(ErrorCode::kDegenerateBeam, "zero response on the beam axis");
  std::vector<PatternSample> out;
  for (Real theta : grid.points()) {
    out.push_back({theta, to_db(std::norm(w.dot(steering_vector(geom, theta))) / den)});
  }
  return out;
}

}  // namespace oparc
