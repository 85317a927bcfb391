#pragma once

#include "oparc/vcm.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace oparc {

/// Set the response at `theta_deg` to `rho` (linear power ratio against the
/// beam axis). rho == 0 requests an exact null.
struct ControlTask {
  Real theta_deg;
  Real rho;

  static ControlTask from_db(Real theta_deg, Real level_db) { return {theta_deg, oparc::from_db(level_db)}; }
};

inline void validate_task(const ControlTask& task, Real theta0_deg) {
  check_angle(task.theta_deg);
  if (!(task.rho >= 0.0) || !std::isfinite(task.rho)) {
    throw Error(ErrorCode::kDomain, "desired level must be finite and nonnegative");
  }
  if (task.theta_deg == theta0_deg) throw Error(ErrorCode::kDomain, "cannot control the beam axis itself");
}

/// Scalars of the rank-one problem at one controlled direction.
struct SinglePointTerms {
  Real q;   // a_c^H T^-1 a_c
  Complex t;  // a_c^H T^-1 a0
  Real g0;  // a0^H T^-1 a0, the current gain
};

inline SinglePointTerms single_point_terms(const Vcm& vcm, const CVector& a0, const CVector& ac) {
  const CVector p_ac = vcm.inverse() * ac;
  return {ac.dot(p_ac).real(), p_ac.dot(a0), a0.dot(vcm.inverse() * a0).real()};
}

/// INR beta for a single virtual interference at a_c that puts the response
/// there at exactly rho while keeping the array gain maximal.
///
/// With s = beta / (1 + beta q) the rank-one update moves the weight to
/// w - s t T^-1 a_c, so w^H a_c = conj(t)(1 - s q) and w^H a0 = g0 - s|t|^2.
/// The level condition |t|^2 (1 - s q)^2 = rho (g0 - s|t|^2)^2 is a real
/// quadratic in s whose two roots come from the two signs of the square
/// root. Only roots with 1 - s q > 0 keep T positive definite; the gain
/// g0 - s|t|^2 falls with s, so the smallest admissible s wins.
inline Real solve_single_beta(const Vcm& vcm, const CVector& a0, const CVector& ac, Real rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw Error(ErrorCode::kDomain, "desired level must be >= 0");
  const auto [q, t, g0] = single_point_terms(vcm, a0, ac);
  if (!(g0 > 0.0)) throw Error(ErrorCode::kDegenerateBeam, "zero gain on the beam axis");
  const Real abs_t = std::abs(t);
  const Real scale = std::sqrt(std::max(q, 0.0) * g0);

  const Real q_floor = 1e-14 * vcm.inverse().norm() * ac.squaredNorm();
  if (rho == 0.0) {
    if (q <= q_floor || abs_t <= 1e-14 * std::max(scale, std::sqrt(q_floor * g0))) return 0.0;
    return std::numeric_limits<Real>::infinity();
  }
  if (!(q > q_floor)) {
    throw Error(ErrorCode::kDegenerateGeometry, "controlled direction is nulled; level pinned at zero");
  }
  if (abs_t <= 1e-12 * scale) {
    throw Error(ErrorCode::kDegenerateGeometry, "controlled direction decoupled from the beam; level pinned at zero");
  }
  if (q * g0 - abs_t * abs_t <= 1e-12 * q * g0) {
    throw Error(ErrorCode::kDegenerateGeometry, "controlled direction indistinguishable from the beam axis");
  }

  const Real sqrt_rho = std::sqrt(rho);
  if (std::abs(sqrt_rho * g0 - abs_t) <= 1e-13 * std::max(sqrt_rho * g0, abs_t)) return 0.0;

  struct Candidate {
    Real s;
    Real beta;
  };
  std::optional<Candidate> best;
  const Real nums[2] = {sqrt_rho * g0 - abs_t, sqrt_rho * g0 + abs_t};
  const Real dens[2] = {abs_t * (sqrt_rho * abs_t - q), abs_t * (sqrt_rho * abs_t + q)};
  for (int i = 0; i < 2; ++i) {
    if (std::abs(dens[i]) <= 1e-300) continue;
    const Real s = nums[i] / dens[i];
    const Real one_minus = 1.0 - s * q;
    if (!(one_minus > 0.0) || !(g0 - s * abs_t * abs_t > 0.0)) continue;
    const Candidate c{s, s / one_minus};
    if (!std::isfinite(c.beta)) continue;
    if (!best || c.s < best->s || (c.s == best->s && std::abs(c.beta) < std::abs(best->beta))) best = c;
  }
  if (!best) {
    throw Error(ErrorCode::kInfeasibleLevel, "level " + std::to_string(to_db(rho)) +
                                                 " dB unreachable; supremum is " +
                                                 std::to_string(to_db(q * q / (abs_t * abs_t))) + " dB");
  }
  return best->beta;
}

struct SingleControlResult {
  Real beta;
  Vcm vcm;
  CVector weight;
  Complex gamma;
};

/// One OPARC step: assign the INR from solve_single_beta and return the
/// updated VCM together with gamma, the coefficient in w' = w + gamma T^-1 a_c.
inline SingleControlResult control_single(const Vcm& vcm, const ArrayGeometry& geom, Real theta0_deg,
                                          const ControlTask& task) {
  validate_task(task, theta0_deg);
  const CVector a0 = steering_vector(geom, theta0_deg);
  const CVector ac = steering_vector(geom, task.theta_deg);
  const Real beta = solve_single_beta(vcm, a0, ac, task.rho);
  if (beta == 0.0) return {0.0, vcm, optimal_weight(vcm, a0), Complex(0.0, 0.0)};

  const auto [q, t, g0] = single_point_terms(vcm, a0, ac);
  const Complex gamma = std::isfinite(beta) ? -beta * t / (1.0 + beta * q) : -t / q;
  RVector inr(1);
  inr(0) = beta;
  Vcm next = vcm.updated(BlockAssignment{{task.theta_deg}, ac, inr});
  CVector w = optimal_weight(next, a0);
  return {beta, std::move(next), std::move(w), gamma};
}

}  // namespace oparc
