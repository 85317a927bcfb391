#pragma once

#include "oparc/synthesis.hpp"

#include <cstdint>
#include <vector>

namespace oparc {

/// Offline stage of quiescent pattern control: the synthesized weight and
/// the VCM that produced it, bound to the geometry by fingerprint.
struct QuiescentDesign {
  Real theta0_deg = 0.0;
  Vcm t_q = Vcm::identity(2);
  CVector w_q;
  std::vector<PatternSample> pattern;
  std::uint64_t geometry_fingerprint = 0;
};

inline QuiescentDesign design_quiescent(const ArrayGeometry& geom, const DesiredPattern& desired,
                                        const SynthesisConfig& cfg = {}) {
  auto res = synthesize(geom, desired, cfg);
  return {desired.theta0_deg, std::move(res.vcm), std::move(res.weight), std::move(res.final_pattern),
          geom.fingerprint()};
}

/// Rebuilds a design from its persisted ledger (replayed on T = I).
inline QuiescentDesign design_from_ledger(const ArrayGeometry& geom, Real theta0_deg,
                                          const std::vector<LedgerEntry>& ledger, std::uint64_t fingerprint) {
  if (fingerprint != geom.fingerprint()) {
    throw Error(ErrorCode::kConfig, "design was made for a different array geometry");
  }
  Vcm t_q = Vcm::replay(geom, ledger, Vcm::identity(geom.size()));
  CVector w_q = optimal_weight(t_q, steering_vector(geom, theta0_deg));
  return {theta0_deg, std::move(t_q), std::move(w_q), {}, fingerprint};
}

inline void check_design_geometry(const QuiescentDesign& design, const ArrayGeometry& geom) {
  if (design.geometry_fingerprint != geom.fingerprint()) {
    throw Error(ErrorCode::kConfig, "design was made for a different array geometry");
  }
  if (design.t_q.size() != geom.size()) throw Error(ErrorCode::kDimension, "design size mismatch");
}

/// T_q - I + R/sigma_n^2, the quiescent VCM after normalized covariance loading.
inline CMatrix composite_vcm(const QuiescentDesign& design, const CMatrix& r_hat, Real sigma_n2_hat) {
  if (!(sigma_n2_hat > 0.0)) throw Error(ErrorCode::kDomain, "noise power estimate must be positive");
  if (design.t_q.has_nulls()) throw Error(ErrorCode::kDomain, "quiescent designs with exact nulls cannot be loaded");
  const int n = design.t_q.size();
  if (r_hat.rows() != n || r_hat.cols() != n) throw Error(ErrorCode::kDimension, "covariance size mismatch");
  return design.t_q.matrix() - CMatrix::Identity(n, n) + r_hat / sigma_n2_hat;
}

/// w_a = (T_q - I + T_{n+i})^-1 a(theta0). A non-PD composite is an error.
inline CVector adapt(const QuiescentDesign& design, const CMatrix& r_hat, Real sigma_n2_hat, const CVector& a0) {
  const CMatrix t = composite_vcm(design, r_hat, sigma_n2_hat);
  Eigen::LLT<CMatrix> llt(0.5 * (t + t.adjoint()));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kDefiniteness, "T_q - I + T_{n+i} is not positive definite");
  }
  return llt.solve(a0);
}

/// Adaptive weight with additional fixed level constraints applied by a
/// multi-point step starting from the loaded VCM.
inline CVector adapt_with_constraints(const QuiescentDesign& design, const CMatrix& r_hat, Real sigma_n2_hat,
                                      const ArrayGeometry& geom, const std::vector<ControlTask>& extra,
                                      const SolverConfig& solver = {}) {
  check_design_geometry(design, geom);
  const CVector a0 = steering_vector(geom, design.theta0_deg);
  if (extra.empty()) return adapt(design, r_hat, sigma_n2_hat, a0);
  const CMatrix t = composite_vcm(design, r_hat, sigma_n2_hat);
  Vcm start = [&] {
    try {
      return Vcm::from_matrix(t);
    } catch (const Error&) {
      throw Error(ErrorCode::kDefiniteness, "T_q - I + T_{n+i} is not positive definite");
    }
  }();
  return solve_step(start, geom, design.theta0_deg, extra, solver).weight;
}

}  // namespace oparc
