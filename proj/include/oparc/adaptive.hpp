#pragma once

#include "oparc/multipoint.hpp"

#include <vector>

namespace oparc {

/// Directional constraints C^H w = g with C = [a(theta_0), ..., a(theta_{D-1})]
/// and (g)_1 = 1. QCMV keeps only the amplitudes |(g)_d|.
struct ConstraintSpec {
  std::vector<Real> angles_deg;
  CVector g;

  /// Beam axis plus side constraints given as linear power levels.
  static ConstraintSpec from_levels(Real theta0_deg, const std::vector<ControlTask>& side) {
    ConstraintSpec spec;
    spec.angles_deg.push_back(theta0_deg);
    spec.g = CVector(static_cast<Eigen::Index>(side.size() + 1));
    spec.g(0) = 1.0;
    for (std::size_t i = 0; i < side.size(); ++i) {
      spec.angles_deg.push_back(side[i].theta_deg);
      spec.g(static_cast<Eigen::Index>(i + 1)) = std::sqrt(side[i].rho);
    }
    return spec;
  }

  void validate() const {
    if (angles_deg.empty() || g.size() != static_cast<Eigen::Index>(angles_deg.size())) {
      throw Error(ErrorCode::kDimension, "constraint angles and g must have equal length >= 1");
    }
    if (g(0) != Complex(1.0, 0.0)) throw Error(ErrorCode::kDomain, "(g)_1 must be 1");
    for (std::size_t i = 0; i < angles_deg.size(); ++i) {
      check_angle(angles_deg[i]);
      for (std::size_t j = 0; j < i; ++j) {
        if (angles_deg[i] == angles_deg[j]) throw Error(ErrorCode::kDomain, "constraint angles must be distinct");
      }
    }
  }

  Real theta0() const { return angles_deg.front(); }
  int size() const { return static_cast<int>(angles_deg.size()); }

  std::vector<ControlTask> side_tasks() const {
    std::vector<ControlTask> out;
    for (std::size_t d = 1; d < angles_deg.size(); ++d) {
      out.push_back({angles_deg[d], std::norm(g(static_cast<Eigen::Index>(d)))});
    }
    return out;
  }
};

/// (1/T) sum x x^H over the columns of `snapshots` (N x T).
inline CMatrix sample_covariance(const CMatrix& snapshots) {
  if (snapshots.cols() < 1) throw Error(ErrorCode::kDomain, "need at least one snapshot");
  CMatrix r = snapshots * snapshots.adjoint() / static_cast<Real>(snapshots.cols());
  return 0.5 * (r + r.adjoint());
}

/// Mean of the N - J_r smallest eigenvalues of R.
inline Real estimate_noise_power(const CMatrix& r, int interference_count) {
  const auto n = static_cast<int>(r.rows());
  if (interference_count < 0 || interference_count >= n) {
    throw Error(ErrorCode::kDomain, "interference count must lie in [0, N)");
  }
  const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly).eigenvalues();
  return ev.head(n - interference_count).mean();
}

/// R^-1 C (C^H R^-1 C)^-1 g
inline CVector lcmv(const CMatrix& r, const ConstraintSpec& spec, const ArrayGeometry& geom) {
  spec.validate();
  const CMatrix c = steering_matrix(geom, spec.angles_deg);
  try {
    require_full_column_rank(c);
  } catch (const Error&) {
    throw Error(ErrorCode::kRankDeficient, "constraint matrix is rank deficient");
  }
  Eigen::LLT<CMatrix> llt(0.5 * (r + r.adjoint()));
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kMatrixDomain, "R is not positive definite");
  const CMatrix rc = llt.solve(c);
  const CMatrix gram = c.adjoint() * rc;
  return rc * Eigen::FullPivLU<CMatrix>(gram).solve(spec.g);
}

struct QcmvResult {
  CVector weight;   // scaled so that w^H a(theta0) = 1
  CMatrix delta;    // finite part of the normalized covariance loading
  RVector inrs;     // per side constraint; +inf marks an exact null
  Vcm vcm;          // T_QC
  Real regularization = 0.0;
  int solver_iterations = 0;
  bool solver_converged = true;
  std::string warning;
};

struct QcmvOptions {
  SolverConfig solver;
  Real regularization = 1e-8;  // times trace(R)/N, added before inversion
};

/// Amplitude-constrained minimum variance beamformer. Starts from the
/// normalized covariance R/sigma_n^2 as VCM and sets every side constraint
/// to |(g)_d|^2 with one multi-point step; the assigned INRs form the
/// normalized covariance loading Delta.
inline QcmvResult qcmv(const CMatrix& r_hat, Real sigma_n2_hat, const ConstraintSpec& spec, const ArrayGeometry& geom,
                       const QcmvOptions& opts = {}) {
  spec.validate();
  if (!(sigma_n2_hat > 0.0)) throw Error(ErrorCode::kDomain, "noise power estimate must be positive");
  const int n = geom.size();
  if (r_hat.rows() != n || r_hat.cols() != n) throw Error(ErrorCode::kDimension, "covariance size mismatch");
  if (spec.size() - 1 >= n) throw Error(ErrorCode::kDegreesOfFreedom, "too many side constraints");

  const Real reg = opts.regularization * r_hat.trace().real() / n;
  const CMatrix t = (r_hat + reg * CMatrix::Identity(n, n)) / sigma_n2_hat;
  const Vcm t0 = Vcm::from_matrix(t);
  const CVector a0 = steering_vector(geom, spec.theta0());

  QcmvResult res{optimal_weight(t0, a0), CMatrix::Zero(n, n), RVector(), t0, reg, 0, true, {}};
  const auto tasks = spec.side_tasks();
  if (!tasks.empty()) {
    auto step = solve_step(t0, geom, spec.theta0(), tasks, opts.solver);
    res.inrs = step.sigma;
    res.vcm = std::move(step.vcm);
    res.weight = std::move(step.weight);
    res.solver_iterations = step.iterations;
    res.solver_converged = step.converged;
    res.warning = std::move(step.warning);
    res.delta = res.vcm.loading(geom);
  }
  const Complex axis = res.weight.dot(a0);
  res.weight /= std::conj(axis);
  return res;
}

}  // namespace oparc
