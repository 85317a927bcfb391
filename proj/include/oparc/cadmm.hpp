#pragma once

#include "oparc/iterative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace oparc {

/// Real-lifted multi-point problem in z = [Re h; Im h]:
///   min z^T C z - 2 c^T z   s.t.  z^T D_m z - 2 d_m^T z = alpha_m.
/// `offset` is |a0^H w_prev|^2, so that -z^T C z + 2 c^T z + offset is the
/// squared beam-axis response of w_prev + T^-1 A h.
struct RealQcqp {
  RMatrix c_mat;
  RVector c_vec;
  std::vector<RMatrix> d_mat;
  std::vector<RVector> d_vec;
  std::vector<Real> alpha;
  Real offset = 0.0;

  int unknowns() const { return static_cast<int>(c_vec.size()) / 2; }
  int constraints() const { return static_cast<int>(alpha.size()); }

  Real objective(const RVector& z) const { return z.dot(c_mat * z) - 2.0 * c_vec.dot(z); }

  Real residual(int m, const RVector& z) const {
    const auto i = static_cast<std::size_t>(m);
    return z.dot(d_mat[i] * z) - 2.0 * d_vec[i].dot(z) - alpha[i];
  }
};

/// [[Re H, -Im H], [Im H, Re H]]
inline RMatrix lift_matrix(const CMatrix& h) {
  const Eigen::Index m = h.rows();
  RMatrix out(2 * m, 2 * m);
  out.topLeftCorner(m, m) = h.real();
  out.topRightCorner(m, m) = -h.imag();
  out.bottomLeftCorner(m, m) = h.imag();
  out.bottomRightCorner(m, m) = h.real();
  return out;
}

inline RVector lift_vector(const CVector& v) {
  RVector out(2 * v.size());
  out << v.real(), v.imag();
  return out;
}

inline CVector unlift_vector(const RVector& z) {
  const Eigen::Index m = z.size() / 2;
  CVector h(m);
  for (Eigen::Index i = 0; i < m; ++i) h(i) = Complex(z(i), z(m + i));
  return h;
}

/// Assembles the quadratic objective and one quadratic constraint per task
/// from S_m = a_m a_m^H - rho_m a0 a0^H, with B = T^-1 A.
inline RealQcqp build_real_qcqp(const Vcm& vcm_prev, const CVector& a0, const CVector& w_prev, const CMatrix& a,
                                std::span<const Real> rhos) {
  const Eigen::Index m = a.cols();
  if (a.rows() != vcm_prev.size() || a0.size() != a.rows() || w_prev.size() != a.rows() ||
      static_cast<Eigen::Index>(rhos.size()) != m) {
    throw Error(ErrorCode::kDimension, "build_real_qcqp shapes disagree");
  }
  const CMatrix b = vcm_prev.inverse() * a;
  const CVector ba0 = b.adjoint() * a0;
  const Complex a0w = a0.dot(w_prev);

  RealQcqp qp;
  qp.c_mat = lift_matrix(-ba0 * ba0.adjoint());
  qp.c_vec = lift_vector(ba0 * a0w);
  qp.offset = std::norm(a0w);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Real rho = rhos[static_cast<std::size_t>(i)];
    const CVector bam = b.adjoint() * a.col(i);
    const Complex amw = a.col(i).dot(w_prev);
    const CMatrix d = bam * bam.adjoint() - rho * ba0 * ba0.adjoint();
    const CVector dv = -(bam * amw - rho * ba0 * a0w);
    RMatrix lifted = lift_matrix(d);
    lifted = 0.5 * (lifted + lifted.transpose()).eval();
    qp.d_mat.push_back(std::move(lifted));
    qp.d_vec.push_back(lift_vector(dv));
    qp.alpha.push_back(-(std::norm(amw) - rho * std::norm(a0w)));
  }
  RMatrix cs = 0.5 * (qp.c_mat + qp.c_mat.transpose());
  qp.c_mat = cs;
  return qp;
}

/// Euclidean projection onto { p : p^T D p - 2 d^T p = alpha } with the
/// eigendecomposition of D computed once.
///
/// Stationarity gives p(mu) = (I + mu D)^-1 (zeta + mu d). In the interval
/// where I + mu D is positive definite the secular function is strictly
/// decreasing, and a root there is the global minimizer; other intervals
/// between the poles -1/lambda_i and the degenerate endpoint solutions are
/// searched only when that interval has no root.
class QuadricProjector {
 public:
  QuadricProjector(const RMatrix& d, const RVector& dv, Real alpha) : dv_(dv), alpha_(alpha) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (d + d.transpose()));
    basis_ = es.eigenvectors();
    lambda_ = es.eigenvalues();
    const Real scale = lambda_.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
      if (std::abs(lambda_(i)) <= 1e-13 * scale) lambda_(i) = 0.0;
    }
    dhat_ = basis_.transpose() * dv_;
    d_ = 0.5 * (d + d.transpose());
  }

  Real residual(const RVector& p) const { return p.dot(d_ * p) - 2.0 * dv_.dot(p) - alpha_; }

  Real tolerance() const { return 1e-9 * (1.0 + std::abs(alpha_)); }

  RVector project(const RVector& zeta) const {
    const RVector zhat = basis_.transpose() * zeta;
    if (std::abs(residual(zeta)) <= 1e-15 * (1.0 + std::abs(alpha_))) return zeta;

    std::optional<RVector> best;
    Real best_dist = std::numeric_limits<Real>::infinity();
    auto consider = [&](const RVector& phat) {
      if (!phat.allFinite()) return;
      RVector p = basis_ * phat;
      if (std::abs(residual(p)) > tolerance()) return;
      const Real dist = (p - zeta).norm();
      if (dist < best_dist) {
        best_dist = dist;
        best = std::move(p);
      }
    };

    Real lo = -std::numeric_limits<Real>::infinity();
    Real hi = std::numeric_limits<Real>::infinity();
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
      if (lambda_(i) > 0.0) lo = std::max(lo, -1.0 / lambda_(i));
      if (lambda_(i) < 0.0) hi = std::min(hi, -1.0 / lambda_(i));
    }
    if (auto mu = root_in(zhat, lo, hi)) consider(point(zhat, *mu));
    if (best) return *best;

    for (Real pole : {lo, hi}) {
      if (std::isfinite(pole)) for (const auto& c : endpoint_candidates(zhat, pole)) consider(c);
    }
    if (best) return *best;

    std::vector<Real> poles;
    for (Eigen::Index i = 0; i < lambda_.size(); ++i) {
      if (lambda_(i) != 0.0) poles.push_back(-1.0 / lambda_(i));
    }
    std::sort(poles.begin(), poles.end());
    poles.erase(std::unique(poles.begin(), poles.end()), poles.end());
    std::vector<std::pair<Real, Real>> intervals;
    Real left = -std::numeric_limits<Real>::infinity();
    for (Real p : poles) {
      intervals.emplace_back(left, p);
      left = p;
    }
    intervals.emplace_back(left, std::numeric_limits<Real>::infinity());
    for (const auto& [a, b] : intervals) {
      if (a == lo && b == hi) continue;
      for (Real mu : roots_by_scan(zhat, a, b)) consider(point(zhat, mu));
    }
    for (Real pole : poles) {
      for (const auto& c : endpoint_candidates(zhat, pole)) consider(c);
    }
    if (!best) throw Error(ErrorCode::kProjectionInfeasible, "quadric constraint set has no reachable point");
    return *best;
  }

 private:
  RVector point(const RVector& zhat, Real mu) const {
    RVector phat(zhat.size());
    for (Eigen::Index i = 0; i < zhat.size(); ++i) phat(i) = (zhat(i) + mu * dhat_(i)) / (1.0 + mu * lambda_(i));
    return phat;
  }

  Real secular(const RVector& zhat, Real mu) const {
    Real acc = -alpha_;
    for (Eigen::Index i = 0; i < zhat.size(); ++i) {
      const Real p = (zhat(i) + mu * dhat_(i)) / (1.0 + mu * lambda_(i));
      acc += lambda_(i) * p * p - 2.0 * dhat_(i) * p;
    }
    return acc;
  }

  Real secular_slope(const RVector& zhat, Real mu) const {
    Real acc = 0.0;
    for (Eigen::Index i = 0; i < zhat.size(); ++i) {
      const Real num = lambda_(i) * zhat(i) - dhat_(i);
      const Real den = 1.0 + mu * lambda_(i);
      acc -= 2.0 * num * num / (den * den * den);
    }
    return acc;
  }

  // Bisection to a bracket width near round-off, then a few guarded Newton steps.
  Real refine(const RVector& zhat, Real a, Real b, Real fa) const {
    for (int it = 0; it < 200; ++it) {
      const Real mid = 0.5 * (a + b);
      if (mid == a || mid == b || (b - a) <= 1e-15 * std::max(1.0, std::abs(mid))) break;
      const Real fm = secular(zhat, mid);
      if (fm == 0.0) return mid;
      if ((fm > 0.0) == (fa > 0.0)) {
        a = mid;
        fa = fm;
      } else {
        b = mid;
      }
    }
    Real mu = 0.5 * (a + b);
    for (int it = 0; it < 3; ++it) {
      const Real f = secular(zhat, mu);
      const Real slope = secular_slope(zhat, mu);
      if (slope == 0.0 || !std::isfinite(slope)) break;
      const Real next = mu - f / slope;
      if (!(next >= a && next <= b) || std::abs(secular(zhat, next)) >= std::abs(f)) break;
      mu = next;
    }
    return mu;
  }

  // Root of the monotone secular function on the interval where I + mu D > 0.
  std::optional<Real> root_in(const RVector& zhat, Real lo, Real hi) const {
    const Real f0 = secular(zhat, 0.0);
    if (f0 == 0.0) return 0.0;
    // Decreasing: a positive value means the root lies to the right.
    const Real edge = f0 > 0.0 ? hi : lo;
    const Real dir = f0 > 0.0 ? 1.0 : -1.0;
    Real inner = 0.0;
    Real f_inner = f0;
    if (std::isfinite(edge)) {
      Real gap = std::abs(edge);
      for (int k = 1; k <= 60; ++k) {
        gap *= 0.5;
        const Real probe = edge - dir * gap;
        const Real fp = secular(zhat, probe);
        if ((fp > 0.0) != (f0 > 0.0) || fp == 0.0) return refine(zhat, std::min(inner, probe), std::max(inner, probe),
                                                                     inner < probe ? f_inner : fp);
        inner = probe;
        f_inner = fp;
      }
      return std::nullopt;
    }
    Real step = 1.0;
    for (int k = 0; k < 2100; ++k) {
      const Real probe = dir * step;
      const Real fp = secular(zhat, probe);
      if (!std::isfinite(fp)) return std::nullopt;
      if ((fp > 0.0) != (f0 > 0.0) || fp == 0.0) {
        const Real a = std::min(inner, probe);
        const Real b = std::max(inner, probe);
        return refine(zhat, a, b, a == inner ? f_inner : fp);
      }
      inner = probe;
      f_inner = fp;
      step *= 2.0;
      if (step > 1e300) break;
    }
    return std::nullopt;
  }

  std::vector<Real> roots_by_scan(const RVector& zhat, Real a, Real b) const {
    std::vector<Real> samples;
    if (std::isfinite(a) && std::isfinite(b)) {
      const Real w = b - a;
      for (int k = 1; k < 256; ++k) samples.push_back(a + w * 0.5 * (1.0 - std::cos(kPi * k / 256.0)));
      for (int j = 3; j <= 15; ++j) {
        samples.push_back(a + w * std::pow(10.0, -j));
        samples.push_back(b - w * std::pow(10.0, -j));
      }
    } else {
      const Real anchor = std::isfinite(a) ? a : (std::isfinite(b) ? b : 0.0);
      const Real sign = std::isfinite(a) ? 1.0 : -1.0;
      for (Real e = -15.0; e <= 15.0; e += 0.125) {
        samples.push_back(anchor + sign * std::pow(10.0, e));
        if (!std::isfinite(a) && !std::isfinite(b)) samples.push_back(-std::pow(10.0, e));
      }
      if (!std::isfinite(a) && !std::isfinite(b)) samples.push_back(0.0);
    }
    std::sort(samples.begin(), samples.end());
    std::vector<Real> roots;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
      const Real fa = secular(zhat, samples[i]);
      const Real fb = secular(zhat, samples[i + 1]);
      if (!std::isfinite(fa) || !std::isfinite(fb)) continue;
      if (fa == 0.0) roots.push_back(samples[i]);
      else if ((fa > 0.0) != (fb > 0.0)) roots.push_back(refine(zhat, samples[i], samples[i + 1], fa));
    }
    return roots;
  }

  // At mu = -1/lambda_j with a vanishing numerator the eigen-coordinates of
  // lambda_j are free; pick the first one and solve the constraint for it.
  std::vector<RVector> endpoint_candidates(const RVector& zhat, Real pole) const {
    std::vector<RVector> out;
    std::vector<Eigen::Index> free_idx;
    RVector phat = RVector::Zero(zhat.size());
    for (Eigen::Index i = 0; i < zhat.size(); ++i) {
      const Real den = 1.0 + pole * lambda_(i);
      const Real num = zhat(i) + pole * dhat_(i);
      if (std::abs(den) <= 1e-12) {
        if (std::abs(num) > 1e-10 * (1.0 + std::abs(zhat(i)) + std::abs(pole * dhat_(i)))) return out;
        free_idx.push_back(i);
      } else {
        phat(i) = num / den;
      }
    }
    if (free_idx.empty()) return out;
    const Eigen::Index k = free_idx.front();
    Real rest = -alpha_;
    for (Eigen::Index i = 0; i < zhat.size(); ++i) rest += lambda_(i) * phat(i) * phat(i) - 2.0 * dhat_(i) * phat(i);
    // lambda_k t^2 - 2 dhat_k t + rest = 0
    const Real qa = lambda_(k);
    const Real qb = -2.0 * dhat_(k);
    const Real disc = qb * qb - 4.0 * qa * rest;
    if (disc < 0.0 || qa == 0.0) return out;
    for (Real sgn : {-1.0, 1.0}) {
      RVector c = phat;
      c(k) = (-qb + sgn * std::sqrt(disc)) / (2.0 * qa);
      out.push_back(std::move(c));
    }
    return out;
  }

  RMatrix d_;
  RVector dv_;
  Real alpha_;
  RMatrix basis_;
  RVector lambda_;
  RVector dhat_;
};

inline RVector project_qcqp1(const RVector& zeta, const RMatrix& d, const RVector& dv, Real alpha) {
  return QuadricProjector(d, dv, alpha).project(zeta);
}

struct ConsensusState {
  RVector z;
  std::vector<RVector> p;
  std::vector<RVector> lambda;
  Real eta = 900.0;
  int iteration = 0;
  Real delta_max = std::numeric_limits<Real>::infinity();
};

struct CadmmConfig {
  Real eta = 900.0;
  Real delta = 1e-10;
  int max_iter = 5000;
};

/// p_m starts at the lift of gamma_m e_m, where gamma_m is the single-point
/// OPARC coefficient for task m alone; z and the multipliers start at zero.
inline ConsensusState initialize_consensus(const Vcm& vcm_prev, const ArrayGeometry& geom, Real theta0_deg,
                                           const std::vector<ControlTask>& tasks, Real eta) {
  if (!(eta > 0.0)) throw Error(ErrorCode::kDomain, "penalty eta must be positive");
  const auto m = static_cast<Eigen::Index>(tasks.size());
  ConsensusState st;
  st.eta = eta;
  st.z = RVector::Zero(2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto single = control_single(vcm_prev, geom, theta0_deg, tasks[static_cast<std::size_t>(i)]);
    CVector ph = CVector::Zero(m);
    ph(i) = single.gamma;
    st.p.push_back(lift_vector(ph));
    st.lambda.push_back(RVector::Zero(2 * m));
  }
  return st;
}

struct CadmmResult {
  CVector h_star;
  ConsensusState state;
  std::vector<Real> delta_trace;
  bool converged = false;
};

class CadmmAborted : public Error {
 public:
  CadmmAborted(const Error& cause, std::vector<Real> trace)
      : Error(cause.code(), std::string("C-ADMM aborted: ") + cause.what()), trace_(std::move(trace)) {}
  const std::vector<Real>& trace() const { return trace_; }

 private:
  std::vector<Real> trace_;
};

/// The (C + eta M / 2 I) factorization used by the z-step. C is negative
/// semidefinite, so the sum is positive definite only for large enough eta.
inline Eigen::LLT<RMatrix> z_step_factor(const RealQcqp& qp, Real eta) {
  const Eigen::Index n = qp.c_vec.size();
  const RMatrix k = qp.c_mat + 0.5 * eta * static_cast<Real>(qp.constraints()) * RMatrix::Identity(n, n);
  Eigen::LLT<RMatrix> llt(k);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kMatrixDomain, "C + eta M/2 I is not positive definite; increase eta");
  }
  return llt;
}

inline RVector z_step(const RealQcqp& qp, const Eigen::LLT<RMatrix>& factor, const ConsensusState& st) {
  RVector g = qp.c_vec;
  for (std::size_t i = 0; i < st.p.size(); ++i) g -= 0.5 * (st.lambda[i] - st.eta * st.p[i]);
  return factor.solve(g);
}

inline CadmmResult run_cadmm(const RealQcqp& qp, ConsensusState init, Real delta = 1e-10, int max_iter = 5000) {
  if (!(init.eta > 0.0) || !(delta > 0.0) || max_iter < 1) throw Error(ErrorCode::kDomain, "invalid C-ADMM config");
  const auto m = static_cast<std::size_t>(qp.constraints());
  if (init.p.size() != m || init.lambda.size() != m) throw Error(ErrorCode::kDimension, "consensus state size");
  const auto factor = z_step_factor(qp, init.eta);
  std::vector<QuadricProjector> projectors;
  for (std::size_t i = 0; i < m; ++i) projectors.emplace_back(qp.d_mat[i], qp.d_vec[i], qp.alpha[i]);

  CadmmResult out{CVector(), std::move(init), {}, false};
  auto& st = out.state;
  for (int it = 1; it <= max_iter; ++it) {
    st.z = z_step(qp, factor, st);
    try {
      for (std::size_t i = 0; i < m; ++i) st.p[i] = projectors[i].project(st.z + st.lambda[i] / st.eta);
    } catch (const Error& e) {
      throw CadmmAborted(e, out.delta_trace);
    }
    Real dmax = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      st.lambda[i] += st.eta * (st.z - st.p[i]);
      dmax = std::max(dmax, (st.z - st.p[i]).norm());
    }
    st.iteration = it;
    st.delta_max = dmax;
    out.delta_trace.push_back(dmax);
    if (dmax <= delta) {
      out.converged = true;
      break;
    }
  }
  out.h_star = unlift_vector(st.z);
  return out;
}

struct RecoveredStep {
  RVector sigma;
  Vcm vcm_out;
  CVector weight;
};

/// Weight w_prev + T^-1 A h*, the INRs that reproduce it, and the renewed VCM.
inline RecoveredStep recover(const Vcm& vcm_prev, const ArrayGeometry& geom, Real theta0_deg,
                             const std::vector<Real>& angles_deg, const CVector& h_star) {
  const CVector a0 = steering_vector(geom, theta0_deg);
  const CMatrix a = steering_matrix(geom, angles_deg);
  CVector weight = weight_from_h(vcm_prev, a, a0, h_star);
  RVector sigma = sigma_from_h(vcm_prev, a, h_star, a0);
  Vcm next = vcm_prev.updated(BlockAssignment{angles_deg, a, sigma});
  return {std::move(sigma), std::move(next), std::move(weight)};
}

struct CadmmStepResult {
  RecoveredStep step;
  CadmmResult admm;
};

/// Full multi-point step through the consensus-ADMM route.
inline CadmmStepResult solve_cadmm(const Vcm& vcm_prev, const ArrayGeometry& geom, Real theta0_deg,
                                   const std::vector<ControlTask>& tasks, const CadmmConfig& cfg = {}) {
  validate_tasks(tasks, theta0_deg, geom.size());
  std::vector<Real> rhos;
  for (const auto& t : tasks) {
    if (t.rho == 0.0) throw Error(ErrorCode::kDomain, "null targets need the iterative solver");
    rhos.push_back(t.rho);
  }
  const auto angles = task_angles(tasks);
  const CVector a0 = steering_vector(geom, theta0_deg);
  const CMatrix a = steering_matrix(geom, angles);
  const CVector w_prev = optimal_weight(vcm_prev, a0);
  const RealQcqp qp = build_real_qcqp(vcm_prev, a0, w_prev, a, rhos);
  auto admm = run_cadmm(qp, initialize_consensus(vcm_prev, geom, theta0_deg, tasks, cfg.eta), cfg.delta, cfg.max_iter);
  auto step = recover(vcm_prev, geom, theta0_deg, angles, admm.h_star);
  return {std::move(step), std::move(admm)};
}

}  // namespace oparc
