#pragma once

#include "oparc/array_model.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace oparc {

/// One virtual interference assigned to the VCM. An infinite INR is the limit
/// of an ever stronger interference: the direction is removed from the weight
/// space entirely (an exact null).
struct LedgerEntry {
  Real theta_deg;
  Real inr;
  int block;
};

/// A_k and Sigma_k of one multi-point step. `angles_deg` names the columns of
/// `steering` and is what the ledger records.
struct BlockAssignment {
  std::vector<Real> angles_deg;
  CMatrix steering;
  RVector inrs;

  static BlockAssignment make(const ArrayGeometry& geom, std::vector<Real> angles_deg, RVector inrs) {
    if (static_cast<Eigen::Index>(angles_deg.size()) != inrs.size()) {
      throw Error(ErrorCode::kDimension, "one INR per angle required");
    }
    CMatrix a = steering_matrix(geom, angles_deg);
    return BlockAssignment{std::move(angles_deg), std::move(a), std::move(inrs)};
  }

  int size() const { return static_cast<int>(inrs.size()); }
};

inline void require_full_column_rank(const CMatrix& a) {
  if (a.cols() == 0) return;
  if (a.cols() > a.rows()) throw Error(ErrorCode::kRankDeficient, "more steering columns than elements");
  Eigen::JacobiSVD<CMatrix> svd(a);
  const auto& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-10 * sv(0))) {
    throw Error(ErrorCode::kRankDeficient, "steering matrix is not full column rank");
  }
}

/// Virtual normalized covariance matrix.
///
/// `matrix()` holds the finite part T = base + sum of finite-INR outer
/// products; `inverse()` is the maintained inverse of the full VCM, updated
/// through the Woodbury identity. When the ledger holds infinite-INR entries
/// the inverse is the limit inverse, which annihilates those directions, and
/// matrix() * inverse() is no longer the identity.
class Vcm {
 public:
  static constexpr int kRefreshInterval = 64;

  static Vcm identity(int n) {
    if (n < 2) throw Error(ErrorCode::kDomain, "VCM needs N >= 2");
    return Vcm(CMatrix::Identity(n, n), CMatrix::Identity(n, n));
  }

  /// Wraps a Hermitian PD matrix (e.g. an estimated normalized covariance).
  /// The inverse is formed densely once; later updates use Woodbury.
  static Vcm from_matrix(const CMatrix& t) {
    if (t.rows() != t.cols() || t.rows() < 2) throw Error(ErrorCode::kDimension, "VCM must be square, N >= 2");
    CMatrix herm = 0.5 * (t + t.adjoint());
    Eigen::LLT<CMatrix> llt(herm);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::kDefiniteness, "VCM base is not positive definite");
    CMatrix inv = llt.solve(CMatrix::Identity(t.rows(), t.cols()));
    inv = 0.5 * (inv + inv.adjoint()).eval();
    return Vcm(std::move(herm), std::move(inv));
  }

  int size() const { return static_cast<int>(t_.rows()); }
  const CMatrix& matrix() const { return t_; }
  const CMatrix& inverse() const { return t_inv_; }
  const std::vector<LedgerEntry>& ledger() const { return ledger_; }
  bool has_nulls() const { return null_count_ > 0; }
  int block_count() const { return blocks_; }

  /// Sum of the ledger's finite outer products (the loading added on top of the base).
  CMatrix loading(const ArrayGeometry& geom) const {
    CMatrix delta = CMatrix::Zero(size(), size());
    for (const auto& e : ledger_) {
      if (!std::isfinite(e.inr)) continue;
      const CVector a = steering_vector(geom, e.theta_deg);
      delta += e.inr * a * a.adjoint();
    }
    return delta;
  }

  /// w^H T w using the finite part; exact for weights that honour every null.
  Real quadratic(const CVector& w) const { return (w.adjoint() * t_ * w)(0).real(); }

  Real gain(const CVector& w, const CVector& a0) const { return std::norm(w.dot(a0)) / quadratic(w); }

  /// T + A Sigma A^H with the inverse propagated through
  /// T^-1 - T^-1 A (I + Sigma A^H T^-1 A)^-1 Sigma A^H T^-1.
  Vcm updated(const BlockAssignment& block) const {
    const int m = block.size();
    if (block.steering.rows() != size() || block.steering.cols() != m) {
      throw Error(ErrorCode::kDimension, "block steering matrix has wrong shape");
    }
    if (m == 0 || block.inrs.isZero(0.0)) return *this;
    for (int i = 0; i < m; ++i) {
      if (std::isnan(block.inrs(i)) || block.inrs(i) == -std::numeric_limits<Real>::infinity()) {
        throw Error(ErrorCode::kDomain, "INR must be finite or +infinity");
      }
    }
    require_full_column_rank(block.steering);

    std::vector<Eigen::Index> finite_idx;
    std::vector<Eigen::Index> null_idx;
    for (int i = 0; i < m; ++i) (std::isfinite(block.inrs(i)) ? finite_idx : null_idx).push_back(i);

    Vcm next = *this;
    if (!finite_idx.empty()) {
      const auto mf = static_cast<Eigen::Index>(finite_idx.size());
      CMatrix a(size(), mf);
      RVector sigma(mf);
      for (Eigen::Index j = 0; j < mf; ++j) {
        a.col(j) = block.steering.col(finite_idx[static_cast<std::size_t>(j)]);
        sigma(j) = block.inrs(finite_idx[static_cast<std::size_t>(j)]);
      }
      next.apply_finite(a, sigma);
    }
    for (auto idx : null_idx) next.apply_null(block.steering.col(idx));

    for (int i = 0; i < m; ++i) {
      next.ledger_.push_back({block.angles_deg.empty() ? 0.0 : block.angles_deg[static_cast<std::size_t>(i)],
                              block.inrs(i), blocks_});
    }
    next.blocks_ = blocks_ + 1;
    if (++next.updates_since_refresh_ >= kRefreshInterval) next.refresh();
    return next;
  }

  /// Rebuilds a VCM by replaying ledger entries on top of `base`, block by block.
  static Vcm replay(const ArrayGeometry& geom, const std::vector<LedgerEntry>& ledger, Vcm base) {
    std::size_t i = 0;
    while (i < ledger.size()) {
      std::size_t j = i;
      while (j < ledger.size() && ledger[j].block == ledger[i].block) ++j;
      std::vector<Real> angles;
      RVector inrs(static_cast<Eigen::Index>(j - i));
      for (std::size_t k = i; k < j; ++k) {
        angles.push_back(ledger[k].theta_deg);
        inrs(static_cast<Eigen::Index>(k - i)) = ledger[k].inr;
      }
      base = base.updated(BlockAssignment::make(geom, std::move(angles), std::move(inrs)));
      i = j;
    }
    return base;
  }

 private:
  Vcm(CMatrix t, CMatrix t_inv) : t_(std::move(t)), t_inv_(std::move(t_inv)) {}

  void apply_finite(const CMatrix& a, const RVector& sigma) {
    const Eigen::Index m = a.cols();
    const CMatrix pa = t_inv_ * a;
    CMatrix g = a.adjoint() * pa;
    g = 0.5 * (g + g.adjoint()).eval();

    // Capacitance I + Sigma G shares its spectrum with the Hermitian
    // I + G^1/2 Sigma G^1/2, whose sign pattern decides whether T stays PD.
    Eigen::SelfAdjointEigenSolver<CMatrix> ges(g);
    const RVector gev = ges.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const CMatrix g_half = ges.eigenvectors() * gev.asDiagonal() * ges.eigenvectors().adjoint();
    CMatrix herm = CMatrix::Identity(m, m) + g_half * sigma.asDiagonal() * g_half;
    herm = 0.5 * (herm + herm.adjoint()).eval();
    const Real min_eig = Eigen::SelfAdjointEigenSolver<CMatrix>(herm, Eigen::EigenvaluesOnly).eigenvalues()(0);
    if (std::abs(min_eig) < 1e-12) throw Error(ErrorCode::kUpdateSingular, "capacitance matrix is singular");
    if (min_eig < 0.0) throw Error(ErrorCode::kDefiniteness, "update would leave T indefinite");

    const CMatrix sigma_c = sigma.cast<Complex>().asDiagonal();
    const CMatrix cap = CMatrix::Identity(m, m) + sigma_c * g;
    Eigen::FullPivLU<CMatrix> lu(cap);
    const CMatrix correction = pa * lu.solve(sigma_c * pa.adjoint());
    t_inv_ -= correction;
    t_inv_ = 0.5 * (t_inv_ + t_inv_.adjoint()).eval();
    t_ += a * sigma_c * a.adjoint();
    t_ = 0.5 * (t_ + t_.adjoint()).eval();
  }

  void apply_null(const CVector& a) {
    const CVector pa = t_inv_ * a;
    const Real q = a.dot(pa).real();
    if (!(q > 1e-14 * t_inv_.norm() * a.squaredNorm())) {
      throw Error(ErrorCode::kUpdateSingular, "direction already nulled");
    }
    t_inv_ -= pa * pa.adjoint() / q;
    t_inv_ = 0.5 * (t_inv_ + t_inv_.adjoint()).eval();
    ++null_count_;
    null_dirs_.push_back(a);
  }

  void refresh() {
    updates_since_refresh_ = 0;
    Eigen::LLT<CMatrix> llt(t_);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::kDefiniteness, "VCM lost positive definiteness");
    t_inv_ = llt.solve(CMatrix::Identity(size(), size()));
    t_inv_ = 0.5 * (t_inv_ + t_inv_.adjoint()).eval();
    const auto nulls = std::move(null_dirs_);
    null_dirs_.clear();
    null_count_ = 0;
    for (const auto& a : nulls) apply_null(a);
  }

  CMatrix t_;
  CMatrix t_inv_;
  std::vector<LedgerEntry> ledger_;
  std::vector<CVector> null_dirs_;
  int null_count_ = 0;
  int blocks_ = 0;
  int updates_since_refresh_ = 0;
};

inline Vcm identity_vcm(int n) { return Vcm::identity(n); }

inline Vcm apply_block_update(const Vcm& vcm, const BlockAssignment& block) { return vcm.updated(block); }

/// w = T^-1 a0 using the maintained inverse.
inline CVector optimal_weight(const Vcm& vcm, const CVector& a0) { return vcm.inverse() * a0; }

inline Real array_gain(const CVector& w, const Vcm& vcm, const CVector& a0) {
  if (!vcm.has_nulls()) return array_gain(w, vcm.matrix(), a0);
  return vcm.gain(w, a0);
}

/// Weight-space image of an INR block:
/// h = -(I + Sigma A^H T^-1 A)^-1 Sigma A^H T^-1 a0, so that the updated
/// weight is w_prev + T^-1 A h. Infinite INRs give the limiting rows
/// (A^H T^-1 A h)_m = -(A^H T^-1 a0)_m, i.e. an exact null at that column.
inline CVector h_from_sigma(const Vcm& vcm, const CMatrix& a, const RVector& sigma, const CVector& a0) {
  const Eigen::Index m = a.cols();
  if (sigma.size() != m || a.rows() != vcm.size()) throw Error(ErrorCode::kDimension, "h_from_sigma shapes");
  const CMatrix pa = vcm.inverse() * a;
  const CMatrix g = a.adjoint() * pa;
  const CVector b = pa.adjoint() * a0;
  CMatrix k(m, m);
  CVector rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::isfinite(sigma(i))) {
      k.row(i) = sigma(i) * g.row(i);
      k(i, i) += 1.0;
      rhs(i) = -sigma(i) * b(i);
    } else {
      k.row(i) = g.row(i);
      rhs(i) = -b(i);
    }
  }
  Eigen::FullPivLU<CMatrix> lu(k);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw Error(ErrorCode::kUpdateSingular, "capacitance matrix is singular");
  return lu.solve(rhs);
}

/// Inverse map Sigma = Diag(-h ./ (A^H T^-1 (a0 + A h))).
inline RVector sigma_from_h(const Vcm& vcm, const CMatrix& a, const CVector& h, const CVector& a0) {
  const Eigen::Index m = a.cols();
  if (h.size() != m || a.rows() != vcm.size()) throw Error(ErrorCode::kDimension, "sigma_from_h shapes");
  const CVector w_new = vcm.inverse() * (a0 + a * h);
  const CVector den = a.adjoint() * w_new;
  const Real scale = a.colwise().norm().maxCoeff() * w_new.norm();
  RVector sigma(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (h(i) == Complex(0.0, 0.0)) {
      sigma(i) = 0.0;
      continue;
    }
    if (!(std::abs(den(i)) > 1e-14 * scale)) {
      throw Error(ErrorCode::kBijectionSingular, "zero response at controlled angle " + std::to_string(i));
    }
    const Complex s = -h(i) / den(i);
    if (std::abs(s.imag()) > 1e-8 * std::abs(s)) {
      throw Error(ErrorCode::kConsistency, "recovered INR has an imaginary residue");
    }
    sigma(i) = s.real();
  }
  return sigma;
}

/// w_prev + T^-1 A h.
inline CVector weight_from_h(const Vcm& vcm, const CMatrix& a, const CVector& a0, const CVector& h) {
  return vcm.inverse() * (a0 + a * h);
}

/// Closed-form updated weight
/// w_prev - T^-1 A (I + Sigma A^H T^-1 A)^-1 Sigma A^H T^-1 a0 (finite Sigma).
inline CVector closed_form_weight(const Vcm& vcm, const CMatrix& a, const RVector& sigma, const CVector& a0) {
  const Eigen::Index m = a.cols();
  const CMatrix pa = vcm.inverse() * a;
  const CMatrix sigma_c = sigma.cast<Complex>().asDiagonal();
  const CMatrix cap = CMatrix::Identity(m, m) + sigma_c * a.adjoint() * pa;
  const CVector w_prev = vcm.inverse() * a0;
  return w_prev - pa * Eigen::FullPivLU<CMatrix>(cap).solve(sigma_c * pa.adjoint() * a0);
}

}  // namespace oparc
