#pragma once

#include "oparc/array_model.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace oparc {

/// Counter-based generator: the k-th output for a seed is the SplitMix64
/// output mix(seed + (k + 1) * 0x9E3779B97F4A7C15), which equals the k-th
/// value of a sequential SplitMix64 stream started from `seed`. Any counter
/// can be evaluated independently, so sharded generation matches serial.
///
/// Test vectors (seed 0): k=0 -> 0xE220A8397B1DCDAF, k=1 -> 0x6E789E6AA1B965F4,
/// k=2 -> 0x06C45D188009454F.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t counter) const {
    std::uint64_t z = seed_ + (counter + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in (0, 1): top 53 bits, offset by half an ulp.
  Real uniform(std::uint64_t counter) const {
    return (static_cast<Real>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Circular complex Gaussian with E|z|^2 = 1 from counters 2k and 2k+1
  /// (Box-Muller: radius from the first uniform, angle from the second).
  Complex complex_gaussian(std::uint64_t k) const {
    const Real radius = std::sqrt(-std::log(uniform(2 * k)));
    const Real angle = 2.0 * kPi * uniform(2 * k + 1);
    return {radius * std::cos(angle), radius * std::sin(angle)};
  }

 private:
  std::uint64_t seed_;
};

struct Interference {
  Real theta_deg;
  Real power;  // sigma_l^2
};

/// Ground truth for snapshot synthesis and SINR evaluation. Interference
/// powers are absolute; INR = power / sigma_n2.
struct Scenario {
  Real theta0_deg = 0.0;
  Real sigma_s2 = 10.0;
  Real sigma_n2 = 1.0;
  std::vector<Interference> interferences;
  std::uint64_t seed = 1;
  int snapshot_count = 1000;

  void add_interference_inr(Real theta_deg, Real inr) { interferences.push_back({theta_deg, inr * sigma_n2}); }
};

/// R = sigma_n^2 I + sum sigma_l^2 a_l a_l^H
inline CMatrix true_covariance(const Scenario& sc, const ArrayGeometry& geom) {
  if (!(sc.sigma_n2 > 0.0)) throw Error(ErrorCode::kDomain, "noise power must be positive");
  const int n = geom.size();
  CMatrix r = sc.sigma_n2 * CMatrix::Identity(n, n);
  for (const auto& in : sc.interferences) {
    if (!(in.power > 0.0)) throw Error(ErrorCode::kDomain, "interference power must be positive");
    const CVector a = steering_vector(geom, in.theta_deg);
    r += in.power * a * a.adjoint();
  }
  return r;
}

/// Interference-plus-noise snapshots as the columns of an N x T matrix.
/// Snapshot t draws its L source amplitudes and then its N noise samples
/// from complex-Gaussian slots t*(L+N) .. t*(L+N)+L+N-1.
inline CMatrix generate_snapshots(const Scenario& sc, const ArrayGeometry& geom) {
  if (sc.snapshot_count < 1) throw Error(ErrorCode::kDomain, "snapshot count must be >= 1");
  if (!(sc.sigma_n2 >= 0.0)) throw Error(ErrorCode::kDomain, "noise power must be >= 0");
  const int n = geom.size();
  const auto l = static_cast<std::uint64_t>(sc.interferences.size());
  const std::uint64_t per = l + static_cast<std::uint64_t>(n);
  CMatrix steer(n, static_cast<Eigen::Index>(l));
  RVector amp(static_cast<Eigen::Index>(l));
  for (std::uint64_t i = 0; i < l; ++i) {
    steer.col(static_cast<Eigen::Index>(i)) = steering_vector(geom, sc.interferences[i].theta_deg);
    amp(static_cast<Eigen::Index>(i)) = std::sqrt(sc.interferences[i].power);
  }
  const Real noise_amp = std::sqrt(sc.sigma_n2);
  const CounterRng rng(sc.seed);
  CMatrix x(n, sc.snapshot_count);
  for (int t = 0; t < sc.snapshot_count; ++t) {
    const std::uint64_t base = static_cast<std::uint64_t>(t) * per;
    CVector col = CVector::Zero(n);
    for (std::uint64_t i = 0; i < l; ++i) {
      col += amp(static_cast<Eigen::Index>(i)) * rng.complex_gaussian(base + i) * steer.col(static_cast<Eigen::Index>(i));
    }
    for (int e = 0; e < n; ++e) col(e) += noise_amp * rng.complex_gaussian(base + l + static_cast<std::uint64_t>(e));
    x.col(t) = col;
  }
  return x;
}

/// Output SINR in dB against the scenario's true covariance.
inline Real sinr_report(const CVector& w, const Scenario& sc, const ArrayGeometry& geom) {
  return to_db(output_sinr(w, true_covariance(sc, geom), sc.sigma_s2, steering_vector(geom, sc.theta0_deg)));
}

struct ControlMetrics {
  std::vector<Real> d_db;  // |dB L_curr - dB L_prev| per controlled angle
  Real j = 0.0;            // RMS difference of linear levels over the grid
};

inline ControlMetrics control_metrics(const std::vector<PatternSample>& prev, const std::vector<PatternSample>& curr,
                                      const std::vector<Real>& controlled_deg) {
  if (prev.size() != curr.size() || prev.empty()) throw Error(ErrorCode::kDimension, "pattern grids differ");
  ControlMetrics out;
  Real acc = 0.0;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (std::abs(prev[i].theta_deg - curr[i].theta_deg) > 1e-9) throw Error(ErrorCode::kDimension, "pattern grids differ");
    const Real diff = from_db(curr[i].level_db) - from_db(prev[i].level_db);
    acc += diff * diff;
  }
  out.j = std::sqrt(acc / static_cast<Real>(prev.size()));
  for (Real theta : controlled_deg) {
    bool found = false;
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (std::abs(prev[i].theta_deg - theta) <= 1e-9) {
        out.d_db.push_back(std::abs(curr[i].level_db - prev[i].level_db));
        found = true;
        break;
      }
    }
    if (!found) throw Error(ErrorCode::kDimension, "controlled angle not on the grid");
  }
  return out;
}

}  // namespace oparc
