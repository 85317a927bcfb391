#pragma once

#include "oparc/multipoint.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace oparc {

struct Sector {
  Real lo_deg;
  Real hi_deg;

  bool contains(Real theta) const { return theta >= lo_deg && theta <= hi_deg; }
};

struct SidelobeSector {
  Sector span;
  Real level_db;
};

struct TemplatePoint {
  Real theta_deg;
  Real level_db;
};

/// Target pattern L_d: piecewise-constant sidelobe ceilings plus an
/// optional sampled mainlobe shape (empty template = unconstrained).
struct DesiredPattern {
  Real theta0_deg = 0.0;
  Sector mainlobe{-5.0, 5.0};
  std::vector<SidelobeSector> sidelobes;
  std::vector<TemplatePoint> mainlobe_template;

  void validate() const {
    check_angle(theta0_deg);
    if (!mainlobe.contains(theta0_deg)) throw Error(ErrorCode::kDomain, "mainlobe sector must contain theta0");
    std::vector<Sector> spans;
    for (const auto& s : sidelobes) {
      if (!(s.span.lo_deg <= s.span.hi_deg)) throw Error(ErrorCode::kDomain, "sector bounds reversed");
      if (!(s.level_db < 0.0)) throw Error(ErrorCode::kDomain, "sidelobe levels must be below 0 dB");
      spans.push_back(s.span);
    }
    std::sort(spans.begin(), spans.end(), [](const Sector& a, const Sector& b) { return a.lo_deg < b.lo_deg; });
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i].lo_deg < spans[i - 1].hi_deg) throw Error(ErrorCode::kDomain, "sidelobe sectors overlap");
    }
    for (const auto& p : mainlobe_template) {
      if (!mainlobe.contains(p.theta_deg)) throw Error(ErrorCode::kDomain, "template point outside the mainlobe");
    }
  }

  /// Sidelobe ceiling at theta, first matching sector wins at shared edges.
  std::optional<Real> sidelobe_level_db(Real theta) const {
    for (const auto& s : sidelobes) {
      if (s.span.contains(theta)) return s.level_db;
    }
    return std::nullopt;
  }
};

struct SynthesisConfig {
  AngleGrid grid{-90.0, 90.0, 0.05};
  Real level_tol_db = 0.5;
  int max_steps = 100;
  std::vector<int> ck_schedule;  // empty: no large-array truncation
  SolverConfig solver;
  Real mainlobe_deviation_db = 0.5;
  Real transition_deg = 2.0;

  std::optional<int> ck_for_step(int k) const {
    if (ck_schedule.empty()) return std::nullopt;
    const auto idx = std::min(static_cast<std::size_t>(std::max(k, 1) - 1), ck_schedule.size() - 1);
    return ck_schedule[idx];
  }
};

/// Strict local maxima of the sampled pattern inside any of the sectors.
inline std::vector<Real> detect_sidelobe_peaks(const std::vector<PatternSample>& samples,
                                               const std::vector<Sector>& sectors) {
  std::vector<Real> peaks;
  for (std::size_t i = 1; i + 1 < samples.size(); ++i) {
    const Real theta = samples[i].theta_deg;
    if (std::none_of(sectors.begin(), sectors.end(), [&](const Sector& s) { return s.contains(theta); })) continue;
    if (samples[i].level_db > samples[i - 1].level_db && samples[i].level_db > samples[i + 1].level_db) {
      peaks.push_back(theta);
    }
  }
  return peaks;
}

inline const PatternSample& nearest_sample(const std::vector<PatternSample>& samples, Real theta) {
  const auto it = std::min_element(samples.begin(), samples.end(), [&](const PatternSample& a, const PatternSample& b) {
    return std::abs(a.theta_deg - theta) < std::abs(b.theta_deg - theta);
  });
  return *it;
}

/// Template angles whose current level deviates from the template by more
/// than the configured threshold.
inline std::vector<Real> select_mainlobe_angles(const std::vector<PatternSample>& samples, const DesiredPattern& desired,
                                                const SynthesisConfig& cfg) {
  std::vector<Real> out;
  for (const auto& p : desired.mainlobe_template) {
    if (p.theta_deg == desired.theta0_deg) continue;
    if (std::abs(nearest_sample(samples, p.theta_deg).level_db - p.level_db) > cfg.mainlobe_deviation_db) {
      out.push_back(p.theta_deg);
    }
  }
  return out;
}

struct RankedAngle {
  Real theta_deg;
  Real deviation_db;  // |dB(L_{k-1}) - dB(L_d)|
};

/// Largest deviations first, keeping at most `ck` angles.
inline std::vector<Real> rank_and_truncate(std::vector<RankedAngle> candidates, int ck) {
  if (ck < 1) throw Error(ErrorCode::kDomain, "C_k must be >= 1");
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const RankedAngle& a, const RankedAngle& b) { return a.deviation_db > b.deviation_db; });
  std::vector<Real> out;
  for (std::size_t i = 0; i < candidates.size() && i < static_cast<std::size_t>(ck); ++i) {
    out.push_back(candidates[i].theta_deg);
  }
  return out;
}

struct SynthesisStep {
  int step;
  std::vector<Real> angles_deg;
  RVector inrs;
  Real gain;
  int solver_iterations;
  bool solver_converged;
};

struct SynthesisResult {
  CVector weight;
  Vcm vcm;
  int steps_used = 0;
  bool success = false;
  std::vector<SynthesisStep> steps;
  std::vector<PatternSample> final_pattern;
  Real worst_peak_deviation_db = 0.0;
};

class SynthesisAborted : public Error {
 public:
  SynthesisAborted(const Error& cause, SynthesisResult partial)
      : Error(cause.code(), std::string("synthesis aborted: ") + cause.what()), partial_(std::move(partial)) {}
  const SynthesisResult& partial() const { return partial_; }

 private:
  SynthesisResult partial_;
};

/// Sidelobe sectors with the transition band around the mainlobe cut away.
inline std::vector<Sector> effective_sidelobe_sectors(const DesiredPattern& desired, Real transition_deg) {
  const Real cut_lo = desired.mainlobe.lo_deg - transition_deg;
  const Real cut_hi = desired.mainlobe.hi_deg + transition_deg;
  std::vector<Sector> out;
  for (const auto& s : desired.sidelobes) {
    if (s.span.lo_deg < cut_lo) out.push_back({s.span.lo_deg, std::min(s.span.hi_deg, cut_lo)});
    if (s.span.hi_deg > cut_hi) out.push_back({std::max(s.span.lo_deg, cut_hi), s.span.hi_deg});
  }
  return out;
}

struct PatternAudit {
  std::vector<RankedAngle> peaks;
  std::vector<RankedAngle> mainlobe;
  Real worst_db = 0.0;
  bool within(Real tol) const { return worst_db <= tol; }
};

inline PatternAudit audit_pattern(const std::vector<PatternSample>& samples, const DesiredPattern& desired,
                                  const SynthesisConfig& cfg) {
  PatternAudit audit;
  const auto sectors = effective_sidelobe_sectors(desired, cfg.transition_deg);
  for (Real theta : detect_sidelobe_peaks(samples, sectors)) {
    const Real target = *desired.sidelobe_level_db(theta);
    const Real dev = std::abs(nearest_sample(samples, theta).level_db - target);
    audit.peaks.push_back({theta, dev});
    audit.worst_db = std::max(audit.worst_db, dev);
  }
  for (const auto& p : desired.mainlobe_template) {
    if (p.theta_deg == desired.theta0_deg) continue;
    const Real dev = std::abs(nearest_sample(samples, p.theta_deg).level_db - p.level_db);
    if (dev > cfg.mainlobe_deviation_db) audit.mainlobe.push_back({p.theta_deg, dev});
    audit.worst_db = std::max(audit.worst_db, dev);
  }
  return audit;
}

inline Real desired_level_db(const DesiredPattern& desired, Real theta) {
  for (const auto& p : desired.mainlobe_template) {
    if (p.theta_deg == theta) return p.level_db;
  }
  if (auto lvl = desired.sidelobe_level_db(theta)) return *lvl;
  throw Error(ErrorCode::kDomain, "no desired level at " + std::to_string(theta) + " deg");
}

/// Iterative pattern synthesis from w = a(theta0), T = I. Each step picks the
/// sidelobe peaks and off-template mainlobe angles of the current pattern,
/// ranks/truncates them, and sets them to their desired levels in one
/// multi-point step.
inline SynthesisResult synthesize(const ArrayGeometry& geom, const DesiredPattern& desired,
                                  const SynthesisConfig& cfg = {}) {
  desired.validate();
  if (geom.size() < 3) throw Error(ErrorCode::kDomain, "synthesis needs N >= 3");
  if (!(cfg.level_tol_db > 0.0)) throw Error(ErrorCode::kDomain, "level tolerance must be positive");
  for (int ck : cfg.ck_schedule) {
    if (ck < 1 || ck >= geom.size()) throw Error(ErrorCode::kDomain, "C_k must lie in [1, N)");
  }
  const Real theta0 = desired.theta0_deg;
  const CVector a0 = steering_vector(geom, theta0);

  SynthesisResult res{a0, Vcm::identity(geom.size()), 0, false, {}, {}, 0.0};
  for (int k = 1;; ++k) {
    res.final_pattern = pattern_over_grid(res.weight, theta0, cfg.grid, geom);
    const auto audit = audit_pattern(res.final_pattern, desired, cfg);
    res.worst_peak_deviation_db = audit.worst_db;
    if (audit.within(cfg.level_tol_db)) {
      res.success = true;
      break;
    }
    if (k > cfg.max_steps) break;

    std::vector<RankedAngle> omega = audit.peaks;
    omega.insert(omega.end(), audit.mainlobe.begin(), audit.mainlobe.end());
    std::vector<Real> chosen;
    if (auto ck = cfg.ck_for_step(k)) {
      chosen = rank_and_truncate(omega, *ck);
    } else {
      for (const auto& c : omega) chosen.push_back(c.theta_deg);
    }
    if (static_cast<int>(chosen.size()) >= geom.size()) {
      std::vector<RankedAngle> keep;
      for (const auto& c : omega) {
        if (std::find(chosen.begin(), chosen.end(), c.theta_deg) != chosen.end()) keep.push_back(c);
      }
      chosen = rank_and_truncate(keep, geom.size() - 1);
    }
    std::vector<ControlTask> tasks;
    for (Real theta : chosen) tasks.push_back(ControlTask::from_db(theta, desired_level_db(desired, theta)));

    try {
      auto out = solve_step(res.vcm, geom, theta0, tasks, cfg.solver);
      res.vcm = std::move(out.vcm);
      res.weight = std::move(out.weight);
      res.steps.push_back({k, std::move(out.angles_deg), std::move(out.sigma), res.vcm.gain(res.weight, a0),
                           out.iterations, out.converged});
      res.steps_used = k;
    } catch (const Error& e) {
      throw SynthesisAborted(e, res);
    }
  }
  return res;
}

}  // namespace oparc
