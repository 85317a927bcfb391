#pragma once

#include "oparc/cadmm.hpp"

#include <string>
#include <vector>

namespace oparc {

enum class SolverKind { kIterative, kCadmm };

inline const char* to_string(SolverKind kind) { return kind == SolverKind::kIterative ? "iterative" : "cadmm"; }

struct SolverConfig {
  SolverKind kind = SolverKind::kIterative;
  IterativeConfig iterative;
  CadmmConfig cadmm;
};

/// Outcome of one multi-point step regardless of which solver produced it.
/// `trace` is beta_max per sweep (iterative) or delta_max per iteration (C-ADMM).
struct StepOutcome {
  std::vector<Real> angles_deg;
  RVector sigma;
  Vcm vcm;
  CVector weight;
  std::vector<Real> trace;
  int iterations = 0;
  bool converged = false;
  std::string warning;
  std::vector<SweepTrace> sweeps;  // iterative only
};

inline StepOutcome solve_step(const Vcm& vcm_prev, const ArrayGeometry& geom, Real theta0_deg,
                              const std::vector<ControlTask>& tasks, const SolverConfig& cfg = {}) {
  if (cfg.kind == SolverKind::kIterative) {
    auto r = solve_iterative(vcm_prev, geom, theta0_deg, tasks, cfg.iterative);
    return {task_angles(tasks), std::move(r.sigma_star), std::move(r.vcm_out), std::move(r.weight),
            std::move(r.beta_max_trace), r.sweeps_used, r.converged, std::move(r.warning), std::move(r.sweeps)};
  }
  auto r = solve_cadmm(vcm_prev, geom, theta0_deg, tasks, cfg.cadmm);
  std::string warning;
  if (!r.admm.converged) warning = "C-ADMM stopped at max_iter with delta_max " + std::to_string(r.admm.state.delta_max);
  return {task_angles(tasks), std::move(r.step.sigma), std::move(r.step.vcm_out), std::move(r.step.weight),
          std::move(r.admm.delta_trace), r.admm.state.iteration, r.admm.converged, std::move(warning), {}};
}

}  // namespace oparc
