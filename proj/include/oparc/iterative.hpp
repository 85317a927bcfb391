#pragma once

#include "oparc/kernel.hpp"

#include <set>
#include <string>
#include <vector>

namespace oparc {

struct IterativeConfig {
  Real beta_eps = 1e-10;
  int max_sweeps = 200;
};

struct SweepTrace {
  int sweep;
  std::vector<Real> betas;
  Real beta_max;
};

struct MultiPointResult {
  RVector sigma_star;
  Vcm vcm_out;
  CVector weight;
  std::vector<Real> beta_max_trace;
  std::vector<SweepTrace> sweeps;
  int sweeps_used = 0;
  bool converged = false;
  std::string warning;
};

/// Raised when a single-point solve fails mid-run; carries the sweeps done so far.
class IterativeAborted : public Error {
 public:
  IterativeAborted(const Error& cause, std::vector<SweepTrace> trace)
      : Error(cause.code(), std::string("iterative solve aborted: ") + cause.what()), trace_(std::move(trace)) {}

  const std::vector<SweepTrace>& trace() const { return trace_; }

 private:
  std::vector<SweepTrace> trace_;
};

inline void validate_tasks(const std::vector<ControlTask>& tasks, Real theta0_deg, int n_elements) {
  const auto m = static_cast<int>(tasks.size());
  if (m < 1) throw Error(ErrorCode::kDomain, "at least one control task required");
  if (m >= n_elements) {
    throw Error(ErrorCode::kDegreesOfFreedom,
                std::to_string(m) + " tasks exceed the " + std::to_string(n_elements - 1) + " controllable points");
  }
  std::set<Real> seen;
  for (const auto& task : tasks) {
    validate_task(task, theta0_deg);
    if (!seen.insert(task.theta_deg).second) throw Error(ErrorCode::kDomain, "control angles must be distinct");
  }
}

inline std::vector<Real> task_angles(const std::vector<ControlTask>& tasks) {
  std::vector<Real> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) out.push_back(t.theta_deg);
  return out;
}

/// Sweeps single-point control over the tasks in caller order until the
/// largest newly assigned |INR| drops to beta_eps, then commits the summed
/// INRs to vcm_in as one block.
inline MultiPointResult solve_iterative(const Vcm& vcm_in, const ArrayGeometry& geom, Real theta0_deg,
                                        const std::vector<ControlTask>& tasks, const IterativeConfig& cfg = {}) {
  if (!(cfg.beta_eps > 0.0) || cfg.max_sweeps < 1) throw Error(ErrorCode::kDomain, "invalid iterative config");
  validate_tasks(tasks, theta0_deg, geom.size());
  const auto m = static_cast<Eigen::Index>(tasks.size());

  MultiPointResult out{RVector::Zero(m), vcm_in, CVector(), {}, {}, 0, false, {}};
  Vcm xi = vcm_in;
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    SweepTrace trace{sweep, {}, 0.0};
    for (Eigen::Index i = 0; i < m; ++i) {
      try {
        auto step = control_single(xi, geom, theta0_deg, tasks[static_cast<std::size_t>(i)]);
        xi = std::move(step.vcm);
        trace.betas.push_back(step.beta);
      } catch (const Error& e) {
        out.sweeps.push_back(trace);
        throw IterativeAborted(e, out.sweeps);
      }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const Real b = trace.betas[static_cast<std::size_t>(i)];
      out.sigma_star(i) += b;
      trace.beta_max = std::max(trace.beta_max, std::abs(b));
    }
    out.beta_max_trace.push_back(trace.beta_max);
    out.sweeps.push_back(std::move(trace));
    out.sweeps_used = sweep;
    if (out.beta_max_trace.back() <= cfg.beta_eps) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) {
    out.warning = "sweep cap " + std::to_string(cfg.max_sweeps) + " reached with beta_max " +
                  std::to_string(out.beta_max_trace.back());
  }
  out.vcm_out = vcm_in.updated(BlockAssignment::make(geom, task_angles(tasks), out.sigma_star));
  out.weight = optimal_weight(out.vcm_out, steering_vector(geom, theta0_deg));
  return out;
}

}  // namespace oparc
