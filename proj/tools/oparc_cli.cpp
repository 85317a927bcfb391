#include "oparc/oparc.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace oparc;
using io::json;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitIncomplete = 3;

struct Report {
  json body = json::object();
  std::vector<std::string> outputs;
  fs::path dir;

  Report(const std::string& command, const config::RunConfig& cfg, fs::path out_dir) : dir(std::move(out_dir)) {
    body["command"] = command;
    body["config_hash"] = io::hex64(cfg.hash);
    body["geometry_fingerprint"] = io::hex64(cfg.geometry.fingerprint());
  }

  void write(const std::string& name, const std::string& text) {
    io::write_file((dir / name).string(), text);
    outputs.push_back(name);
  }

  void finish() {
    outputs.push_back("report.json");
    body["outputs"] = outputs;
    io::write_file((dir / "report.json").string(), body.dump(2) + "\n");
  }
};

json level_json(Real db) { return std::isfinite(db) ? json(db) : json("-inf"); }

json sigma_json(const std::vector<Real>& angles, const RVector& sigma) {
  json arr = json::array();
  for (std::size_t i = 0; i < angles.size(); ++i) {
    arr.push_back({{"theta_deg", angles[i]}, {"inr_linear", io::inr_to_json(sigma(static_cast<Eigen::Index>(i)))}});
  }
  return arr;
}

json step_trace_json(const StepOutcome& out, SolverKind kind) {
  json j;
  j["solver"] = to_string(kind);
  j["iterations"] = out.iterations;
  j["converged"] = out.converged;
  if (!out.warning.empty()) j["warning"] = out.warning;
  if (kind == SolverKind::kIterative) {
    json sweeps = json::array();
    for (const auto& s : out.sweeps) {
      json betas = json::array();
      for (Real b : s.betas) betas.push_back(io::inr_to_json(b));
      sweeps.push_back({{"sweep", s.sweep}, {"betas", betas}, {"beta_max", io::inr_to_json(s.beta_max)}});
    }
    j["sweeps"] = sweeps;
  } else {
    j["delta_max"] = out.trace;
  }
  return j;
}

std::string trace_csv(const StepOutcome& out, SolverKind kind) {
  std::string text;
  if (kind == SolverKind::kIterative) {
    text = "sweep,beta_max\n";
    for (const auto& s : out.sweeps) text += std::to_string(s.sweep) + "," + io::format_exact(s.beta_max) + "\n";
  } else {
    text = "iteration,delta_max\n";
    for (std::size_t i = 0; i < out.trace.size(); ++i) text += std::to_string(i + 1) + "," + io::format_exact(out.trace[i]) + "\n";
  }
  return text;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + dir.string());
}

std::vector<ControlTask> load_tasks(const std::string& path) { return io::parse_tasks_csv(io::read_file(path)); }

Scenario scenario_with(const config::RunConfig& cfg, std::optional<int> snapshots, std::optional<std::uint64_t> seed) {
  Scenario sc = cfg.require_scenario();
  if (snapshots) sc.snapshot_count = *snapshots;
  if (seed) sc.seed = *seed;
  return sc;
}

json sinr_json(const CVector& w, const Scenario& sc, const ArrayGeometry& geom) {
  const Real v = sinr_report(w, sc, geom);
  return std::isfinite(v) ? json(v) : json(nullptr);
}

int run_synth(const std::string& command, const std::string& cfg_path, const std::string& out_dir,
              const std::string& solver, bool trace) {
  auto cfg = config::load_config(cfg_path);
  const auto& desired = cfg.require_desired();
  if (!solver.empty()) cfg.synthesis.solver.kind = config::parse_solver_kind(solver);
  ensure_dir(out_dir);
  Report rep(command, cfg, out_dir);

  std::string abort_msg;
  int code = 0;
  const SynthesisResult res = [&] {
    try {
      return synthesize(cfg.geometry, desired, cfg.synthesis);
    } catch (const SynthesisAborted& e) {
      abort_msg = e.what();
      code = kExitNumeric;
      return e.partial();
    }
  }();

  json steps = json::array();
  for (const auto& s : res.steps) {
    steps.push_back({{"step", s.step},
                     {"omega", sigma_json(s.angles_deg, s.inrs)},
                     {"gain", s.gain},
                     {"solver_iterations", s.solver_iterations},
                     {"solver_converged", s.solver_converged}});
  }
  rep.body["solver"] = to_string(cfg.synthesis.solver.kind);
  rep.body["steps"] = steps;
  rep.body["steps_used"] = res.steps_used;
  rep.body["success"] = res.success;
  rep.body["worst_deviation_db"] = res.worst_peak_deviation_db;
  rep.body["ledger"] = io::ledger_to_json(res.vcm.ledger());
  if (!abort_msg.empty()) rep.body["error"] = abort_msg;

  rep.write("pattern.csv", io::pattern_csv(res.final_pattern));
  rep.write("weight.csv", io::weight_csv(res.weight));
  if (trace) {
    ensure_dir(fs::path(out_dir) / "steps");
    const CVector a0 = steering_vector(cfg.geometry, desired.theta0_deg);
    std::vector<LedgerEntry> prefix;
    std::size_t next = 0;
    const auto& ledger = res.vcm.ledger();
    for (std::size_t k = 0; k < res.steps.size(); ++k) {
      while (next < ledger.size() && ledger[next].block <= static_cast<int>(k)) prefix.push_back(ledger[next++]);
      const Vcm t = Vcm::replay(cfg.geometry, prefix, Vcm::identity(cfg.geometry.size()));
      char name[32];
      std::snprintf(name, sizeof name, "steps/step_%03zu.csv", k + 1);
      rep.write(name, io::pattern_csv(pattern_over_grid(optimal_weight(t, a0), desired.theta0_deg, cfg.synthesis.grid,
                                                        cfg.geometry)));
    }
  }
  rep.finish();
  if (code != 0) {
    std::cerr << "error: " << abort_msg << "\n";
    return code;
  }
  if (!res.success) {
    std::cerr << "warning: pattern not within tolerance after " << res.steps_used << " steps\n";
    return kExitIncomplete;
  }
  return 0;
}

int run_control(const std::string& command, const std::string& cfg_path, const std::string& tasks_path,
                const std::string& out_dir) {
  const auto cfg = config::load_config(cfg_path);
  const auto tasks = load_tasks(tasks_path);
  const Real theta0 = cfg.theta0_deg();
  ensure_dir(out_dir);
  Report rep(command, cfg, out_dir);

  const Vcm start = Vcm::identity(cfg.geometry.size());
  const CVector a0 = steering_vector(cfg.geometry, theta0);
  const CVector w_prev = optimal_weight(start, a0);
  const auto& solver = cfg.synthesis.solver;
  const auto out = solve_step(start, cfg.geometry, theta0, tasks, solver);

  const auto prev = pattern_over_grid(w_prev, theta0, cfg.synthesis.grid, cfg.geometry);
  const auto curr = pattern_over_grid(out.weight, theta0, cfg.synthesis.grid, cfg.geometry);
  json d_json = json::array();
  json achieved = json::array();
  for (const auto& t : tasks) {
    const Real lp = to_db(response_level(w_prev, t.theta_deg, theta0, cfg.geometry));
    const Real lc = to_db(response_level(out.weight, t.theta_deg, theta0, cfg.geometry));
    d_json.push_back({{"theta_deg", t.theta_deg}, {"d_db", std::isfinite(lc) ? json(std::abs(lc - lp)) : json("inf")}});
    achieved.push_back({{"theta_deg", t.theta_deg}, {"target_db", level_json(to_db(t.rho))}, {"level_db", level_json(lc)}});
  }
  std::vector<Real> no_angles;
  const auto metrics = control_metrics(prev, curr, no_angles);

  rep.body["theta0_deg"] = theta0;
  rep.body["sigma"] = sigma_json(out.angles_deg, out.sigma);
  rep.body["trace"] = step_trace_json(out, solver.kind);
  rep.body["levels"] = achieved;
  rep.body["metrics"] = {{"d_db", d_json},
                         {"j_linear", metrics.j},
                         {"gain", out.vcm.gain(out.weight, a0)},
                         {"note", "D on dB levels, J as RMS over linear levels on the output grid"}};
  rep.body["ledger"] = io::ledger_to_json(out.vcm.ledger());
  rep.write("pattern.csv", io::pattern_csv(curr));
  rep.write("weight.csv", io::weight_csv(out.weight));
  rep.write("trace.csv", trace_csv(out, solver.kind));
  rep.finish();
  if (!out.converged) {
    std::cerr << "warning: " << out.warning << "\n";
    return kExitIncomplete;
  }
  return 0;
}

int run_beamform(const std::string& command, const std::string& cfg_path, const std::string& constraints_path,
                 int snapshots, std::uint64_t seed, const std::string& out_dir) {
  const auto cfg = config::load_config(cfg_path);
  const Scenario sc = scenario_with(cfg, snapshots, seed);
  const auto side = load_tasks(constraints_path);
  ensure_dir(out_dir);
  Report rep(command, cfg, out_dir);

  const CMatrix x = generate_snapshots(sc, cfg.geometry);
  const CMatrix r_hat = sample_covariance(x);
  const Real sigma_hat = estimate_noise_power(r_hat, cfg.noise_subspace_split());
  const auto spec = ConstraintSpec::from_levels(sc.theta0_deg, side);
  const auto res = qcmv(r_hat, sigma_hat, spec, cfg.geometry, cfg.qcmv);
  const CVector w_lcmv = lcmv(r_hat, spec, cfg.geometry);
  const CMatrix r_true = true_covariance(sc, cfg.geometry);
  const CVector a0 = steering_vector(cfg.geometry, sc.theta0_deg);
  const CVector w_opt = Eigen::LLT<CMatrix>(r_true).solve(a0);

  json levels = json::array();
  for (const auto& t : side) {
    levels.push_back({{"theta_deg", t.theta_deg},
                      {"target_db", level_json(to_db(t.rho))},
                      {"qcmv_db", level_json(to_db(response_level(res.weight, t.theta_deg, sc.theta0_deg, cfg.geometry)))},
                      {"lcmv_db", level_json(to_db(response_level(w_lcmv, t.theta_deg, sc.theta0_deg, cfg.geometry)))}});
  }
  rep.body["snapshots"] = sc.snapshot_count;
  rep.body["seed"] = sc.seed;
  rep.body["sigma_n2_hat"] = sigma_hat;
  rep.body["regularization"] = res.regularization;
  rep.body["delta"] = sigma_json(task_angles(side), res.inrs);
  rep.body["levels"] = levels;
  rep.body["solver"] = {{"iterations", res.solver_iterations}, {"converged", res.solver_converged}};
  if (!res.warning.empty()) rep.body["solver"]["warning"] = res.warning;
  rep.body["sinr_db"] = {{"qcmv", sinr_json(res.weight, sc, cfg.geometry)},
                         {"lcmv", sinr_json(w_lcmv, sc, cfg.geometry)},
                         {"optimal", sinr_json(w_opt, sc, cfg.geometry)}};
  rep.write("weight.csv", io::weight_csv(res.weight));
  rep.write("lcmv_weight.csv", io::weight_csv(w_lcmv));
  rep.write("pattern.csv", io::pattern_csv(pattern_over_grid(res.weight, sc.theta0_deg, cfg.synthesis.grid, cfg.geometry)));
  rep.finish();
  return res.solver_converged ? 0 : kExitIncomplete;
}

int run_quiescent(const std::string& command, const std::string& mode, const std::string& cfg_path,
                  const std::string& design_path, const std::string& out_dir, const std::string& extra_path) {
  const auto cfg = config::load_config(cfg_path);
  ensure_dir(out_dir);
  Report rep(command, cfg, out_dir);
  if (mode == "design") {
    const auto& desired = cfg.require_desired();
    const auto res = synthesize(cfg.geometry, desired, cfg.synthesis);
    QuiescentDesign design{desired.theta0_deg, res.vcm, res.weight, res.final_pattern, cfg.geometry.fingerprint()};
    io::write_file(design_path, io::design_to_json(design).dump(2) + "\n");
    rep.body["design"] = fs::path(design_path).filename().string();
    rep.body["steps_used"] = res.steps_used;
    rep.body["success"] = res.success;
    rep.body["worst_deviation_db"] = res.worst_peak_deviation_db;
    rep.write("pattern.csv", io::pattern_csv(res.final_pattern));
    rep.write("weight.csv", io::weight_csv(res.weight));
    rep.finish();
    if (!res.success) {
      std::cerr << "warning: quiescent pattern not within tolerance\n";
      return kExitIncomplete;
    }
    return 0;
  }

  const auto design = io::design_from_json(json::parse(io::read_file(design_path)), cfg.geometry);
  const Scenario& sc = cfg.require_scenario();
  if (std::abs(sc.theta0_deg - design.theta0_deg) > 1e-12) {
    throw Error(ErrorCode::kConfig, "scenario theta0 differs from the design's beam axis");
  }
  const CMatrix r_hat = sample_covariance(generate_snapshots(sc, cfg.geometry));
  const Real sigma_hat = estimate_noise_power(r_hat, cfg.noise_subspace_split());
  std::vector<ControlTask> extra;
  if (!extra_path.empty()) extra = load_tasks(extra_path);
  const CVector w = adapt_with_constraints(design, r_hat, sigma_hat, cfg.geometry, extra, cfg.synthesis.solver);

  rep.body["sigma_n2_hat"] = sigma_hat;
  rep.body["extra_constraints"] = extra.size();
  rep.body["sinr_db"] = {{"adapted", sinr_json(w, sc, cfg.geometry)}, {"quiescent", sinr_json(design.w_q, sc, cfg.geometry)}};
  rep.write("weight.csv", io::weight_csv(w));
  rep.write("pattern.csv", io::pattern_csv(pattern_over_grid(w, design.theta0_deg, cfg.synthesis.grid, cfg.geometry)));
  rep.write("quiescent_pattern.csv",
            io::pattern_csv(pattern_over_grid(design.w_q, design.theta0_deg, cfg.synthesis.grid, cfg.geometry)));
  rep.finish();
  return 0;
}

int run_sim(const std::string& cfg_path, int snapshots, std::uint64_t seed, const std::string& out) {
  const auto cfg = config::load_config(cfg_path);
  const Scenario sc = scenario_with(cfg, snapshots, seed);
  io::write_file(out, io::snapshots_csv(generate_snapshots(sc, cfg.geometry)));
  return 0;
}

std::string join_args(int argc, char** argv) {
  std::string s = "oparc_cli";
  for (int i = 1; i < argc; ++i) s += std::string(" ") + argv[i];
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-point array response control"};
  app.require_subcommand(1);
  const std::string command = join_args(argc, argv);

  std::string cfg_path, out_dir, solver, tasks_path, constraints_path, design_path, extra_path, out_file, mode;
  bool trace = false;
  int snapshots = 0;
  std::uint64_t seed = 0;

  auto* synth = app.add_subcommand("synth", "iterative pattern synthesis");
  synth->add_option("--config", cfg_path)->required()->check(CLI::ExistingFile);
  synth->add_option("--out-dir", out_dir)->required();
  synth->add_option("--solver", solver)->check(CLI::IsMember({"iterative", "cadmm"}));
  synth->add_flag("--trace", trace, "write per-step pattern CSVs");

  auto* control = app.add_subcommand("control", "one multi-point step from the quiescent weight");
  control->add_option("--config", cfg_path)->required()->check(CLI::ExistingFile);
  control->add_option("--tasks", tasks_path)->required()->check(CLI::ExistingFile);
  control->add_option("--out-dir", out_dir)->required();

  auto* beamform = app.add_subcommand("beamform", "QCMV adaptive beamforming on simulated snapshots");
  beamform->add_option("--config", cfg_path)->required()->check(CLI::ExistingFile);
  beamform->add_option("--constraints", constraints_path)->required()->check(CLI::ExistingFile);
  beamform->add_option("--snapshots", snapshots)->required()->check(CLI::PositiveNumber);
  beamform->add_option("--seed", seed)->required();
  beamform->add_option("--out-dir", out_dir)->required();

  auto* quiescent = app.add_subcommand("quiescent", "quiescent pattern design and adaptation");
  quiescent->add_option("mode", mode)->required()->check(CLI::IsMember({"design", "adapt"}));
  quiescent->add_option("--config", cfg_path)->required()->check(CLI::ExistingFile);
  quiescent->add_option("--design", design_path)->required();
  quiescent->add_option("--out-dir", out_dir)->required();
  quiescent->add_option("--extra-constraints", extra_path)->check(CLI::ExistingFile);

  auto* sim = app.add_subcommand("sim", "write interference-plus-noise snapshots");
  sim->add_option("--config", cfg_path)->required()->check(CLI::ExistingFile);
  sim->add_option("--snapshots", snapshots)->required()->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed)->required();
  sim->add_option("--out", out_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (synth->parsed()) return run_synth(command, cfg_path, out_dir, solver, trace);
    if (control->parsed()) return run_control(command, cfg_path, tasks_path, out_dir);
    if (beamform->parsed()) return run_beamform(command, cfg_path, constraints_path, snapshots, seed, out_dir);
    if (quiescent->parsed()) {
      if (mode == "design" && !extra_path.empty()) throw Error(ErrorCode::kConfig, "--extra-constraints applies to adapt");
      return run_quiescent(command, mode, cfg_path, design_path, out_dir, extra_path);
    }
    if (sim->parsed()) return run_sim(cfg_path, snapshots, seed, out_file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool user = e.code() == ErrorCode::kConfig || e.code() == ErrorCode::kIo || e.code() == ErrorCode::kDomain ||
                      e.code() == ErrorCode::kDimension || e.code() == ErrorCode::kDegreesOfFreedom;
    return user ? kExitConfig : kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
