#pragma once

// INI-style run configuration. Sections: [array], [desired_pattern],
// [scenario], [solver]. Angles in degrees, levels in dB, powers linear.
// List values separate items with ';' and fields within an item with ':'.

#include "oparc/adaptive.hpp"
#include "oparc/io.hpp"
#include "oparc/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace oparc::config {

using boost::property_tree::ptree;

struct RunConfig {
  ArrayGeometry geometry = ArrayGeometry::ula(2, 0.5);
  std::optional<DesiredPattern> desired;
  std::optional<Scenario> scenario;
  int interference_count = -1;  // J_r for noise estimation; -1: number of interferences
  SynthesisConfig synthesis;
  QcmvOptions qcmv;
  std::uint64_t hash = 0;

  /// Beam axis: [desired_pattern] theta0, else [scenario] theta0.
  Real theta0_deg() const {
    if (desired) return desired->theta0_deg;
    if (scenario) return scenario->theta0_deg;
    throw Error(ErrorCode::kConfig, "config has no theta0");
  }

  const Scenario& require_scenario() const {
    if (!scenario) throw Error(ErrorCode::kConfig, "config has no [scenario] section");
    return *scenario;
  }

  const DesiredPattern& require_desired() const {
    if (!desired) throw Error(ErrorCode::kConfig, "config has no [desired_pattern] section");
    return *desired;
  }

  int noise_subspace_split() const {
    return interference_count >= 0 ? interference_count : static_cast<int>(require_scenario().interferences.size());
  }
};

/// Items of a list value: "a:b; c:d" -> {{a, b}, {c, d}}.
inline std::vector<std::vector<Real>> parse_tuples(const std::string& text, std::size_t arity, const std::string& key) {
  std::vector<std::vector<Real>> out;
  for (const auto& item : io::split(text, ';')) {
    if (io::trim(item).empty()) continue;
    const auto fields = io::split(item, ':');
    if (fields.size() != arity) {
      throw Error(ErrorCode::kConfig, key + ": expected " + std::to_string(arity) + " fields in '" + io::trim(item) + "'");
    }
    std::vector<Real> row;
    for (const auto& f : fields) row.push_back(io::parse_real(f));
    out.push_back(std::move(row));
  }
  return out;
}

inline std::vector<Real> parse_list(const std::string& text) {
  std::vector<Real> out;
  for (const auto& item : io::split(text, ';')) {
    if (!io::trim(item).empty()) out.push_back(io::parse_real(item));
  }
  return out;
}

template <class T>
T get_or(const ptree& section, const std::string& key, T fallback) {
  try {
    return section.get<T>(key, fallback);
  } catch (const boost::property_tree::ptree_error&) {
    throw Error(ErrorCode::kConfig, "bad value for '" + key + "'");
  }
}

inline Real get_real(const ptree& section, const std::string& key, Real fallback) {
  const auto v = section.get_optional<std::string>(key);
  return v ? io::parse_real(*v) : fallback;
}

inline Real require_real(const ptree& section, const std::string& key) {
  const auto v = section.get_optional<std::string>(key);
  if (!v) throw Error(ErrorCode::kConfig, "missing key '" + key + "'");
  return io::parse_real(*v);
}

inline ElementPattern parse_pattern(const ptree& s) {
  const auto kind = get_or<std::string>(s, "pattern", "isotropic");
  if (kind == "isotropic") return IsotropicPattern{};
  if (kind == "cosine") return CosinePowerPattern{get_real(s, "pattern_power", 1.0)};
  if (kind == "table") {
    TabulatedPattern t;
    for (const auto& row : parse_tuples(get_or<std::string>(s, "pattern_table", ""), 2, "pattern_table")) {
      t.angles_deg.push_back(row[0]);
      t.gains.push_back(row[1]);
    }
    return t;
  }
  throw Error(ErrorCode::kConfig, "unknown element pattern '" + kind + "'");
}

inline ArrayGeometry parse_array(const ptree& s) {
  const Real omega = get_real(s, "omega", kDefaultOmega);
  const Real c = get_real(s, "wave_speed", kSpeedOfLight);
  const ElementPattern pattern = parse_pattern(s);
  if (const auto pos = s.get_optional<std::string>("positions")) {
    const auto unit = get_or<std::string>(s, "position_unit", "wavelength");
    Real scale = 1.0;
    if (unit == "wavelength") {
      scale = 2.0 * kPi * c / omega;
    } else if (unit != "meter") {
      throw Error(ErrorCode::kConfig, "position_unit must be wavelength or meter");
    }
    std::vector<Eigen::Vector3d> p;
    for (Real x : parse_list(*pos)) p.emplace_back(x * scale, 0.0, 0.0);
    return ArrayGeometry(std::move(p), {pattern}, omega, c);
  }
  const int n = get_or<int>(s, "elements", 0);
  if (n < 2) throw Error(ErrorCode::kConfig, "[array] needs elements >= 2 or a positions list");
  return ArrayGeometry::ula(n, get_real(s, "spacing_wavelengths", 0.5), pattern, omega, c);
}

inline DesiredPattern parse_desired(const ptree& s) {
  DesiredPattern d;
  d.theta0_deg = require_real(s, "theta0");
  const auto ml = parse_tuples(get_or<std::string>(s, "mainlobe", ""), 2, "mainlobe");
  if (ml.size() != 1) throw Error(ErrorCode::kConfig, "mainlobe must be 'lo:hi'");
  d.mainlobe = {ml[0][0], ml[0][1]};
  for (const auto& row : parse_tuples(get_or<std::string>(s, "sidelobes", ""), 3, "sidelobes")) {
    d.sidelobes.push_back({{row[0], row[1]}, row[2]});
  }
  for (const auto& row : parse_tuples(get_or<std::string>(s, "mainlobe_template", ""), 2, "mainlobe_template")) {
    d.mainlobe_template.push_back({row[0], row[1]});
  }
  d.validate();
  return d;
}

inline Scenario parse_scenario(const ptree& s, int& interference_count) {
  Scenario sc;
  sc.theta0_deg = require_real(s, "theta0");
  check_angle(sc.theta0_deg);
  sc.sigma_s2 = get_real(s, "sigma_s2", 10.0);
  sc.sigma_n2 = get_real(s, "sigma_n2", 1.0);
  if (!(sc.sigma_s2 > 0.0) || !(sc.sigma_n2 > 0.0)) throw Error(ErrorCode::kConfig, "powers must be positive");
  for (const auto& row : parse_tuples(get_or<std::string>(s, "interferences", ""), 2, "interferences")) {
    check_angle(row[0]);
    if (!(row[1] > 0.0)) throw Error(ErrorCode::kConfig, "INRs must be positive");
    sc.add_interference_inr(row[0], row[1]);
  }
  sc.seed = get_or<std::uint64_t>(s, "seed", 1);
  sc.snapshot_count = get_or<int>(s, "snapshots", 1000);
  interference_count = get_or<int>(s, "interference_count", -1);
  return sc;
}

inline SolverKind parse_solver_kind(const std::string& name) {
  if (name == "iterative") return SolverKind::kIterative;
  if (name == "cadmm") return SolverKind::kCadmm;
  throw Error(ErrorCode::kConfig, "solver must be iterative or cadmm, got '" + name + "'");
}

inline void parse_solver(const ptree& s, RunConfig& cfg) {
  SynthesisConfig& syn = cfg.synthesis;
  SolverConfig& sol = syn.solver;
  sol.kind = parse_solver_kind(get_or<std::string>(s, "method", "iterative"));
  sol.iterative.beta_eps = get_real(s, "beta_eps", sol.iterative.beta_eps);
  sol.iterative.max_sweeps = get_or<int>(s, "max_sweeps", sol.iterative.max_sweeps);
  sol.cadmm.eta = get_real(s, "eta", sol.cadmm.eta);
  sol.cadmm.delta = get_real(s, "delta", sol.cadmm.delta);
  sol.cadmm.max_iter = get_or<int>(s, "max_iter", sol.cadmm.max_iter);
  syn.grid.step_deg = get_real(s, "grid_step", syn.grid.step_deg);
  syn.level_tol_db = get_real(s, "level_tol_db", syn.level_tol_db);
  syn.max_steps = get_or<int>(s, "max_steps", syn.max_steps);
  for (Real ck : parse_list(get_or<std::string>(s, "ck", ""))) syn.ck_schedule.push_back(static_cast<int>(ck));
  syn.mainlobe_deviation_db = get_real(s, "mainlobe_deviation_db", syn.mainlobe_deviation_db);
  syn.transition_deg = get_real(s, "transition_deg", syn.transition_deg);
  cfg.qcmv.regularization = get_real(s, "regularization", cfg.qcmv.regularization);
  if (!(syn.grid.step_deg > 0.0)) throw Error(ErrorCode::kConfig, "grid_step must be positive");
  if (sol.iterative.max_sweeps < 1 || sol.cadmm.max_iter < 1 || syn.max_steps < 0) {
    throw Error(ErrorCode::kConfig, "iteration limits must be positive");
  }
  if (!(sol.cadmm.eta > 0.0)) throw Error(ErrorCode::kConfig, "eta must be positive");
  cfg.qcmv.solver = sol;
}

inline RunConfig parse_config_text(const std::string& text) {
  ptree pt;
  std::istringstream is(text);
  try {
    boost::property_tree::read_ini(is, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  for (const auto& kv : pt) {
    if (kv.first != "array" && kv.first != "desired_pattern" && kv.first != "scenario" && kv.first != "solver") {
      throw Error(ErrorCode::kConfig, "unknown section [" + kv.first + "]");
    }
  }
  RunConfig cfg;
  cfg.hash = io::fnv1a(text);
  const auto array = pt.get_child_optional("array");
  if (!array) throw Error(ErrorCode::kConfig, "config needs an [array] section");
  cfg.geometry = parse_array(*array);
  if (const auto d = pt.get_child_optional("desired_pattern")) cfg.desired = parse_desired(*d);
  if (const auto s = pt.get_child_optional("scenario")) cfg.scenario = parse_scenario(*s, cfg.interference_count);
  if (const auto s = pt.get_child_optional("solver")) {
    parse_solver(*s, cfg);
  } else {
    cfg.qcmv.solver = cfg.synthesis.solver;
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) { return parse_config_text(io::read_file(path)); }

}  // namespace oparc::config
