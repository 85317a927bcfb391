#pragma once

// Text formats: pattern / weight / snapshot CSV, task CSV, and JSON records
// for VCM ledgers and quiescent designs.

#include "oparc/kernel.hpp"
#include "oparc/quiescent.hpp"

#include <json.hpp>

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace oparc::io {

using nlohmann::json;

inline std::string format_fixed6(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string format_exact(Real v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string pattern_csv(const std::vector<PatternSample>& samples) {
  std::string out = "theta_deg,level_db\n";
  for (const auto& s : samples) out += format_fixed6(s.theta_deg) + "," + format_fixed6(s.level_db) + "\n";
  return out;
}

inline std::string weight_csv(const CVector& w) {
  std::string out = "index,re,im\n";
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    out += std::to_string(i) + "," + format_exact(w(i).real()) + "," + format_exact(w(i).imag()) + "\n";
  }
  return out;
}

inline std::string snapshots_csv(const CMatrix& x) {
  std::ostringstream os;
  os << "snapshot,element,re,im\n";
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    for (Eigen::Index e = 0; e < x.rows(); ++e) {
      os << t << ',' << e << ',' << format_exact(x(e, t).real()) << ',' << format_exact(x(e, t).imag()) << '\n';
    }
  }
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline Real parse_real(const std::string& s) {
  const std::string t = trim(s);
  try {
    std::size_t used = 0;
    const Real v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfig, "not a number: '" + t + "'");
  }
}

/// CSV with header `theta_deg,level_db`. A level of `-inf` or `null` requests an exact null.
inline std::vector<ControlTask> parse_tasks_csv(const std::string& text) {
  std::vector<ControlTask> out;
  std::istringstream is(text);
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line != "theta_deg,level_db") throw Error(ErrorCode::kConfig, "task CSV header must be theta_deg,level_db");
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 2) throw Error(ErrorCode::kConfig, "task CSV rows need 2 columns: " + line);
    const std::string lvl = trim(cols[1]);
    const Real theta = parse_real(cols[0]);
    if (lvl == "null" || lvl == "-inf") {
      out.push_back({theta, 0.0});
    } else {
      out.push_back(ControlTask::from_db(theta, parse_real(lvl)));
    }
  }
  return out;
}

inline json inr_to_json(Real inr) {
  if (std::isinf(inr) && inr > 0.0) return "inf";
  return inr;
}

inline Real inr_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<Real>::infinity();
    throw Error(ErrorCode::kConfig, "bad INR value " + j.dump());
  }
  return j.get<Real>();
}

inline json ledger_to_json(const std::vector<LedgerEntry>& ledger) {
  json arr = json::array();
  for (const auto& e : ledger) arr.push_back({{"block", e.block}, {"theta_deg", e.theta_deg}, {"inr_linear", inr_to_json(e.inr)}});
  return arr;
}

inline std::vector<LedgerEntry> ledger_from_json(const json& arr) {
  std::vector<LedgerEntry> out;
  for (const auto& e : arr) {
    out.push_back({e.at("theta_deg").get<Real>(), inr_from_json(e.at("inr_linear")), e.value("block", 0)});
  }
  return out;
}

inline std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

inline std::uint64_t parse_hex64(const std::string& s) {
  try {
    return std::stoull(s, nullptr, 16);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfig, "bad fingerprint '" + s + "'");
  }
}

/// FNV-1a over raw bytes; identifies a config file in run reports.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline json design_to_json(const QuiescentDesign& d) {
  return {{"theta0_deg", d.theta0_deg},
          {"geometry_fingerprint", hex64(d.geometry_fingerprint)},
          {"ledger", ledger_to_json(d.t_q.ledger())}};
}

inline QuiescentDesign design_from_json(const json& j, const ArrayGeometry& geom) {
  return design_from_ledger(geom, j.at("theta0_deg").get<Real>(), ledger_from_json(j.at("ledger")),
                            parse_hex64(j.at("geometry_fingerprint").get<std::string>()));
}

}  // namespace oparc::io
