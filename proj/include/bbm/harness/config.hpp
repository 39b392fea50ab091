#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbm/core.hpp"

namespace bbm::harness {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"simulate", "verify", "density-table", "neveu", "extinction",
                                                 "windows"};
  return kinds;
}

struct ExperimentConfig {
  std::string kind = "simulate";
  SimParams sim;
  std::size_t replicates = 1;
  int workers = 0;  // 0: BBM_WORKERS or hardware concurrency
  std::string out_dir = "bbm_out";
  bool full_positions = false;
  bool seed_given = false;

  // neveu
  std::vector<double> y_values = {4.0, 6.0};
  // extinction and windows
  std::vector<double> x_values;
  double horizon_x2 = 50.0;  // extinction runs stop at tau x^3 + horizon_x2 x^2
  int s_points = 11;
  double s_max_fraction = 0.9;  // windows grid covers [0, s_max_fraction * t]

  // density-table
  std::vector<std::string> functions = {"g", "h"};
  double grid_from = 0.0;
  double grid_to = 10.0;
  double grid_step = 0.1;
  double s = 1.0;
  double x = 1.0;
  double L = 1.0;
  double t = 1.0;
  double r = 0.0;
  double kernel_tol = 1e-12;

  // verify
  std::vector<int> criteria;
};

namespace detail {

class Reader {
 public:
  Reader(const nlohmann::json& j, std::string source) : j_(j), source_(std::move(source)) {}

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(source_ + ": field '" + key + "': " + e.what());
    }
  }

  void check_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(source_ + ": unknown key '" + it.key() + "'");
  }

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    throw ConfigError(source_ + ": field '" + field + "': " + msg);
  }

 private:
  const nlohmann::json& j_;
  std::string source_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Parses a flat JSON object whose keys mirror ExperimentConfig / SimParams.
/// Unknown keys and ill-typed values are errors.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(source + ": top level must be a JSON object");

  ExperimentConfig cfg;
  detail::Reader r(j, source);
  r.get("kind", cfg.kind);
  if (std::find(experiment_kinds().begin(), experiment_kinds().end(), cfg.kind) == experiment_kinds().end())
    r.fail("kind", "unknown experiment kind '" + cfg.kind + "'");

  auto& sim = cfg.sim;
  r.get("x0", sim.x0);
  r.get("mu", sim.mu);
  r.get("branch_rate", sim.branch_rate);
  std::optional<double> dt;
  if (j.contains("dt_max") && j.at("dt_max").is_string()) {
    std::string v;
    r.get("dt_max", v);
    if (v != "inf") r.fail("dt_max", "expected a number or \"inf\"");
    sim.dt_max = kInf;
  } else {
    r.get("dt_max", sim.dt_max);
  }
  std::string boundary = "origin";
  double L = 0.0, x_ref = 0.0, alpha = 0.0, time_shift = 0.0;
  r.get("boundary", boundary);
  r.get("L", L);
  r.get("x_ref", x_ref);
  r.get("alpha", alpha);
  r.get("time_shift", time_shift);
  if (boundary == "origin") sim.boundary = OriginOnly{};
  else if (boundary == "strip") sim.boundary = Strip{L};
  else if (boundary == "curved") sim.boundary = Curved{x_ref > 0.0 ? x_ref : sim.x0, alpha, time_shift};
  else r.fail("boundary", "expected \"origin\", \"strip\" or \"curved\"");
  r.get("record_times", sim.record_times);
  r.get("t_end", sim.t_end);
  if (!j.contains("t_end") && !sim.record_times.empty()) sim.t_end = sim.record_times.back();
  r.get("seed", sim.seed);
  cfg.seed_given = j.contains("seed");
  r.get("max_particles", sim.max_particles);

  r.get("replicates", cfg.replicates);
  r.get("workers", cfg.workers);
  r.get("out_dir", cfg.out_dir);
  r.get("full_positions", cfg.full_positions);
  r.get("y_values", cfg.y_values);
  r.get("x_values", cfg.x_values);
  r.get("horizon_x2", cfg.horizon_x2);
  r.get("s_points", cfg.s_points);
  r.get("s_max_fraction", cfg.s_max_fraction);
  r.get("functions", cfg.functions);
  r.get("grid_from", cfg.grid_from);
  r.get("grid_to", cfg.grid_to);
  r.get("grid_step", cfg.grid_step);
  r.get("s", cfg.s);
  r.get("x", cfg.x);
  r.get("t", cfg.t);
  r.get("r", cfg.r);
  if (j.contains("L")) cfg.L = L;
  r.get("kernel_tol", cfg.kernel_tol);
  r.get("criteria", cfg.criteria);
  r.check_unknown();

  if (cfg.replicates < 1) r.fail("replicates", "must be >= 1");
  if (cfg.workers < 0) r.fail("workers", "must be >= 0");
  if (cfg.kind == "simulate") {
    try {
      validate(cfg.sim);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(source + ": " + e.what());
    }
  }
  if (cfg.kind == "density-table" && !(cfg.grid_step > 0.0 && cfg.grid_to >= cfg.grid_from))
    r.fail("grid_step", "grid must satisfy grid_step > 0 and grid_to >= grid_from");
  if (cfg.s_points < 2) r.fail("s_points", "must be >= 2");
  if (!(cfg.s_max_fraction > 0.0 && cfg.s_max_fraction < 1.0)) r.fail("s_max_fraction", "must lie in (0, 1)");
  if (cfg.horizon_x2 < 0.0) r.fail("horizon_x2", "must be >= 0");
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

}  // namespace bbm::harness
