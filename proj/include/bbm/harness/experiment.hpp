#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbm/analytic.hpp"
#include "bbm/core.hpp"
#include "bbm/engine.hpp"
#include "bbm/harness/acceptance.hpp"
#include "bbm/harness/config.hpp"
#include "bbm/harness/io.hpp"
#include "bbm/harness/parallel.hpp"
#include "bbm/stats.hpp"

namespace bbm::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitAcceptanceFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

struct ExperimentOutcome {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> files;
};

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline std::string num(const std::optional<double>& v) { return v ? num(*v) : ""; }

/// Collects output files and renames all of them into place together.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    created_ = std::filesystem::create_directories(dir_, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir_.string() + ": " + ec.message());
  }
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    if (committed_) return;
    files_.clear();
    std::error_code ec;
    if (created_ && std::filesystem::is_empty(dir_, ec)) std::filesystem::remove(dir_, ec);
  }

  std::ofstream& open(const std::string& name) {
    files_.push_back(std::make_unique<AtomicFile>(dir_ / name));
    paths_.push_back(dir_ / name);
    return files_.back()->stream();
  }

  std::vector<std::filesystem::path> commit() {
    for (auto& f : files_) f->commit();
    committed_ = true;
    return paths_;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::unique_ptr<AtomicFile>> files_;
  std::vector<std::filesystem::path> paths_;
  bool created_ = false;
  bool committed_ = false;
};

inline void log(std::ostream* os, const std::string& msg) {
  if (os) *os << msg << '\n';
}

inline std::vector<double> grid(double from, double to, double step) {
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = from + static_cast<double>(i) * step;
  return out;
}

inline void write_aggregate(std::ostream& os, const stats::Aggregate& a) {
  os << ',' << num(a.mean) << ',' << num(a.stderr_);
}

// ---------------------------------------------------------------------------

inline void simulate(const ExperimentConfig& cfg, unsigned workers, OutputSet& out, std::ostream* logger) {
  log(logger, "simulate: " + std::to_string(cfg.replicates) + " replicate(s) on " + std::to_string(workers) +
                  " worker(s)");
  const auto results = parallel_map<RunResult>(0, cfg.replicates, workers, [&](std::size_t i) {
    SimParams p = cfg.sim;
    p.replicate_id = i;
    return run(p);
  });

  auto& snaps = out.open("snapshots.jsonl");
  auto& runs = out.open("runs.jsonl");
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    for (const auto& snap : r.snapshots)
      snaps << SnapshotRecord::from(i, snap, cfg.sim.boundary, cfg.full_positions).to_json().dump() << '\n';
    nlohmann::json j = {{"schema", kRunSchema},         {"replicate", i},
                        {"extinction_time", optional_number(r.extinction_time)},
                        {"truncated", r.truncated},     {"origin_kills", r.origin_kills},
                        {"right_kills", r.right_kills}};
    runs << j.dump() << '\n';
  }

  auto& csv = out.open("summary.csv");
  csv << "time,replicates,alive,n_mean,n_stderr,y_mean,y_stderr,z_mean,z_stderr,m_mean,m_stderr,x1_mean,x1_stderr\n";
  for (std::size_t k = 0; k < cfg.sim.record_times.size(); ++k) {
    std::vector<double> n, y, z, m, x1;
    for (const auto& r : results) {
      if (k >= r.snapshots.size()) continue;  // truncated before this record time
      const auto st = stats::snapshot_stats(r.snapshots[k], cfg.sim.boundary);
      n.push_back(static_cast<double>(st.N));
      y.push_back(st.Y);
      if (st.Z) z.push_back(*st.Z);
      m.push_back(st.M);
      if (st.X1) x1.push_back(*st.X1);
    }
    csv << num(cfg.sim.record_times[k]) << ',' << n.size() << ',' << x1.size();
    write_aggregate(csv, stats::aggregate(n));
    write_aggregate(csv, stats::aggregate(y));
    if (z.empty()) csv << ",,";
    else write_aggregate(csv, stats::aggregate(z));
    write_aggregate(csv, stats::aggregate(m));
    if (x1.empty()) csv << ",,";
    else write_aggregate(csv, stats::aggregate(x1));
    csv << '\n';
  }
}

inline void neveu(const ExperimentConfig& cfg, unsigned workers, OutputSet& out, std::ostream* logger) {
  const double x = cfg.sim.x0;
  auto& records = out.open("neveu.jsonl");
  auto& csv = out.open("summary.csv");
  csv << "x,y,replicates,truncated,mean,stderr,q25,median,q75\n";
  for (double y : cfg.y_values) {
    if (!(y > 0.0 && y < x)) throw ConfigError("y_values: every y must satisfy 0 < y < x0");
    log(logger, "neveu: y=" + num(y));
    const auto counts = parallel_map<NeveuCount>(0, cfg.replicates, workers, [&](std::size_t i) {
      return neveu_count(x, y, cfg.sim.seed, i, cfg.sim.max_particles);
    });
    const double scale = y * std::exp(-kSqrt2 * y);
    std::vector<double> values;
    std::size_t truncated = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double v = scale * static_cast<double>(counts[i].count);
      values.push_back(v);
      truncated += counts[i].truncated ? 1 : 0;
      nlohmann::json j = {{"schema", kNeveuSchema}, {"x", x},
                          {"y", y},                 {"replicate", i},
                          {"count", counts[i].count}, {"statistic", v},
                          {"truncated", counts[i].truncated}};
      records << j.dump() << '\n';
    }
    const auto agg = stats::aggregate(values);
    csv << num(x) << ',' << num(y) << ',' << values.size() << ',' << truncated << ',' << num(agg.mean) << ','
        << num(agg.stderr_) << ',' << num(stats::quantile(values, 0.25)) << ',' << num(stats::median(values)) << ','
        << num(stats::quantile(values, 0.75)) << '\n';
  }
}

inline void extinction(const ExperimentConfig& cfg, unsigned workers, OutputSet& out, std::ostream* logger) {
  const std::vector<double> xs = cfg.x_values.empty() ? std::vector<double>{cfg.sim.x0} : cfg.x_values;
  auto& records = out.open("extinction.jsonl");
  auto& csv = out.open("summary.csv");
  csv << "x,t,replicates,censored,truncated,median_T,normalized\n";
  for (double x : xs) {
    if (!(x > 0.0)) throw ConfigError("x_values: every x must be > 0");
    log(logger, "extinction: x=" + num(x));
    SimParams base = cfg.sim;
    base.x0 = x;
    base.boundary = OriginOnly{};
    base.record_times.clear();
    base.t_end = critical_time(x) + cfg.horizon_x2 * x * x;
    const auto results = parallel_map<RunResult>(0, cfg.replicates, workers, [&](std::size_t i) {
      SimParams p = base;
      p.replicate_id = i;
      return run(p);
    });
    std::size_t truncated = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
      truncated += results[i].truncated ? 1 : 0;
      nlohmann::json j = {{"schema", kExtinctionSchema},
                          {"x", x},
                          {"replicate", i},
                          {"extinction_time", optional_number(results[i].extinction_time)},
                          {"truncated", results[i].truncated}};
      records << j.dump() << '\n';
    }
    const auto summary = stats::extinction_summary(results, x);
    csv << num(x) << ',' << num(critical_time(x)) << ',' << summary.replicates << ',' << summary.censored << ','
        << truncated << ',' << num(summary.median_T) << ',' << num(summary.normalized) << '\n';
  }
}

inline void write_windows(std::ostream& csv, double x, const std::vector<double>& s_values) {
  const auto w = analytic::predicted_windows(x);
  for (double s : s_values)
    csv << num(x) << ',' << num(w.t()) << ',' << num(s) << ',' << num(w.boundary(s)) << ','
        << num(w.N_exponent(s)) << ',' << num(w.rightmost_center(s)) << ',' << num(w.heuristic_L_ode_solution(s))
        << '\n';
}

inline void windows(const ExperimentConfig& cfg, OutputSet& out) {
  const std::vector<double> xs = cfg.x_values.empty() ? std::vector<double>{cfg.sim.x0} : cfg.x_values;
  auto& csv = out.open("windows.csv");
  csv << "x,t,s,boundary,N_exponent,rightmost_center,ode_L\n";
  for (double x : xs) {
    if (!(x > 0.0)) throw ConfigError("x_values: every x must be > 0");
    const double t = critical_time(x);
    std::vector<double> s_values;
    for (int i = 0; i < cfg.s_points; ++i) s_values.push_back(cfg.s_max_fraction * t * i / (cfg.s_points - 1));
    write_windows(csv, x, s_values);
  }
}

inline void density_table(const ExperimentConfig& cfg, OutputSet& out) {
  const auto pts = grid(cfg.grid_from, cfg.grid_to, cfg.grid_step);
  for (const auto& fn : cfg.functions) {
    std::map<std::string, std::pair<std::string, std::function<std::string(double)>>> table = {
        {"p_strip", {"y,value", [&](double y) { return num(analytic::p_strip(cfg.s, cfg.x, y, cfg.L)); }}},
        {"q_strip",
         {"y,value", [&](double y) { return num(analytic::q_strip(cfg.s, cfg.x, y, cfg.L, cfg.kernel_tol)); }}},
        {"g", {"y,value,cdf", [](double y) { return num(analytic::g_density(y)) + ',' + num(analytic::g_cdf(y)); }}},
        {"h", {"z,value,cdf", [](double z) { return num(analytic::h_density(z)) + ',' + num(analytic::h_cdf(z)); }}},
        {"psi", {"y,value", [&](double y) { return num(analytic::psi_curved(cfg.s, cfg.x, y, cfg.t)); }}},
        {"G_factor", {"s,value", [&](double s) { return num(analytic::G_factor(cfg.t, cfg.r, s)); }}},
    };
    if (fn == "predicted_windows") {
      auto& csv = out.open("density_predicted_windows.csv");
      csv << "x,t,s,boundary,N_exponent,rightmost_center,ode_L\n";
      write_windows(csv, cfg.x, pts);
      continue;
    }
    const auto it = table.find(fn);
    if (it == table.end())
      throw ConfigError("functions: unknown function '" + fn +
                        "' (expected p_strip, q_strip, g, h, psi, G_factor or predicted_windows)");
    auto& csv = out.open("density_" + fn + ".csv");
    csv << it->second.first << '\n';
    for (double v : pts) {
      std::string row;
      try {
        row = it->second.second(v);
      } catch (const std::domain_error& e) {
        throw ConfigError("density-table " + fn + " at grid point " + num(v) + ": " + e.what());
      }
      csv << num(v) << ',' << row << '\n';
    }
  }
}

inline bool verify(const ExperimentConfig& cfg, unsigned workers, OutputSet& out, std::ostream* logger,
                   std::ostream* report) {
  acceptance::Options opt;
  if (cfg.seed_given) opt.seed = cfg.sim.seed;
  opt.workers = workers;
  opt.log = logger;
  for (int id : cfg.criteria)
    if (id < 1 || id > acceptance::kCriteriaCount) throw ConfigError("criteria: unknown criterion " + std::to_string(id));
  auto& records = out.open("acceptance.jsonl");
  bool all = true;
  acceptance::run_suite(opt, cfg.criteria, [&](const acceptance::CriterionResult& r) {
    if (report) *report << acceptance::format_line(r) << std::endl;
    all = all && r.passed;
    nlohmann::json metrics = nlohmann::json::object();
    for (const auto& [k, v] : r.metrics) metrics[k] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    nlohmann::json j = {{"schema", kAcceptanceSchema}, {"id", r.id},         {"name", r.name},
                        {"passed", r.passed},          {"detail", r.detail}, {"metrics", metrics}};
    records << j.dump() << '\n';
  });
  return all;
}

}  // namespace detail

/// Runs one experiment and writes its artifacts into cfg.out_dir. Files
/// appear only if the whole experiment completes.
/// Throws ConfigError for invalid settings.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, std::ostream* logger = nullptr,
                                        std::ostream* report = &std::cout) {
  if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
  if (cfg.kind == "simulate") {
    try {
      validate(cfg.sim);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  const unsigned workers = resolve_workers(cfg.workers);
  detail::OutputSet out(cfg.out_dir);
  ExperimentOutcome outcome;
  if (cfg.kind == "simulate") detail::simulate(cfg, workers, out, logger);
  else if (cfg.kind == "neveu") detail::neveu(cfg, workers, out, logger);
  else if (cfg.kind == "extinction") detail::extinction(cfg, workers, out, logger);
  else if (cfg.kind == "windows") detail::windows(cfg, out);
  else if (cfg.kind == "density-table") detail::density_table(cfg, out);
  else if (cfg.kind == "verify") {
    if (!detail::verify(cfg, workers, out, logger, report)) outcome.exit_code = kExitAcceptanceFailure;
  } else throw ConfigError("unknown experiment kind '" + cfg.kind + "'");
  outcome.files = out.commit();
  return outcome;
}

}  // namespace bbm::harness
