#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bbm/analytic.hpp"
#include "bbm/core.hpp"
#include "bbm/engine.hpp"
#include "bbm/harness/parallel.hpp"
#include "bbm/stats.hpp"

namespace bbm::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  std::vector<std::pair<std::string, double>> metrics;
  double seconds = 0.0;
};

inline CriterionResult start(int id, std::string name) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  return r;
}

struct Options {
  std::uint64_t seed = 20240501;
  unsigned workers = 1;
  std::ostream* log = nullptr;  // progress notes
};

// Thresholds. Each one is fixed here and nowhere else.
namespace limits {
inline constexpr double kStderrBand = 4.0;
inline constexpr double kMaxRelativeStderr = 0.05;
inline constexpr std::size_t kStripReplicates = 200'000;
inline constexpr std::size_t kMartingaleReplicates = 200'000;
inline constexpr std::size_t kMomentReplicates = 200'000;
inline constexpr double kKernelAgreement = 1e-8;
inline constexpr double kChapmanKolmogorov = 1e-6;
inline constexpr int kInequalityDraws = 1000;
inline constexpr std::size_t kSweepSurvivors = 1000;
inline constexpr double kLogNWidth = 4.0;
inline constexpr double kChiKsAtTwelve = 0.10;
inline constexpr double kEtaKsAtTwelve = 0.12;
inline constexpr double kRightmostWidth = 3.0;
inline constexpr std::size_t kExtinctionReplicates = 500;
inline constexpr double kExtinctionOffset = 5.0;
inline constexpr std::size_t kNeveuReplicates = 10'000;
inline constexpr double kNeveuKs = 0.08;
inline constexpr double kEnvelopeLow = 0.1;
inline constexpr double kEnvelopeHigh = 10.0;
inline constexpr std::size_t kEnvelopeReplicates = 1000;
}  // namespace limits

// Simulation settings for the acceptance runs.
namespace setup {
// Two-barrier strip: the bridge correction neglects paths touching both
// walls within one substep, which needs dt_max << L^2.
inline constexpr double kStripDt = 0.01;
// The bridge correction is exact for the constant origin barrier, so
// OriginOnly runs step straight from one branch epoch to the next.
inline constexpr double kOriginDt = kInf;
// Curved boundary: linearization error is O(L'' dt^2), negligible at s <= t/2.
inline constexpr double kCurvedDt = 0.25;
// Sweep replicates above this population are censored (about 2500 times the
// predicted count at x = 12).
inline constexpr std::size_t kSweepMaxParticles = 1'000'000;
inline constexpr std::array<double, 3> kSweepX = {8.0, 10.0, 12.0};
inline constexpr std::array<double, 3> kExtinctionX = {6.0, 8.0, 10.0};
inline constexpr double kCurvedX = 10.0;
inline constexpr double kCurvedAlpha = 1.0;
inline constexpr int kEnvelopeBins = 6;
}  // namespace setup

namespace detail {

inline std::uint64_t criterion_seed(const Options& opt, int id) {
  return bbm::detail::fmix64(opt.seed + static_cast<std::uint64_t>(id) * bbm::detail::kGolden);
}

inline void note(const Options& opt, const std::string& msg) {
  if (opt.log) *opt.log << "  .. " << msg << std::endl;
}

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

inline bool within_band(const stats::Aggregate& a, double expected, double band = limits::kStderrBand) {
  return std::abs(a.mean - expected) <= band * a.stderr_;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1 and 2: strip mean laws.

struct StripMeans {
  std::array<stats::Aggregate, 3> Z;
  stats::Aggregate Y_last;
  std::array<double, 3> times;
  double L, x;
};

inline StripMeans simulate_strip_means(const Options& opt) {
  constexpr double L = 3.0, x = 1.5;
  const std::array<double, 3> times = {1.0, 2.25, 4.5};
  SimParams base;
  base.x0 = x;
  base.dt_max = setup::kStripDt;
  base.boundary = Strip{L};
  base.record_times.assign(times.begin(), times.end());
  base.t_end = times.back();
  base.seed = detail::criterion_seed(opt, 1);
  struct Row {
    std::array<double, 3> z{};
    double y = 0.0;
  };
  const auto rows = harness::parallel_map<Row>(0, limits::kStripReplicates, opt.workers, [&](std::size_t i) {
    SimParams p = base;
    p.replicate_id = i;
    const RunResult r = run(p);
    Row row;
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
      const auto st = stats::snapshot_stats(r.snapshots[k].positions, L);
      row.z[k] = st.Z.value_or(0.0);
      if (k + 1 == times.size()) row.y = st.Y;
    }
    return row;
  });
  StripMeans out{};
  out.times = times;
  out.L = L;
  out.x = x;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.z[k]);
    out.Z[k] = stats::aggregate(v);
  }
  std::vector<double> y;
  for (const auto& r : rows) y.push_back(r.y);
  out.Y_last = stats::aggregate(y);
  return out;
}

inline CriterionResult strip_mean_law(const StripMeans& m) {
  CriterionResult res = start(1, "exact strip mean law E[Z(s)] = e^{-pi^2 s/2L^2} Z(0)");
  const double Z0 = std::exp(kSqrt2 * m.x) * std::sin(kPi * m.x / m.L);
  res.passed = true;
  std::ostringstream os;
  for (std::size_t k = 0; k < 3; ++k) {
    const double expected = analytic::expected_Z_strip(m.times[k], m.L, Z0);
    const auto& a = m.Z[k];
    const bool ok = detail::within_band(a, expected) && a.stderr_ / a.mean <= limits::kMaxRelativeStderr;
    res.passed = res.passed && ok;
    os << "s=" << m.times[k] << ": mc " << detail::fmt(a.mean) << " +/- " << detail::fmt(a.stderr_, 3)
       << " vs " << detail::fmt(expected) << (ok ? "" : " [out]") << "; ";
    res.metrics.emplace_back("z_mean_s" + detail::fmt(m.times[k], 3), a.mean);
    res.metrics.emplace_back("z_expected_s" + detail::fmt(m.times[k], 3), expected);
    res.metrics.emplace_back("z_stderr_s" + detail::fmt(m.times[k], 3), a.stderr_);
  }
  res.detail = os.str();
  return res;
}

inline CriterionResult strip_Y_law(const StripMeans& m) {
  CriterionResult res = start(2, "strip Y law within (4/pi) e^{-pi^2 s/2L^2} Z(0) (1 +/- D)");
  const double Z0 = std::exp(kSqrt2 * m.x) * std::sin(kPi * m.x / m.L);
  const auto iv = analytic::expected_Y_strip(m.times[2], m.L, Z0);
  const auto& a = m.Y_last;
  const double band = limits::kStderrBand * a.stderr_;
  res.passed = a.mean >= iv.lo - band && a.mean <= iv.hi + band;
  res.detail = "mc " + detail::fmt(a.mean) + " +/- " + detail::fmt(a.stderr_, 3) + " vs [" + detail::fmt(iv.lo) +
               ", " + detail::fmt(iv.hi) + "]";
  res.metrics = {{"y_mean", a.mean}, {"y_stderr", a.stderr_}, {"y_lo", iv.lo}, {"y_hi", iv.hi}};
  return res;
}

// ---------------------------------------------------------------------------
// 3: martingale M(s) = sum X e^{sqrt2 X}.

inline CriterionResult martingale_identity(const Options& opt) {
  CriterionResult res = start(3, "martingale identity E[M(s)] = x e^{sqrt2 x}");
  constexpr double x = 1.0;
  const std::array<double, 3> times = {0.5, 1.0, 2.0};
  SimParams base;
  base.x0 = x;
  base.dt_max = setup::kOriginDt;
  base.record_times.assign(times.begin(), times.end());
  base.t_end = times.back();
  base.seed = detail::criterion_seed(opt, 3);
  const auto rows =
      harness::parallel_map<std::array<double, 3>>(0, limits::kMartingaleReplicates, opt.workers, [&](std::size_t i) {
        SimParams p = base;
        p.replicate_id = i;
        const RunResult r = run(p);
        std::array<double, 3> m{};
        for (std::size_t k = 0; k < r.snapshots.size(); ++k)
          m[k] = stats::snapshot_stats(r.snapshots[k].positions, kInf).M;
        return m;
      });
  const double expected = x * std::exp(kSqrt2 * x);
  res.passed = true;
  std::ostringstream os;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r[k]);
    const auto a = stats::aggregate(v);
    const bool ok = detail::within_band(a, expected);
    res.passed = res.passed && ok;
    os << "s=" << times[k] << ": " << detail::fmt(a.mean) << " +/- " << detail::fmt(a.stderr_, 3)
       << (ok ? "" : " [out]") << "; ";
    res.metrics.emplace_back("m_mean_s" + detail::fmt(times[k], 3), a.mean);
    res.metrics.emplace_back("m_stderr_s" + detail::fmt(times[k], 3), a.stderr_);
  }
  os << "expected " << detail::fmt(expected);
  res.detail = os.str();
  return res;
}

// ---------------------------------------------------------------------------
// 4: many-to-one and many-to-two.

inline CriterionResult moment_formulas(const Options& opt) {
  CriterionResult res = start(4, "many-to-one / many-to-two moment formulas");
  constexpr double L = 2.0, x = 1.0, s = 1.0;
  const double a = L / 4.0, b = L / 2.0;
  const analytic::RealFunction f = [a, b](double y) { return (y >= a && y <= b) ? 1.0 : 0.0; };
  const std::array<double, 2> cuts = {a, b};
  const double m1 = analytic::first_moment_functional(f, x, L, s, 1e-9, cuts);
  const double m2 = analytic::second_moment_functional(f, x, L, s, 1e-7, cuts);

  SimParams base;
  base.x0 = x;
  base.dt_max = setup::kStripDt;
  base.boundary = Strip{L};
  base.record_times = {s};
  base.t_end = s;
  base.seed = detail::criterion_seed(opt, 4);
  const auto counts = harness::parallel_map<double>(0, limits::kMomentReplicates, opt.workers, [&](std::size_t i) {
    SimParams p = base;
    p.replicate_id = i;
    const RunResult r = run(p);
    double n = 0.0;
    for (double y : r.snapshots.at(0).positions) n += f(y);
    return n;
  });
  std::vector<double> squares;
  squares.reserve(counts.size());
  for (double c : counts) squares.push_back(c * c);
  const auto first = stats::aggregate(counts);
  const auto second = stats::aggregate(squares);
  const bool ok1 = detail::within_band(first, m1);
  const bool ok2 = detail::within_band(second, m2);
  res.passed = ok1 && ok2 && (m2 - m1 * m1) >= 0.0;
  res.detail = "E[S] mc " + detail::fmt(first.mean) + " +/- " + detail::fmt(first.stderr_, 3) + " vs " +
               detail::fmt(m1) + "; E[S^2] mc " + detail::fmt(second.mean) + " +/- " +
               detail::fmt(second.stderr_, 3) + " vs " + detail::fmt(m2);
  res.metrics = {{"m1_analytic", m1}, {"m1_mc", first.mean},   {"m1_stderr", first.stderr_},
                 {"m2_analytic", m2}, {"m2_mc", second.mean}, {"m2_stderr", second.stderr_}};
  return res;
}

// ---------------------------------------------------------------------------
// 5: kernel cross-validation and inequality suite.

inline CriterionResult kernel_cross_validation(const Options& opt) {
  CriterionResult res = start(5, "kernel cross-validation, Chapman-Kolmogorov, (q4)/(q6)");
  using analytic::KernelForm;
  // spectral vs images for s/L^2 in [5e-4, 5e-3]
  double worst_rel = 0.0;
  for (double L : {1.0, 3.0, 10.0}) {
    for (double ratio : {5e-4, 1e-3, 2e-3, 5e-3}) {
      const double s = ratio * L * L;
      const double peak = 1.0 / std::sqrt(2.0 * kPi * s);
      for (int i = 1; i <= 9; ++i) {
        for (int j = 1; j <= 9; ++j) {
          const double x = L * i / 10.0, y = L * j / 10.0;
          const double spectral = analytic::q_strip(s, x, y, L, 1e-14, KernelForm::spectral);
          const double images = analytic::q_strip(s, x, y, L, 1e-14, KernelForm::images);
          const double scale = std::max({std::abs(spectral), std::abs(images),
                                         1e-3 * peak * std::exp(kSqrt2 * (x - y))});
          worst_rel = std::max(worst_rel, std::abs(spectral - images) / scale);
        }
      }
    }
  }
  const bool agree = worst_rel <= limits::kKernelAgreement;

  // Chapman-Kolmogorov on small cases
  double worst_ck = 0.0;
  for (const auto& [L, s, u, x, y] : std::vector<std::array<double, 5>>{
           {1.0, 0.05, 0.02, 0.3, 0.6}, {2.0, 0.5, 0.2, 0.5, 1.4}, {3.0, 1.0, 0.5, 1.5, 1.0}, {1.5, 0.2, 0.15, 0.2, 1.2}}) {
    const double direct = analytic::v_strip(s, x, y, L, 1e-14);
    const double composed = integrate(
        [&](double z) { return analytic::v_strip(u, x, z, L, 1e-14) * analytic::v_strip(s - u, z, y, L, 1e-14); },
        0.0, L, {.rel_tol = 1e-10, .abs_floor = 1e-15, .max_segments = 20000}, std::array{x, y});
    worst_ck = std::max(worst_ck, std::abs(composed - direct) / std::max(std::abs(direct), 1e-12));
  }
  const bool ck = worst_ck <= limits::kChapmanKolmogorov;

  // (q4) and (q6) on random draws
  std::mt19937_64 gen(detail::criterion_seed(opt, 5));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int violations = 0;
  for (int k = 0; k < limits::kInequalityDraws; ++k) {
    const double L = 0.5 + 9.5 * unit(gen);
    const double s = std::exp(std::log(1e-3) + (std::log(20.0) - std::log(1e-3)) * unit(gen));
    const double x = L * (0.01 + 0.98 * unit(gen));
    const std::array<double, 1> cut = {x};
    const auto opts = QuadOptions{.rel_tol = 1e-9, .abs_floor = 1e-15, .max_segments = 20000};
    const double mass = integrate([&](double y) { return analytic::q_strip(s, x, y, L, 1e-13); }, 0.0, L, opts, cut);
    const double tilted =
        integrate([&](double y) { return std::exp(kSqrt2 * y) * analytic::q_strip(s, x, y, L, 1e-13); }, 0.0, L,
                  opts, cut);
    const double slack = 1e-8;
    if (mass > std::exp(s) * (1.0 + slack)) ++violations;
    if (tilted > std::exp(kSqrt2 * x) * std::min(1.0, (L - x) / std::sqrt(s)) * (1.0 + slack)) ++violations;
  }
  res.passed = agree && ck && violations == 0;
  res.detail = "spectral/images max rel diff " + detail::fmt(worst_rel, 3) + ", CK max rel err " +
               detail::fmt(worst_ck, 3) + ", inequality violations " + std::to_string(violations);
  res.metrics = {{"kernel_rel_diff", worst_rel}, {"ck_rel_err", worst_ck}, {"violations", double(violations)}};
  return res;
}

// ---------------------------------------------------------------------------
// 6-9: configuration sweep at s = t/2.

struct SweepPoint {
  double x = 0.0;
  double t = 0.0;
  double s = 0.0;
  std::size_t replicates_run = 0;
  std::size_t survivors = 0;
  std::size_t truncated = 0;              // survivors censored at the population cap
  std::vector<double> log_n_offsets;      // log N - N_exponent
  std::vector<double> rightmost_offsets;  // X1 - rightmost_center
  double chi_ks = 0.0;
  double eta_ks = 0.0;
  std::vector<double> chi_ks_per_replicate;
  std::vector<double> eta_ks_per_replicate;
};

/// Runs replicates in index order until `survivors` of them have N(s) >= 1.
/// Batches run in parallel; the cut-off index does not depend on workers.
inline SweepPoint simulate_sweep_point(double x, const Options& opt, std::size_t survivors = limits::kSweepSurvivors) {
  SweepPoint pt;
  pt.x = x;
  pt.t = critical_time(x);
  pt.s = pt.t / 2.0;
  const analytic::PredictedWindows windows(x);
  SimParams base;
  base.x0 = x;
  base.dt_max = setup::kOriginDt;
  base.record_times = {pt.s};
  base.t_end = pt.s;
  base.seed = detail::criterion_seed(opt, 600 + static_cast<int>(x));
  base.max_particles = setup::kSweepMaxParticles;

  struct Outcome {
    std::vector<double> positions;
    bool truncated = false;
  };
  std::vector<std::vector<double>> kept;
  std::size_t next = 0;
  const std::size_t batch = std::max<std::size_t>(64, 16 * opt.workers);
  while (kept.size() + pt.truncated < survivors) {
    auto outcomes = harness::parallel_map<Outcome>(next, next + batch, opt.workers, [&](std::size_t i) {
      SimParams p = base;
      p.replicate_id = i;
      RunResult r = run(p);
      if (r.truncated) return Outcome{{}, true};
      return Outcome{std::move(r.snapshots.at(0).positions), false};
    });
    for (auto& o : outcomes) {
      ++pt.replicates_run;
      if (o.truncated) ++pt.truncated;
      else if (!o.positions.empty()) kept.push_back(std::move(o.positions));
      if (kept.size() + pt.truncated == survivors) break;
    }
    next += batch;
  }
  pt.survivors = kept.size() + pt.truncated;
  const double Ls = windows.boundary(pt.s);
  // censored replicates sit above every simulated one
  for (std::size_t k = 0; k < pt.truncated; ++k) {
    pt.log_n_offsets.push_back(kInf);
    pt.rightmost_offsets.push_back(kInf);
  }
  for (const auto& c : kept) {
    const auto st = stats::snapshot_stats(c, kInf);
    pt.log_n_offsets.push_back(std::log(static_cast<double>(st.N)) - windows.N_exponent(pt.s));
    pt.rightmost_offsets.push_back(*st.X1 - windows.rightmost_center(pt.s));
    pt.chi_ks_per_replicate.push_back(stats::ks_distance(stats::chi_measure(c), analytic::g_cdf));
    pt.eta_ks_per_replicate.push_back(stats::ks_distance(stats::eta_measure(c, Ls), analytic::h_cdf));
  }
  pt.chi_ks = stats::ks_distance(stats::pooled_chi(kept), analytic::g_cdf);
  pt.eta_ks = stats::ks_distance(stats::pooled_eta(kept, Ls), analytic::h_cdf);
  return pt;
}

inline CriterionResult particle_count_trend(const std::vector<SweepPoint>& sweep) {
  CriterionResult res = start(6, "particle count log N(s) - [sqrt2 (1-s/t)^{1/3} x - 3 log x] bounded");
  double lo = kInf, hi = -kInf;
  std::ostringstream os;
  for (const auto& pt : sweep) {
    const double med = stats::median(pt.log_n_offsets);
    lo = std::min(lo, med);
    hi = std::max(hi, med);
    os << "x=" << pt.x << ": median " << detail::fmt(med, 4) << " (" << pt.survivors << "/" << pt.replicates_run
       << " surviving, " << pt.truncated << " censored at cap); ";
    res.metrics.emplace_back("median_logN_offset_x" + detail::fmt(pt.x, 3), med);
  }
  res.passed = hi - lo <= limits::kLogNWidth;
  os << "spread " << detail::fmt(hi - lo, 4);
  res.detail = os.str();
  return res;
}

inline CriterionResult chi_convergence(const std::vector<SweepPoint>& sweep) {
  CriterionResult res = start(7, "chi(u) => 2y e^{-sqrt2 y}");
  bool monotone = true;
  std::ostringstream os;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    if (k > 0 && sweep[k].chi_ks > sweep[k - 1].chi_ks) monotone = false;
    os << "x=" << sweep[k].x << ": KS " << detail::fmt(sweep[k].chi_ks, 4) << " (per-replicate median "
       << detail::fmt(stats::median(sweep[k].chi_ks_per_replicate), 3) << "); ";
    res.metrics.emplace_back("chi_ks_x" + detail::fmt(sweep[k].x, 3), sweep[k].chi_ks);
  }
  res.passed = monotone && sweep.back().chi_ks <= limits::kChiKsAtTwelve;
  res.detail = os.str() + (monotone ? "monotone" : "NOT monotone");
  return res;
}

inline CriterionResult eta_convergence(const std::vector<SweepPoint>& sweep) {
  CriterionResult res = start(8, "eta(u) => (pi/2) sin(pi z)");
  bool monotone = true;
  std::ostringstream os;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    if (k > 0 && sweep[k].eta_ks > sweep[k - 1].eta_ks) monotone = false;
    os << "x=" << sweep[k].x << ": KS " << detail::fmt(sweep[k].eta_ks, 4) << " (per-replicate median "
       << detail::fmt(stats::median(sweep[k].eta_ks_per_replicate), 3) << "); ";
    res.metrics.emplace_back("eta_ks_x" + detail::fmt(sweep[k].x, 3), sweep[k].eta_ks);
  }
  res.passed = monotone && sweep.back().eta_ks <= limits::kEtaKsAtTwelve;
  res.detail = os.str() + (monotone ? "monotone" : "NOT monotone");
  return res;
}

inline CriterionResult rightmost_window(const std::vector<SweepPoint>& sweep) {
  CriterionResult res = start(9, "right-most particle X1(s) - [L(s) - (3/sqrt2) log x] bounded");
  double lo = kInf, hi = -kInf;
  std::ostringstream os;
  for (const auto& pt : sweep) {
    const double med = stats::median(pt.rightmost_offsets);
    lo = std::min(lo, med);
    hi = std::max(hi, med);
    os << "x=" << pt.x << ": median " << detail::fmt(med, 4) << "; ";
    res.metrics.emplace_back("median_X1_offset_x" + detail::fmt(pt.x, 3), med);
  }
  res.passed = hi - lo <= limits::kRightmostWidth;
  os << "spread " << detail::fmt(hi - lo, 4);
  res.detail = os.str();
  return res;
}

// ---------------------------------------------------------------------------
// 10: extinction window.

inline stats::ExtinctionSummary simulate_extinction(double x, std::size_t replicates, const Options& opt,
                                                    std::uint64_t seed) {
  SimParams base;
  base.x0 = x;
  base.dt_max = setup::kOriginDt;
  base.t_end = critical_time(x) + 50.0 * x * x;
  base.seed = seed;
  const auto times = harness::parallel_map<double>(0, replicates, opt.workers, [&](std::size_t i) {
    SimParams p = base;
    p.replicate_id = i;
    const RunResult r = run(p);
    if (r.truncated) throw std::runtime_error("extinction replicate hit max_particles");
    return r.extinction_time.value_or(kInf);
  });
  std::vector<double> finite;
  std::size_t censored = 0;
  for (double t : times) {
    if (std::isfinite(t)) finite.push_back(t);
    else ++censored;
  }
  return stats::summarize_extinction_times(finite, censored, x);
}

inline CriterionResult extinction_window(const Options& opt) {
  CriterionResult res = start(10, "extinction time within t +/- beta x^2");
  res.passed = true;
  std::ostringstream os;
  for (double x : setup::kExtinctionX) {
    const auto summary = simulate_extinction(x, limits::kExtinctionReplicates, opt,
                                             detail::criterion_seed(opt, 1000 + static_cast<int>(x)));
    const bool ok = std::isfinite(summary.normalized) && std::abs(summary.normalized) <= limits::kExtinctionOffset;
    res.passed = res.passed && ok;
    os << "x=" << x << ": median T " << detail::fmt(summary.median_T, 5) << " vs t " << detail::fmt(critical_time(x), 5)
       << ", normalized " << detail::fmt(summary.normalized, 4) << "; ";
    res.metrics.emplace_back("normalized_x" + detail::fmt(x, 3), summary.normalized);
  }
  res.detail = os.str();
  return res;
}

// ---------------------------------------------------------------------------
// 11: Neveu's K(y).

inline std::vector<double> neveu_statistics(double x, double y, std::size_t replicates, const Options& opt,
                                            std::uint64_t seed) {
  const double scale = y * std::exp(-kSqrt2 * y);
  return harness::parallel_map<double>(0, replicates, opt.workers, [&](std::size_t i) {
    const auto k = neveu_count(x, y, seed, i);
    if (k.truncated) throw std::runtime_error("neveu replicate hit max_particles");
    return scale * static_cast<double>(k.count);
  });
}

inline CriterionResult neveu_stabilization(const Options& opt) {
  CriterionResult res = start(11, "Neveu statistic y e^{-sqrt2 y} K(y) stabilizes");
  constexpr double x = 12.0;
  const auto w4 = neveu_statistics(x, 4.0, limits::kNeveuReplicates, opt, detail::criterion_seed(opt, 1104));
  const auto w6 = neveu_statistics(x, 6.0, limits::kNeveuReplicates, opt, detail::criterion_seed(opt, 1106));
  const double d = stats::ks_distance(stats::unweighted(w4), stats::unweighted(w6));
  res.passed = d <= limits::kNeveuKs;
  res.detail = "KS(y=4, y=6) = " + detail::fmt(d, 4) + "; medians " + detail::fmt(stats::median(w4), 4) + ", " +
               detail::fmt(stats::median(w6), 4);
  res.metrics = {{"ks", d}, {"median_y4", stats::median(w4)}, {"median_y6", stats::median(w6)}};
  return res;
}

// ---------------------------------------------------------------------------
// 12: curved-boundary density envelope.

inline CriterionResult curved_envelope(const Options& opt) {
  CriterionResult res = start(12, "curved-boundary density within constant multiples of psi_s");
  const Curved curve{setup::kCurvedX, setup::kCurvedAlpha, 0.0};
  const double t = curve.t_alpha();
  const double s = t / 2.0;
  const double Ls = boundary_at(curve, s);
  SimParams base;
  base.x0 = setup::kCurvedX;
  base.dt_max = setup::kCurvedDt;
  base.boundary = curve;
  base.record_times = {s};
  base.t_end = s;
  base.seed = detail::criterion_seed(opt, 12);
  constexpr int bins = setup::kEnvelopeBins;
  // mid-domain: [0.2, 0.8] L(s)
  const double lo = 0.2 * Ls, hi = 0.8 * Ls, width = (hi - lo) / bins;
  const auto counts = harness::parallel_map<std::array<double, bins>>(
      0, limits::kEnvelopeReplicates, opt.workers, [&](std::size_t i) {
        SimParams p = base;
        p.replicate_id = i;
        const RunResult r = run(p);
        if (r.truncated) throw std::runtime_error("envelope replicate hit max_particles");
        std::array<double, bins> c{};
        for (double y : r.snapshots.at(0).positions) {
          const int b = static_cast<int>(std::floor((y - lo) / width));
          if (y >= lo && b >= 0 && b < bins) c[b] += 1.0;
        }
        return c;
      });
  res.passed = true;
  std::ostringstream os;
  for (int b = 0; b < bins; ++b) {
    std::vector<double> v;
    v.reserve(counts.size());
    for (const auto& c : counts) v.push_back(c[b] / width);
    const auto a = stats::aggregate(v);
    const double y0 = lo + b * width, y1 = y0 + width;
    const double envelope =
        integrate([&](double y) { return analytic::psi_curved(s, setup::kCurvedX, y, t); }, y0, y1) / width;
    const double ratio = a.mean / envelope;
    const bool ok = ratio >= limits::kEnvelopeLow && ratio <= limits::kEnvelopeHigh;
    res.passed = res.passed && ok;
    os << "[" << detail::fmt(y0, 3) << "," << detail::fmt(y1, 3) << "): " << detail::fmt(ratio, 4)
       << (ok ? "" : " [out]") << "; ";
    res.metrics.emplace_back("ratio_bin" + std::to_string(b), ratio);
  }
  res.detail = "density/psi " + os.str();
  return res;
}

// ---------------------------------------------------------------------------

inline constexpr int kCriteriaCount = 12;

/// Runs the criteria whose ids are listed (all when empty), in id order,
/// reporting each result through `report` as soon as it is known.
inline std::vector<CriterionResult> run_suite(const Options& opt, std::vector<int> ids = {},
                                              const std::function<void(const CriterionResult&)>& report = {}) {
  if (ids.empty())
    for (int i = 1; i <= kCriteriaCount; ++i) ids.push_back(i);
  std::sort(ids.begin(), ids.end());
  auto wanted = [&ids](int id) { return std::binary_search(ids.begin(), ids.end(), id); };
  std::vector<CriterionResult> out;
  auto timed = [&](auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<CriterionResult> rs = body();
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (auto& r : rs) {
      r.seconds = secs / static_cast<double>(rs.size());
      if (report) report(r);
      out.push_back(std::move(r));
    }
  };
  if (wanted(1) || wanted(2)) {
    timed([&] {
      detail::note(opt, "strip runs (criteria 1-2)");
      const auto m = simulate_strip_means(opt);
      std::vector<CriterionResult> rs;
      if (wanted(1)) rs.push_back(strip_mean_law(m));
      if (wanted(2)) rs.push_back(strip_Y_law(m));
      return rs;
    });
  }
  if (wanted(3)) timed([&] { return std::vector{martingale_identity(opt)}; });
  if (wanted(4)) timed([&] { return std::vector{moment_formulas(opt)}; });
  if (wanted(5)) timed([&] { return std::vector{kernel_cross_validation(opt)}; });
  if (wanted(6) || wanted(7) || wanted(8) || wanted(9)) {
    timed([&] {
      std::vector<SweepPoint> sweep;
      for (double x : setup::kSweepX) {
        detail::note(opt, "configuration sweep x=" + detail::fmt(x, 3));
        sweep.push_back(simulate_sweep_point(x, opt));
      }
      std::vector<CriterionResult> rs;
      if (wanted(6)) rs.push_back(particle_count_trend(sweep));
      if (wanted(7)) rs.push_back(chi_convergence(sweep));
      if (wanted(8)) rs.push_back(eta_convergence(sweep));
      if (wanted(9)) rs.push_back(rightmost_window(sweep));
      return rs;
    });
  }
  if (wanted(10)) timed([&] { return std::vector{extinction_window(opt)}; });
  if (wanted(11)) timed([&] { return std::vector{neveu_stabilization(opt)}; });
  if (wanted(12)) timed([&] { return std::vector{curved_envelope(opt)}; });
  return out;
}

inline std::string format_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS" : "FAIL") << "  [" << std::setw(2) << r.id << "] " << r.name << " :: " << r.detail
     << "  (" << std::fixed << std::setprecision(1) << r.seconds << " s)";
  return os.str();
}

}  // namespace bbm::acceptance
