#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bbm/core.hpp"
#include "bbm/numeric.hpp"

namespace bbm::stats {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct SnapshotStats {
  std::size_t N = 0;
  double Y = 0.0;               // sum e^{sqrt2 X}
  std::optional<double> Z;      // sum e^{sqrt2 X} sin(pi X / L) 1{X <= L}; empty without a finite L
  double M = 0.0;               // sum X e^{sqrt2 X}
  std::optional<double> X1;     // right-most position
  double L = kInf;              // boundary used for Z
};

/// Functionals of one configuration with Z taken against the level L.
inline SnapshotStats snapshot_stats(std::span<const double> positions, double L) {
  SnapshotStats out;
  out.N = positions.size();
  out.L = L;
  KahanSum y, z, m;
  for (double x : positions) {
    const double w = std::exp(kSqrt2 * x);
    y += w;
    m += x * w;
    if (std::isfinite(L) && x <= L) z += w * std::max(0.0, std::sin(kPi * x / L));
    if (!out.X1 || x > *out.X1) out.X1 = x;
  }
  out.Y = y.value();
  out.M = m.value();
  if (std::isfinite(L) && L > 0.0) out.Z = z.value();
  return out;
}

/// As above, with L read off the run's boundary at the snapshot time.
/// OriginOnly has no finite level, so Z is left empty.
inline SnapshotStats snapshot_stats(const Snapshot& snap, const BoundarySpec& spec) {
  double L = kInf;
  if (!std::holds_alternative<OriginOnly>(spec)) L = killing_level(spec, snap.time);
  return snapshot_stats(snap.positions, L);
}

// ---------------------------------------------------------------------------
// Weighted empirical measures.

struct WeightedSample {
  std::vector<std::pair<double, double>> points;  // (location, weight >= 0)
  double total_weight = 0.0;

  void add(double location, double weight) {
    if (!(weight >= 0.0)) throw std::invalid_argument("WeightedSample weights must be >= 0");
    points.emplace_back(location, weight);
    total_weight += weight;
  }

  void append(const WeightedSample& other) {
    points.insert(points.end(), other.points.begin(), other.points.end());
    total_weight += other.total_weight;
  }

  [[nodiscard]] bool empty() const noexcept { return points.empty(); }
};

/// chi: mass 1/N at each particle.
inline WeightedSample chi_measure(std::span<const double> positions) {
  if (positions.empty()) throw std::invalid_argument("chi_measure: no surviving particles");
  WeightedSample out;
  out.points.reserve(positions.size());
  const double w = 1.0 / static_cast<double>(positions.size());
  for (double x : positions) out.points.emplace_back(x, w);
  out.total_weight = 1.0;
  return out;
}

/// eta: mass e^{sqrt2 X}/Y at X / L_s.
inline WeightedSample eta_measure(std::span<const double> positions, double L_s) {
  if (positions.empty()) throw std::invalid_argument("eta_measure: no surviving particles");
  if (!(L_s > 0.0)) throw std::invalid_argument("eta_measure: L_s must be > 0");
  WeightedSample out;
  out.points.reserve(positions.size());
  const double shift = *std::max_element(positions.begin(), positions.end());
  KahanSum total;
  for (double x : positions) total += std::exp(kSqrt2 * (x - shift));
  for (double x : positions) out.points.emplace_back(x / L_s, std::exp(kSqrt2 * (x - shift)) / total.value());
  out.total_weight = 1.0;
  return out;
}

/// Pooled chi over replicates: each replicate weighted by its N, i.e. every
/// particle of every replicate carries unit mass.
inline WeightedSample pooled_chi(std::span<const std::vector<double>> configurations) {
  WeightedSample out;
  for (const auto& conf : configurations)
    for (double x : conf) out.points.emplace_back(x, 1.0);
  out.total_weight = static_cast<double>(out.points.size());
  return out;
}

/// Pooled eta: each replicate weighted by its Y, i.e. raw weights e^{sqrt2 X}
/// at X / L_s. Weights are scaled by a common factor to stay finite.
inline WeightedSample pooled_eta(std::span<const std::vector<double>> configurations, double L_s) {
  double top = -kInf;
  for (const auto& conf : configurations)
    for (double x : conf) top = std::max(top, x);
  WeightedSample out;
  KahanSum total;
  for (const auto& conf : configurations)
    for (double x : conf) {
      const double w = std::exp(kSqrt2 * (x - top));
      out.points.emplace_back(x / L_s, w);
      total += w;
    }
  out.total_weight = total.value();
  return out;
}

namespace detail {

// Sorted (location, normalized cumulative weight after location) pairs with
// ties merged.
inline std::vector<std::pair<double, double>> cumulative(const WeightedSample& sample) {
  std::vector<std::pair<double, double>> pts = sample.points;
  std::sort(pts.begin(), pts.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(pts.size());
  KahanSum cum;
  double total = 0.0;
  for (const auto& p : pts) total += p.second;
  if (!(total > 0.0)) throw std::invalid_argument("weighted sample has zero total weight");
  for (std::size_t i = 0; i < pts.size();) {
    const double loc = pts[i].first;
    while (i < pts.size() && pts[i].first == loc) cum += pts[i++].second;
    out.emplace_back(loc, std::min(1.0, cum.value() / total));
  }
  if (!out.empty()) out.back().second = 1.0;
  return out;
}

}  // namespace detail

/// sup_x |F_sample(x) - cdf(x)| for a continuous reference cdf, checking
/// both one-sided limits of the empirical CDF at every jump.
inline double ks_distance(const WeightedSample& sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_distance: empty sample");
  const auto cum = detail::cumulative(sample);
  double worst = 0.0, before = 0.0;
  for (const auto& [loc, after] : cum) {
    const double F = cdf(loc);
    worst = std::max({worst, std::abs(F - before), std::abs(F - after)});
    before = after;
  }
  return std::clamp(worst, 0.0, 1.0);
}

/// Two-sample distance sup_x |F_a(x) - F_b(x)|.
inline double ks_distance(const WeightedSample& a, const WeightedSample& b) {
  const auto ca = detail::cumulative(a);
  const auto cb = detail::cumulative(b);
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, worst = 0.0;
  while (i < ca.size() || j < cb.size()) {
    const double la = i < ca.size() ? ca[i].first : kInf;
    const double lb = j < cb.size() ? cb[j].first : kInf;
    const double loc = std::min(la, lb);
    if (la == loc) fa = ca[i++].second;
    if (lb == loc) fb = cb[j++].second;
    worst = std::max(worst, std::abs(fa - fb));
  }
  return worst;
}

inline WeightedSample unweighted(std::span<const double> values) {
  WeightedSample out;
  out.points.reserve(values.size());
  for (double v : values) out.points.emplace_back(v, 1.0);
  out.total_weight = static_cast<double>(values.size());
  return out;
}

// ---------------------------------------------------------------------------
// Replicate aggregation.

struct Aggregate {
  double mean = kNaN;
  double stderr_ = kNaN;
  std::size_t count = 0;
};

inline Aggregate aggregate(std::span<const double> values) {
  Aggregate out;
  out.count = values.size();
  if (values.empty()) return out;
  KahanSum sum;
  for (double v : values) sum += v;
  out.mean = sum.value() / static_cast<double>(values.size());
  if (values.size() >= 2) {
    KahanSum sq;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    const double var = sq.value() / static_cast<double>(values.size() - 1);
    out.stderr_ = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

struct ConditionedAggregate {
  Aggregate stats;               // over surviving replicates only
  double surviving_fraction = 0.0;
  bool defined = false;          // false when every replicate went extinct
};

/// Aggregate over the replicates flagged as surviving (N(s) >= 1).
inline ConditionedAggregate aggregate_conditioned(std::span<const double> values, const std::vector<bool>& survived) {
  if (values.size() != survived.size()) throw std::invalid_argument("aggregate_conditioned: size mismatch");
  std::vector<double> kept;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (survived[i]) kept.push_back(values[i]);
  ConditionedAggregate out;
  out.surviving_fraction = values.empty() ? 0.0 : static_cast<double>(kept.size()) / static_cast<double>(values.size());
  out.defined = !kept.empty();
  out.stats = aggregate(kept);
  return out;
}

/// Linear-interpolation quantile (type 7) of an unsorted sample.
inline double quantile(std::vector<double> values, double p) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || values[hi] == values[lo]) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

struct ExtinctionSummary {
  double median_T = kNaN;
  double normalized = kNaN;  // (median_T - tau x^3) / x^2
  std::size_t replicates = 0;
  std::size_t censored = 0;  // not extinct by t_end
  bool right_censored = false;
};

inline ExtinctionSummary summarize_extinction_times(std::vector<double> times, std::size_t censored, double x,
                                                    ExtinctionSummary out = {}) {
  out.censored = censored;
  out.right_censored = censored > 0;
  out.replicates = times.size() + censored;
  if (out.replicates == 0) return out;
  for (std::size_t i = 0; i < censored; ++i) times.push_back(kInf);
  out.median_T = median(times);
  if (std::isfinite(out.median_T)) out.normalized = (out.median_T - critical_time(x)) / (x * x);
  return out;
}

/// Median extinction time and its x^2-scaled offset from tau x^3. Censored
/// replicates count as +inf; the median is undefined if half or more are.
inline ExtinctionSummary extinction_summary(std::span<const RunResult> results, double x) {
  ExtinctionSummary out;
  out.replicates = results.size();
  std::vector<double> times;
  for (const auto& r : results) {
    if (r.extinction_time) times.push_back(*r.extinction_time);
    else ++out.censored;
  }
  out.right_censored = out.censored > 0;
  return summarize_extinction_times(times, out.censored, x, out);
}

}  // namespace bbm::stats
