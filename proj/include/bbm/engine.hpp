#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bbm/core.hpp"
#include "bbm/rng.hpp"

namespace bbm {

/// Probability that a Brownian bridge of duration h whose distances to a
/// linear barrier are d_start and d_end at the two ends touches the barrier.
/// The law of a bridge does not depend on drift, so this is exact for
/// Brownian motion with constant drift and a straight barrier.
inline double bridge_crossing_probability(double d_start, double d_end, double h) noexcept {
  if (!(d_start > 0.0) || !(d_end > 0.0)) return 1.0;
  if (!(h > 0.0)) return 0.0;
  const double arg = 2.0 * d_start * d_end / h;
  // e^{-50} is far below the smallest uniform variate we can draw.
  return arg > 50.0 ? 0.0 : std::exp(-arg);
}

/// Crossing probability for a particle moving from a_start to a_end while the
/// barrier moves linearly from level_start to level_end. The survival side is
/// the side the particle starts on.
inline double bridge_hit_probability(double a_start, double a_end, double level_start,
                                     double level_end, double h) noexcept {
  if (a_start == level_start) return 1.0;
  const double sign = a_start > level_start ? 1.0 : -1.0;
  return bridge_crossing_probability(sign * (a_start - level_start), sign * (a_end - level_end), h);
}

/// Model parameters that stay fixed over a replicate.
struct Dynamics {
  double mu = kSqrt2;
  double branch_rate = 1.0;
  double dt_max = 1e-3;
  BoundarySpec boundary = OriginOnly{};
  std::size_t max_particles = 10'000'000;

  static Dynamics from(const SimParams& p) {
    return {p.mu, p.branch_rate, p.dt_max, p.boundary, p.max_particles};
  }
};

struct SimState {
  double time = 0.0;
  std::vector<Particle> particles;
  std::uint64_t origin_kills = 0;
  std::uint64_t right_kills = 0;
  std::optional<double> extinction_time;
  bool truncated = false;

  [[nodiscard]] Snapshot snapshot() const {
    Snapshot snap;
    snap.time = time;
    snap.positions.reserve(particles.size());
    for (const auto& p : particles) snap.positions.push_back(p.position);
    snap.cumulative_origin_kills = origin_kills;
    snap.cumulative_right_kills = right_kills;
    return snap;
  }
};

namespace detail {

inline double next_branch_epoch(double now, double rate, RngStream& rng) noexcept {
  if (!(rate > 0.0)) return kInf;
  return now + rng.exponential() / rate;
}

enum class Fate { survived, origin_kill, right_kill };

// Evolves one particle from `now` towards `to_time`. Returns when the
// particle survives to to_time, is killed, or branches (then `branched` is
// set and the second child is written to `sibling`).
struct Stepper {
  const Dynamics& dyn;
  double to_time;
  double shift_start;  // time a shifted curved boundary switches on (or +inf)

  Fate evolve(Particle& p, double& now, bool& branched, Particle& sibling, double& death_time) const {
    branched = false;
    double x = p.position;
    double t = now;
    for (;;) {
      if (p.next_branch_time <= t && p.next_branch_time < to_time) {
        Particle first{x, 0.0, p.rng.child(1)};
        Particle second{x, 0.0, p.rng.child(2)};
        first.next_branch_time = next_branch_epoch(t, dyn.branch_rate, first.rng);
        second.next_branch_time = next_branch_epoch(t, dyn.branch_rate, second.rng);
        p = first;
        sibling = second;
        now = t;
        branched = true;
        return Fate::survived;
      }
      double next = std::min(to_time, t + dyn.dt_max);
      if (p.next_branch_time < next) next = p.next_branch_time;
      if (shift_start > t && shift_start < next) next = shift_start;
      const double h = next - t;
      if (!std::isfinite(h)) throw std::invalid_argument("unbounded step: set a finite dt_max or horizon");

      const double z = p.rng.normal();
      const double u = p.rng.uniform();
      const double xn = x - dyn.mu * h + std::sqrt(h) * z;

      double p_origin = xn <= 0.0 ? 1.0 : bridge_crossing_probability(x, xn, h);
      double p_right = 0.0;
      if (!std::holds_alternative<OriginOnly>(dyn.boundary)) {
        const double level_start = killing_level(dyn.boundary, t);
        const double level_end = killing_level(dyn.boundary, next);
        if (std::isfinite(level_end)) {
          // An inactive (infinite) start level means the barrier switched on
          // exactly at `next`; only the endpoint matters then.
          p_right = std::isfinite(level_start)
                        ? bridge_crossing_probability(level_start - x, level_end - xn, h)
                        : (xn >= level_end ? 1.0 : 0.0);
        }
      }
      t = next;
      if (u < p_origin) {
        death_time = t;
        return Fate::origin_kill;
      }
      if (u < p_origin + (1.0 - p_origin) * p_right) {
        death_time = t;
        return Fate::right_kill;
      }
      x = xn;
      p.position = x;
      if (t >= to_time) {
        now = t;
        return Fate::survived;
      }
    }
  }
};

}  // namespace detail

/// Evolves every particle to `to_time`. Particles are independent given the
/// boundary, so each lineage is followed depth-first; the result does not
/// depend on the processing order because randomness is keyed by lineage.
inline void advance(SimState& state, double to_time, const Dynamics& dyn) {
  if (to_time < state.time) throw std::invalid_argument("advance: to_time precedes current time");
  if (state.truncated) return;
  if (state.particles.empty()) {
    state.time = to_time;
    return;
  }

  double shift_start = kInf;
  if (const auto* curved = std::get_if<Curved>(&dyn.boundary)) shift_start = curved->time_shift;
  const detail::Stepper stepper{dyn, to_time, shift_start};

  std::vector<Particle> survivors;
  survivors.reserve(state.particles.size());
  std::vector<std::pair<Particle, double>> pending;
  double last_death = -kInf;

  for (const Particle& root : state.particles) {
    pending.emplace_back(root, state.time);
    while (!pending.empty()) {
      auto [p, now] = pending.back();
      pending.pop_back();
      for (;;) {
        bool branched = false;
        Particle sibling{};
        double death_time = now;
        const auto fate = stepper.evolve(p, now, branched, sibling, death_time);
        if (branched) {
          pending.emplace_back(sibling, now);
          if (survivors.size() + pending.size() + 1 > dyn.max_particles) {
            state.truncated = true;
            state.particles = std::move(survivors);
            state.time = now;
            return;
          }
          continue;
        }
        if (fate == detail::Fate::survived) {
          survivors.push_back(p);
        } else {
          if (fate == detail::Fate::origin_kill) ++state.origin_kills;
          else ++state.right_kills;
          last_death = std::max(last_death, death_time);
        }
        break;
      }
    }
  }
  state.particles = std::move(survivors);
  state.time = to_time;
  if (state.particles.empty() && !state.extinction_time) state.extinction_time = last_death;
}

/// Initial state: one particle at params.x0 on the replicate's root stream.
inline SimState initial_state(const SimParams& params) {
  SimState state;
  RngStream rng = RngStream::for_replicate(params.seed, params.replicate_id);
  const double first_branch = detail::next_branch_epoch(0.0, params.branch_rate, rng);
  state.particles.push_back(Particle{params.x0, first_branch, rng});
  return state;
}

/// One replicate. Snapshots are taken at every record time (empty ones after
/// extinction); a truncated run stops recording.
inline RunResult run(const SimParams& params) {
  validate(params);
  const Dynamics dyn = Dynamics::from(params);
  SimState state = initial_state(params);
  RunResult result;
  result.snapshots.reserve(params.record_times.size());
  for (double r : params.record_times) {
    advance(state, r, dyn);
    if (state.truncated) break;
    result.snapshots.push_back(state.snapshot());
  }
  if (!state.truncated) advance(state, params.t_end, dyn);
  result.truncated = state.truncated;
  result.extinction_time = state.extinction_time;
  result.origin_kills = state.origin_kills;
  result.right_kills = state.right_kills;
  return result;
}

struct NeveuCount {
  std::uint64_t count = 0;
  bool truncated = false;
};

/// Number of particles that reach x - y when BBM with drift -sqrt(2) started
/// at x is stopped there. Shifting space by x - y turns the absorbing level
/// into the origin, so this is the origin-kill count of a run from y.
inline NeveuCount neveu_count(double x, double y, std::uint64_t seed, std::uint64_t replicate_id,
                              std::size_t max_particles = 10'000'000) {
  if (!(y > 0.0 && y < x)) throw std::invalid_argument("neveu_count requires 0 < y < x");
  SimParams params;
  params.x0 = y;
  params.mu = kSqrt2;
  params.branch_rate = 1.0;
  params.dt_max = kInf;  // exact for a constant barrier
  params.boundary = OriginOnly{};
  params.t_end = kInf;
  params.seed = seed;
  params.replicate_id = replicate_id;
  params.max_particles = max_particles;
  const RunResult r = run(params);
  return {r.origin_kills, r.truncated};
}

}  // namespace bbm
