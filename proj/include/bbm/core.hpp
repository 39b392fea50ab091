#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bbm/rng.hpp"

namespace bbm {

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct DerivedConstants {
  double tau;  // t = tau * x^3 is the approximate extinction time
  double c;    // L(s) = c (t - s)^{1/3}
};

/// tau = 2 sqrt(2) / (3 pi^2) and c = tau^{-1/3}.
inline DerivedConstants derived_constants() noexcept {
  const double tau = 2.0 * kSqrt2 / (3.0 * kPi * kPi);
  return {tau, std::cbrt(3.0 * kPi * kPi / (2.0 * kSqrt2))};
}

/// (3 pi^2)^{1/3} = sqrt(2) c, the decay rate appearing in the curved-boundary factors.
inline double cube_root_three_pi_sq() noexcept { return std::cbrt(3.0 * kPi * kPi); }

/// Approximate extinction time tau x^3 for a process started at x.
inline double critical_time(double x) noexcept { return derived_constants().tau * x * x * x; }

// ---------------------------------------------------------------------------
// Right boundary regimes.

struct OriginOnly {
  friend bool operator==(const OriginOnly&, const OriginOnly&) = default;
};

struct Strip {
  double L;
  friend bool operator==(const Strip&, const Strip&) = default;
};

/// Cube-root boundary c (t_alpha - (s - time_shift))^{1/3} with
/// t_alpha = tau (x_ref + alpha)^3.
struct Curved {
  double x_ref;
  double alpha = 0.0;
  double time_shift = 0.0;

  [[nodiscard]] double t_alpha() const noexcept { return critical_time(x_ref + alpha); }
  friend bool operator==(const Curved&, const Curved&) = default;
};

using BoundarySpec = std::variant<OriginOnly, Strip, Curved>;

inline void validate(const BoundarySpec& spec) {
  if (const auto* strip = std::get_if<Strip>(&spec)) {
    if (!(strip->L > 0.0)) throw std::invalid_argument("Strip boundary requires L > 0");
  } else if (const auto* curved = std::get_if<Curved>(&spec)) {
    if (!(curved->x_ref > 0.0)) throw std::invalid_argument("Curved boundary requires x_ref > 0");
    if (!(curved->x_ref + curved->alpha > 0.0))
      throw std::invalid_argument("Curved boundary requires x_ref + alpha > 0");
    if (!(curved->time_shift >= 0.0))
      throw std::invalid_argument("Curved boundary requires time_shift >= 0");
  }
}

/// Position of the right killing boundary at time s; +inf for OriginOnly.
/// Throws std::domain_error for a Curved boundary outside its lifetime.
inline double boundary_at(const BoundarySpec& spec, double s) {
  struct Visitor {
    double s;
    double operator()(const OriginOnly&) const noexcept { return kInf; }
    double operator()(const Strip& strip) const noexcept { return strip.L; }
    double operator()(const Curved& curved) const {
      const double ta = curved.t_alpha();
      const double local = s - curved.time_shift;
      if (!(local >= 0.0 && local <= ta)) {
        std::ostringstream msg;
        msg << "curved boundary evaluated at s=" << s << " outside its domain ["
            << curved.time_shift << ", " << curved.time_shift + ta << "]";
        throw std::domain_error(msg.str());
      }
      return derived_constants().c * std::cbrt(ta - local);
    }
  };
  return std::visit(Visitor{s}, spec);
}

/// Time at which the boundary reaches zero (+inf when it never does).
inline double boundary_end_time(const BoundarySpec& spec) noexcept {
  if (const auto* curved = std::get_if<Curved>(&spec)) return curved->time_shift + curved->t_alpha();
  return kInf;
}

/// Right killing level as seen by the engine: a Curved boundary is inactive
/// (+inf) before its time shift and sits at 0 after it has closed.
inline double killing_level(const BoundarySpec& spec, double s) {
  if (const auto* curved = std::get_if<Curved>(&spec)) {
    const double local = s - curved->time_shift;
    if (local < 0.0) return kInf;
    if (local >= curved->t_alpha()) return 0.0;
  }
  return boundary_at(spec, s);
}

inline const char* boundary_name(const BoundarySpec& spec) noexcept {
  switch (spec.index()) {
    case 0: return "origin";
    case 1: return "strip";
    default: return "curved";
  }
}

// ---------------------------------------------------------------------------
// Simulation inputs and outputs.

struct Particle {
  double position;
  double next_branch_time;
  RngStream rng;
};

struct SimParams {
  double x0 = 1.0;
  double mu = kSqrt2;
  double branch_rate = 1.0;
  double dt_max = 1e-3;
  BoundarySpec boundary = OriginOnly{};
  std::vector<double> record_times;
  double t_end = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t replicate_id = 0;
  std::size_t max_particles = 10'000'000;
};

inline void validate(const SimParams& p) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid SimParams: " + what); };
  if (!(p.x0 > 0.0) || !std::isfinite(p.x0)) fail("x0 must be a finite value > 0");
  if (!std::isfinite(p.mu)) fail("mu must be finite");
  if (!(p.branch_rate >= 0.0) || !std::isfinite(p.branch_rate)) fail("branch_rate must be >= 0");
  if (!(p.dt_max > 0.0)) fail("dt_max must be > 0");
  if (!(p.t_end >= 0.0)) fail("t_end must be >= 0");
  if (p.max_particles == 0) fail("max_particles must be > 0");
  validate(p.boundary);
  if (p.x0 >= killing_level(p.boundary, 0.0))
    fail("x0 must lie strictly below the right boundary at time 0");
  double prev = -kInf;
  for (double r : p.record_times) {
    if (!(r >= 0.0 && r <= p.t_end)) fail("record_times must lie in [0, t_end]");
    if (r < prev) fail("record_times must be ascending");
    prev = r;
  }
}

struct Snapshot {
  double time = 0.0;
  std::vector<double> positions;
  std::uint64_t cumulative_origin_kills = 0;
  std::uint64_t cumulative_right_kills = 0;

  [[nodiscard]] std::size_t size() const noexcept { return positions.size(); }
};

struct RunResult {
  std::vector<Snapshot> snapshots;
  std::optional<double> extinction_time;  // empty: not extinct by t_end
  bool truncated = false;
  std::uint64_t origin_kills = 0;
  std::uint64_t right_kills = 0;
};

}  // namespace bbm
