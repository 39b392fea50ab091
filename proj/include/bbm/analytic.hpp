#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bbm/core.hpp"
#include "bbm/numeric.hpp"

namespace bbm::analytic {

/// Closed interval; `center` is the point estimate it was built around.
struct Interval {
  double lo;
  double center;
  double hi;

  [[nodiscard]] bool contains(double v) const noexcept { return v >= lo && v <= hi; }
  [[nodiscard]] double width() const noexcept { return hi - lo; }
};

/// A value known only up to an unspecified multiplicative (or additive)
/// constant. Consumers may compare orders of magnitude or trends, not values.
struct Envelope {
  double value;
  bool constant_unknown = true;
};

namespace detail {

inline void require_in_strip(double x, double L, const char* name) {
  if (!(L > 0.0)) throw std::domain_error("strip width L must be > 0");
  if (!(x >= 0.0 && x <= L)) {
    std::ostringstream msg;
    msg << name << "=" << x << " outside [0, " << L << "]";
    throw std::domain_error(msg.str());
  }
}

inline double decay_rate(double L) noexcept { return kPi * kPi / (2.0 * L * L); }

}  // namespace detail

// ---------------------------------------------------------------------------
// Strip (0, L): eigenfunction approximations and exact kernels.

/// Leading-mode density of BBM with drift -sqrt(2) killed at 0 and L.
inline double p_strip(double s, double x, double y, double L) {
  detail::require_in_strip(x, L, "x");
  detail::require_in_strip(y, L, "y");
  if (!(s > 0.0)) throw std::domain_error("p_strip requires s > 0");
  return 2.0 / L * std::exp(-detail::decay_rate(L) * s + kSqrt2 * (x - y)) * std::sin(kPi * x / L) *
         std::sin(kPi * y / L);
}

/// sum_{n>=2} n^2 exp(-pi^2 (n^2 - 1) s / 2L^2), a uniform bound on |q/p - 1|.
inline double d_bound(double s, double L) {
  if (!(s > 0.0) || !(L > 0.0)) throw std::domain_error("d_bound requires s > 0 and L > 0");
  const double a = detail::decay_rate(L) * s;
  // Summands peak near n = 1/sqrt(a) and are negligible once a(n^2-1) ~ 60.
  const double n_needed = std::sqrt(60.0 / a + 1.0) + 1.0 / std::sqrt(a);
  if (n_needed > 1e6)
    throw std::domain_error("d_bound: s/L^2 too small (series needs > 1e6 terms); use the kernel directly");
  const double n_peak = 1.0 / std::sqrt(a);
  KahanSum sum;
  for (double n = 2.0;; n += 1.0) {
    const double term = n * n * std::exp(-a * (n * n - 1.0));
    sum += term;
    if (n > n_peak && term < 1e-18 * sum.value()) break;
    if (term == 0.0 && n > n_peak) break;
  }
  return sum.value();
}

/// Where a spectral series was cut and a rigorous bound on what was dropped.
struct SeriesTruncation {
  int n_max = 1;
  double tail_bound = 0.0;
};

/// Bound on (2/L) sum_{m>n} exp(-m^2 a); consecutive ratios are at most
/// exp(-(2n+3)a), so the tail is dominated by a geometric series.
inline double spectral_tail(int n, double a, double L) noexcept {
  const double first = std::exp(-a * (n + 1.0) * (n + 1.0));
  const double ratio = std::exp(-a * (2.0 * n + 3.0));
  return 2.0 / L * first / (1.0 - ratio);
}

/// Dirichlet heat kernel on (0, L) by its eigenfunction series, summed until
/// the tail bound drops below tol * |partial sum| (or n_max terms when given).
inline double v_spectral(double s, double x, double y, double L, double tol,
                         SeriesTruncation* info = nullptr, int n_fixed = 0) {
  const double a = detail::decay_rate(L) * s;
  const double kx = kPi * x / L, ky = kPi * y / L;
  KahanSum sum;
  int n = 1;
  for (;; ++n) {
    sum += std::exp(-a * n * n) * std::sin(n * kx) * std::sin(n * ky);
    if (n_fixed > 0) {
      if (n >= n_fixed) break;
      continue;
    }
    const double tail = spectral_tail(n, a, L);
    if (tail <= tol * std::abs(2.0 / L * sum.value()) || tail < 1e-300) break;
    if (n > 10'000'000) throw std::domain_error("v_spectral: series did not converge; use image sums");
  }
  if (info) *info = {n, spectral_tail(n, a, L)};
  return 2.0 / L * sum.value();
}

/// Dirichlet heat kernel on (0, L) by the method of images:
/// sum_k [phi(y - x + 2kL) - phi(y + x + 2kL)] with phi the N(0, s) density.
inline double v_images(double s, double x, double y, double L, double tol) {
  const double norm = 1.0 / std::sqrt(2.0 * kPi * s);
  auto phi = [&](double z) { return norm * std::exp(-z * z / (2.0 * s)); };
  KahanSum sum;
  sum += phi(y - x) - phi(y + x);
  for (int k = 1;; ++k) {
    const double shift = 2.0 * k * L;
    const double term = phi(y - x + shift) - phi(y + x + shift) + phi(y - x - shift) - phi(y + x - shift);
    sum += term;
    // images at distance >= (2k - 1)L contribute less than this bound
    const double next_bound = 4.0 * phi((2.0 * k + 1.0) * L - L);
    if (next_bound <= tol * std::abs(sum.value()) || next_bound < 1e-300) break;
    if (k > 1000000) break;
  }
  return sum.value();
}

enum class KernelForm { automatic, spectral, images };

/// s / L^2 below which the image sum is used.
inline constexpr double kImageCrossover = 1e-3;

inline double v_strip(double s, double x, double y, double L, double tol = 1e-12,
                      KernelForm form = KernelForm::automatic) {
  detail::require_in_strip(x, L, "x");
  detail::require_in_strip(y, L, "y");
  if (!(s > 0.0)) throw std::domain_error("strip kernel requires s > 0");
  if (!(tol > 0.0)) throw std::domain_error("strip kernel requires tol > 0");
  if (form == KernelForm::automatic) form = s / (L * L) < kImageCrossover ? KernelForm::images : KernelForm::spectral;
  return form == KernelForm::images ? v_images(s, x, y, L, tol) : v_spectral(s, x, y, L, tol);
}

/// Expected particle density of BBM with drift -sqrt(2), killed at 0 and L:
/// the Girsanov tilt e^{sqrt(2)(x-y)} of the Dirichlet heat kernel.
inline double q_strip(double s, double x, double y, double L, double tol = 1e-12,
                      KernelForm form = KernelForm::automatic) {
  return std::exp(kSqrt2 * (x - y)) * v_strip(s, x, y, L, tol, form);
}

/// q_strip truncated to its first n_max modes (n_max = 1 gives p_strip).
inline double q_strip_modes(double s, double x, double y, double L, int n_max) {
  detail::require_in_strip(x, L, "x");
  detail::require_in_strip(y, L, "y");
  return std::exp(kSqrt2 * (x - y)) * v_spectral(s, x, y, L, 0.0, nullptr, n_max);
}

/// E[Z(s)] = e^{-pi^2 s / 2L^2} Z(0) on the strip.
inline double expected_Z_strip(double s, double L, double Z0) {
  if (!(s >= 0.0) || !(L > 0.0)) throw std::domain_error("expected_Z_strip requires s >= 0, L > 0");
  return std::exp(-detail::decay_rate(L) * s) * Z0;
}

/// E[Y(s)] = (4/pi) e^{-pi^2 s/2L^2} Z(0) (1 + D), |D| <= d_bound(s, L).
inline Interval expected_Y_strip(double s, double L, double Z0) {
  const double center = 4.0 / kPi * std::exp(-detail::decay_rate(L) * s) * Z0;
  const double d = d_bound(s, L);
  const double a = center * (1.0 - d), b = center * (1.0 + d);
  return {std::min(a, b), center, std::max(a, b)};
}

// ---------------------------------------------------------------------------
// Curved boundary L(s) = c (t - s)^{1/3}.

/// G_r(s) = exp(-(3pi^2)^{1/3} ((t-r)^{1/3} - (t-s)^{1/3})) ((t-s)/(t-r))^{1/6}.
inline double G_factor(double t, double r, double s) {
  if (!(0.0 <= r && r <= s && s < t)) {
    std::ostringstream msg;
    msg << "G_factor requires 0 <= r <= s < t (got r=" << r << ", s=" << s << ", t=" << t << ")";
    throw std::domain_error(msg.str());
  }
  return std::exp(-cube_root_three_pi_sq() * (std::cbrt(t - r) - std::cbrt(t - s))) *
         std::pow((t - s) / (t - r), 1.0 / 6.0);
}

/// Density envelope for the process killed at 0 and L(s); the true density
/// is within unspecified constant factors of it.
inline double psi_curved(double s, double x, double y, double t) {
  if (!(s >= 0.0 && s < t)) throw std::domain_error("psi_curved requires 0 <= s < t");
  const double c = derived_constants().c;
  const double L0 = c * std::cbrt(t);
  const double Ls = c * std::cbrt(t - s);
  if (!(x >= 0.0 && x <= L0)) throw std::domain_error("psi_curved requires 0 <= x <= L(0)");
  if (!(y >= 0.0 && y <= Ls)) throw std::domain_error("psi_curved requires 0 <= y <= L(s)");
  return 1.0 / Ls * std::exp(-cube_root_three_pi_sq() * (std::cbrt(t) - std::cbrt(t - s))) *
         std::pow((t - s) / t, 1.0 / 6.0) * std::exp(kSqrt2 * (x - y)) * std::sin(kPi * x / L0) *
         std::sin(kPi * y / Ls);
}

struct RightKillBounds {
  Envelope h;  // lower envelope of E[R]
  Envelope j;  // E[R] <= C (h + j)
};

inline RightKillBounds right_kill_bounds(double x, double t) {
  if (!(t > 0.0)) throw std::domain_error("right_kill_bounds requires t > 0");
  const double L0 = derived_constants().c * std::cbrt(t);
  if (!(x > 0.0 && x < L0)) throw std::domain_error("right_kill_bounds requires 0 < x < c t^{1/3}");
  const double tail = std::exp(-std::cbrt(3.0 * kPi * kPi * t));
  const double h = std::exp(kSqrt2 * x) * std::sin(kPi * x / L0) * std::cbrt(t) * tail;
  const double j = x * std::exp(kSqrt2 * x) / std::cbrt(t) * tail;
  return {{h, true}, {j, true}};
}

// ---------------------------------------------------------------------------
// Limiting configuration laws.

inline double g_density(double y) noexcept { return y < 0.0 ? 0.0 : 2.0 * y * std::exp(-kSqrt2 * y); }
inline double g_cdf(double y) noexcept {
  return y <= 0.0 ? 0.0 : 1.0 - std::exp(-kSqrt2 * y) * (1.0 + kSqrt2 * y);
}
inline double h_density(double z) noexcept { return (z < 0.0 || z > 1.0) ? 0.0 : kPi / 2.0 * std::sin(kPi * z); }
inline double h_cdf(double z) noexcept {
  if (z <= 0.0) return 0.0;
  if (z >= 1.0) return 1.0;
  return (1.0 - std::cos(kPi * z)) / 2.0;
}

// ---------------------------------------------------------------------------
// Many-to-one and many-to-two formulas on the strip.

using RealFunction = std::function<double(double)>;

namespace detail {

inline std::vector<double> with_point(std::span<const double> cuts, double p) {
  std::vector<double> out(cuts.begin(), cuts.end());
  out.push_back(p);
  return out;
}

}  // namespace detail

/// E[sum_i f(X_i(s))] = int_0^L f(y) q_s(x, y) dy for one particle at x.
/// `breakpoints` should list the discontinuities of f.
inline double first_moment_functional(const RealFunction& f, double x, double L, double s, double tol,
                                      std::span<const double> breakpoints = {}) {
  detail::require_in_strip(x, L, "x");
  if (!(s > 0.0)) throw std::domain_error("first_moment_functional requires s > 0");
  const auto cuts = detail::with_point(breakpoints, x);
  auto integrand = [&](double y) {
    const double fy = f(y);
    return fy == 0.0 ? 0.0 : fy * q_strip(s, x, y, L, 1e-14);
  };
  return integrate(integrand, 0.0, L, {.rel_tol = tol, .abs_floor = 1e-14}, cuts);
}

/// Cache of the projections c_n = int f(y) e^{-sqrt2 y} sin(n pi y / L) dy,
/// giving int f(y) q_tau(z, y) dy as a mode sum for all but the smallest tau.
class ModalProjection {
 public:
  ModalProjection(const RealFunction& f, double L, std::span<const double> breakpoints, int modes,
                  double tol)
      : L_(L), f_(f), cuts_(breakpoints.begin(), breakpoints.end()), coef_(modes + 1, 0.0) {
    for (int n = 1; n <= modes; ++n) {
      auto integrand = [&](double y) {
        const double fy = f(y);
        return fy == 0.0 ? 0.0 : fy * std::exp(-kSqrt2 * y) * std::sin(n * kPi * y / L);
      };
      // splitting into n pieces keeps each panel within one half-period
      coef_[n] = integrate(integrand, 0.0, L,
                           {.rel_tol = tol, .abs_floor = 1e-15, .max_segments = 20000,
                            .initial_segments = static_cast<std::size_t>(n)},
                           cuts_);
    }
    // below this tau the omitted modes are not negligible
    const double a = kPi * kPi / (2.0 * L * L);
    tau_min_ = 40.0 / (a * modes * static_cast<double>(modes));
  }

  /// int_0^L f(y) q_tau(z, y) dy.
  [[nodiscard]] double inner(double z, double tau) const {
    if (tau <= 0.0) return f_(z);
    if (tau < tau_min_) {
      const auto cuts = detail::with_point(cuts_, z);
      auto integrand = [&](double y) {
        const double fy = f_(y);
        return fy == 0.0 ? 0.0 : fy * q_strip(tau, z, y, L_, 1e-14);
      };
      return integrate(integrand, 0.0, L_, {.rel_tol = 1e-9, .abs_floor = 1e-15, .max_segments = 20000}, cuts);
    }
    const double a = kPi * kPi * tau / (2.0 * L_ * L_);
    KahanSum sum;
    for (std::size_t n = 1; n < coef_.size(); ++n) {
      const double w = std::exp(-a * static_cast<double>(n * n));
      if (w < 1e-18) break;
      sum += w * coef_[n] * std::sin(static_cast<double>(n) * kPi * z / L_);
    }
    return std::exp(kSqrt2 * z) * 2.0 / L_ * sum.value();
  }

 private:
  double L_;
  RealFunction f_;
  std::vector<double> cuts_;
  std::vector<double> coef_;
  double tau_min_ = 0.0;
};

/// E[(sum_i f(X_i(s)))^2] =
///   int f^2 q_s(x, .) + 2 int_0^s int_0^L q_u(x, z) (int f(y) q_{s-u}(z, y) dy)^2 dz du.
inline double second_moment_functional(const RealFunction& f, double x, double L, double s, double tol,
                                       std::span<const double> breakpoints = {}) {
  detail::require_in_strip(x, L, "x");
  if (!(s > 0.0)) throw std::domain_error("second_moment_functional requires s > 0");
  const RealFunction f2 = [&f](double y) {
    const double v = f(y);
    return v * v;
  };
  const double diagonal = first_moment_functional(f2, x, L, s, tol, breakpoints);

  const ModalProjection projection(f, L, breakpoints, 256, 1e-12);
  const auto z_cuts = detail::with_point(breakpoints, x);
  auto over_z = [&](double u) {
    if (u <= 0.0) {
      const double v = projection.inner(x, s);
      return v * v;
    }
    auto integrand = [&](double z) {
      const double inner = projection.inner(z, s - u);
      return inner == 0.0 ? 0.0 : q_strip(u, x, z, L, 1e-14) * inner * inner;
    };
    return integrate(integrand, 0.0, L, {.rel_tol = tol, .abs_floor = 1e-15, .max_segments = 20000}, z_cuts);
  };
  // 8 initial panels of 15 Kronrod nodes: at least 64 u-nodes
  const double branching =
      integrate(over_z, 0.0, s, {.rel_tol = tol, .abs_floor = 1e-14, .max_segments = 4000, .initial_segments = 8});
  return diagonal + 2.0 * branching;
}

// ---------------------------------------------------------------------------
// Predicted windows for the process started from one particle at x.

class PredictedWindows {
 public:
  explicit PredictedWindows(double x) : x_(x), t_(critical_time(x)) {
    if (!(x > 0.0)) throw std::domain_error("predicted_windows requires x > 0");
  }

  [[nodiscard]] double x() const noexcept { return x_; }
  [[nodiscard]] double t() const noexcept { return t_; }

  /// L(s) = x (1 - s/t)^{1/3}.
  [[nodiscard]] double boundary(double s) const { return x_ * std::cbrt(1.0 - s / t_); }

  /// log of the particle-count center, up to an additive constant.
  [[nodiscard]] double N_exponent(double s) const {
    return kSqrt2 * std::cbrt(1.0 - s / t_) * x_ - 3.0 * std::log(x_);
  }

  /// Center of the window for the right-most particle.
  [[nodiscard]] double rightmost_center(double s) const {
    return boundary(s) - 3.0 / kSqrt2 * std::log(x_);
  }

  /// Solution at s of L' = -pi^2 / (2 sqrt2 L^2), L(0) = x, by classical RK4.
  [[nodiscard]] double heuristic_L_ode_solution(double s, int steps = 20000) const {
    auto rhs = [](double L) { return -kPi * kPi / (2.0 * kSqrt2 * L * L); };
    const double h = s / steps;
    double L = x_;
    for (int i = 0; i < steps; ++i) {
      const double k1 = rhs(L);
      const double k2 = rhs(L + 0.5 * h * k1);
      const double k3 = rhs(L + 0.5 * h * k2);
      const double k4 = rhs(L + h * k3);
      L += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return L;
  }

  /// max |ODE solution - c(t - s)^{1/3}| over a uniform grid on [0, fraction*t].
  [[nodiscard]] double ode_max_deviation(double fraction = 0.9, int grid = 200, int steps = 20000) const {
    auto rhs = [](double L) { return -kPi * kPi / (2.0 * kSqrt2 * L * L); };
    const double end = fraction * t_;
    const int per = std::max(1, steps / grid);
    const double h = end / (static_cast<double>(grid) * per);
    double L = x_, s = 0.0, worst = 0.0;
    for (int g = 0; g < grid; ++g) {
      for (int i = 0; i < per; ++i) {
        const double k1 = rhs(L);
        const double k2 = rhs(L + 0.5 * h * k1);
        const double k3 = rhs(L + 0.5 * h * k2);
        const double k4 = rhs(L + h * k3);
        L += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s += h;
      }
      worst = std::max(worst, std::abs(L - derived_constants().c * std::cbrt(t_ - s)));
    }
    return worst;
  }

 private:
  double x_;
  double t_;
};

inline PredictedWindows predicted_windows(double x) { return PredictedWindows(x); }

/// Center -(3 / 2sqrt2) log t of the median of the right-most particle of
/// BBM with drift -sqrt(2) and no absorption; the band around it is an
/// unknown constant.
inline Envelope bramson_median_anchor(double t) {
  if (!(t >= 1.0)) throw std::domain_error("bramson_median_anchor requires t >= 1");
  return {-3.0 / (2.0 * kSqrt2) * std::log(t), true};
}

}  // namespace bbm::analytic
