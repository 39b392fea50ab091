#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <random>

#include "bbm/analytic.hpp"

using namespace bbm;
using namespace bbm::analytic;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

// Reference values are from tests/oracles/derive_expected.py (mpmath, 40 digits).

TEST_CASE("p_strip reference value and boundary zeros", "[analytic]") {
  CHECK_THAT(p_strip(4.5, 1.5, 1.5, 3.0), WithinRel(0.05653664831407585, 1e-13));
  CHECK_THAT(p_strip(2.0, 1.0, 3.0, 3.0), WithinAbs(0.0, 1e-15));
  CHECK_THAT(p_strip(2.0, 0.0, 1.0, 3.0), WithinAbs(0.0, 1e-15));
  CHECK_THROWS_AS(p_strip(1.0, 1.0, 3.5, 3.0), std::domain_error);
  CHECK_THROWS_AS(p_strip(0.0, 1.0, 1.0, 3.0), std::domain_error);
}

TEST_CASE("p_strip tilt symmetry", "[analytic][property]") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double L = 0.5 + 5.0 * u(gen), s = 0.1 + 5.0 * u(gen), x = L * u(gen), y = L * u(gen);
    CHECK_THAT(p_strip(s, x, y, L), WithinRel(std::exp(2.0 * kSqrt2 * (x - y)) * p_strip(s, y, x, L), 1e-12));
    CHECK_THAT(p_strip(s, x, y, L) * std::exp(-kSqrt2 * (x - y)),
               WithinRel(p_strip(s, y, x, L) * std::exp(-kSqrt2 * (y - x)), 1e-12));
  }
}

TEST_CASE("d_bound reference values and monotonicity", "[analytic]") {
  CHECK_THAT(d_bound(9.0, 3.0), WithinRel(1.487948487942437e-6, 1e-10));
  CHECK_THAT(d_bound(9.0 / 4.0, 3.0), WithinRel(0.09925087480440046, 1e-10));
  double prev = kInf;
  for (double s = 0.05; s < 200.0; s *= 1.5) {
    const double d = d_bound(s, 3.0);
    CHECK(d < prev);
    prev = d;
  }
  CHECK(d_bound(1e4, 3.0) == 0.0);
  CHECK_THROWS_AS(d_bound(1e-14, 3.0), std::domain_error);
  CHECK_THROWS_AS(d_bound(-1.0, 3.0), std::domain_error);
}

TEST_CASE("q_strip reference values", "[analytic]") {
  CHECK_THAT(q_strip(9.0, 1.5, 1.5, 3.0), WithinRel(0.004794588903884244, 1e-12));
  CHECK_THAT(q_strip(0.5, 0.7, 2.1, 3.0), WithinRel(0.01094013760712709, 1e-11));
  const double q = q_strip(9.0, 1.5, 1.5, 3.0), p = p_strip(9.0, 1.5, 1.5, 3.0);
  CHECK(std::abs(q / p - 1.0) <= d_bound(9.0, 3.0));
}

TEST_CASE("one-mode truncation equals p_strip", "[analytic][property]") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double L = 0.5 + 5.0 * u(gen), s = 0.01 + 5.0 * u(gen), x = L * u(gen), y = L * u(gen);
    CHECK_THAT(q_strip_modes(s, x, y, L, 1), WithinAbs(p_strip(s, x, y, L), 1e-13 * (1.0 + p_strip(s, x, y, L))));
  }
}

TEST_CASE("kernel symmetry and tilt identity", "[analytic][property]") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    const double L = 0.5 + 5.0 * u(gen);
    const double s = L * L * std::exp(std::log(1e-4) + std::log(1e5) * u(gen));
    const double x = L * (0.01 + 0.98 * u(gen)), y = L * (0.01 + 0.98 * u(gen));
    // absolute floor at the kernel's peak scale absorbs rounding in near-zero values
    const double floor = 1e-14 / std::sqrt(2.0 * kPi * s);
    const double vxy = v_strip(s, x, y, L), vyx = v_strip(s, y, x, L);
    CHECK(std::abs(vxy - vyx) <= 1e-10 * std::max(std::abs(vxy), std::abs(vyx)) + floor);
    const double qxy = q_strip(s, x, y, L), tilted = std::exp(2.0 * kSqrt2 * (x - y)) * q_strip(s, y, x, L);
    CHECK(std::abs(qxy - tilted) <=
          1e-10 * std::max(std::abs(qxy), std::abs(tilted)) + floor * std::exp(kSqrt2 * std::abs(x - y)));
  }
}

TEST_CASE("spectral and image kernels agree around the crossover", "[analytic]") {
  for (double ratio : {2e-4, 1e-3, 1e-2}) {
    const double L = 2.0, s = ratio * L * L;
    for (double x : {0.3, 1.0, 1.7}) {
      for (double y : {0.35, 1.05, 1.6}) {
        const double a = v_strip(s, x, y, L, 1e-14, KernelForm::spectral);
        const double b = v_strip(s, x, y, L, 1e-14, KernelForm::images);
        const double scale = std::max({std::abs(a), std::abs(b), 1e-3 / std::sqrt(2.0 * kPi * s)});
        CHECK(std::abs(a - b) / scale < 1e-8);
      }
    }
  }
  SeriesTruncation info;
  v_spectral(1.0, 0.5, 0.7, 1.0, 1e-12, &info);
  CHECK(info.n_max >= 1);
  CHECK(info.tail_bound <= 1e-12 * std::abs(v_spectral(1.0, 0.5, 0.7, 1.0, 1e-14)) * 1.01);
}

TEST_CASE("Chapman-Kolmogorov on small cases", "[analytic][property]") {
  for (const auto& [L, s, u, x, y] :
       std::vector<std::array<double, 5>>{{1.0, 0.1, 0.03, 0.4, 0.7}, {2.5, 1.2, 0.7, 0.5, 2.0}}) {
    const double composed = integrate(
        [&](double z) { return v_strip(u, x, z, L, 1e-14) * v_strip(s - u, z, y, L, 1e-14); }, 0.0, L,
        {.rel_tol = 1e-10, .abs_floor = 1e-15, .max_segments = 20000}, std::array{x, y});
    CHECK_THAT(composed, WithinRel(v_strip(s, x, y, L, 1e-14), 1e-7));
  }
}

TEST_CASE("strip moment inequalities on random draws", "[analytic][property]") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const QuadOptions opts{.rel_tol = 1e-9, .abs_floor = 1e-15, .max_segments = 20000};
  for (int k = 0; k < 150; ++k) {
    const double L = 0.5 + 6.0 * u(gen);
    const double s = std::exp(std::log(1e-3) + std::log(2e4) * u(gen));
    const double x = L * (0.01 + 0.98 * u(gen));
    const std::array cut{x};
    const double mass = integrate([&](double y) { return q_strip(s, x, y, L, 1e-13); }, 0.0, L, opts, cut);
    const double tilted =
        integrate([&](double y) { return std::exp(kSqrt2 * y) * q_strip(s, x, y, L, 1e-13); }, 0.0, L, opts, cut);
    CHECK(mass <= std::exp(s) * (1.0 + 1e-8));
    CHECK(tilted <= std::exp(kSqrt2 * x) * std::min(1.0, (L - x) / std::sqrt(s)) * (1.0 + 1e-8));
  }
}

TEST_CASE("time-integrated strip density is bounded by the Green function", "[analytic][property]") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 40; ++k) {
    const double L = 0.5 + 1.5 * u(gen);
    const double x = L * (0.05 + 0.9 * u(gen));
    double y = L * (0.05 + 0.9 * u(gen));
    if (std::abs(x - y) < 0.02 * L) y = std::min(0.95 * L, x + 0.05 * L);
    const double horizon = 40.0 * L * L;
    const double total = integrate([&](double s) { return s <= 0.0 ? 0.0 : q_strip(s, x, y, L, 1e-13); }, 0.0,
                                   horizon, {.rel_tol = 1e-8, .abs_floor = 1e-14, .max_segments = 20000},
                                   std::array{0.01 * L * L, 0.1 * L * L, L * L});
    // exact Green function of the strip, tilted
    const double green = 2.0 * std::min(x, y) * (L - std::max(x, y)) / L * std::exp(kSqrt2 * (x - y));
    CHECK_THAT(total, WithinRel(green, 1e-6));
    CHECK(total <= 2.0 * std::exp(kSqrt2 * (x - y)) * x * (L - y) / L * (1.0 + 1e-6));
  }
}

TEST_CASE("strip expectation laws", "[analytic]") {
  const double Z0 = std::exp(kSqrt2 * 1.5);
  CHECK_THAT(Z0, WithinRel(8.342144716476796, 1e-14));
  CHECK_THAT(expected_Z_strip(4.5, 3.0, Z0), WithinRel(0.7074553530308619, 1e-13));
  CHECK(expected_Z_strip(0.0, 3.0, Z0) == Z0);
  CHECK_THAT(expected_Z_strip(2.0, 3.0, 2.0 * Z0), WithinRel(2.0 * expected_Z_strip(2.0, 3.0, Z0), 1e-15));

  const auto iv = expected_Y_strip(9.0, 3.0, 1.0);
  CHECK_THAT(iv.center, WithinRel(0.009156990289760756, 1e-13));
  CHECK_THAT(iv.width(), WithinRel(2.0 * 1.487948487942437e-6 * iv.center, 1e-8));
  CHECK(iv.contains(iv.center));
  double prev = kInf;
  for (double s : {4.0, 9.0, 20.0, 50.0}) {
    const auto w = expected_Y_strip(s, 3.0, 1.0);
    CHECK(w.contains(w.center));
    CHECK(w.width() / w.center < prev);
    prev = w.width() / w.center;
  }
}

TEST_CASE("G_factor values and cocycle identity", "[analytic]") {
  const double t = 95.52;
  CHECK_THAT(G_factor(t, 0.0, t / 2.0), WithinRel(0.04817219889813477, 1e-12));
  CHECK_THAT(G_factor(t, 3.0, 3.0), WithinRel(1.0, 1e-15));
  const double T = critical_time(10.0);
  CHECK_THAT(G_factor(T, 0.0, T / 3.0) * G_factor(T, T / 3.0, 2.0 * T / 3.0),
             WithinRel(G_factor(T, 0.0, 2.0 * T / 3.0), 1e-12));
  CHECK_THROWS_AS(G_factor(t, 2.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(G_factor(t, 0.0, t), std::domain_error);
}

TEST_CASE("psi_curved values, zeros and decay in s", "[analytic]") {
  const double t = critical_time(10.0);
  CHECK_THAT(psi_curved(t / 2.0, 5.0, 3.0, t), WithinRel(0.09522619620703631, 1e-12));
  const double Ls = derived_constants().c * std::cbrt(t - 10.0);
  CHECK_THAT(psi_curved(10.0, 5.0, Ls * (1.0 - 1e-13), t), WithinAbs(0.0, 1e-12));
  CHECK_THAT(psi_curved(10.0, 0.0, 2.0, t), WithinAbs(0.0, 1e-14));
  double prev = kInf;
  for (double s = 0.0; s < 0.9 * t; s += 0.05 * t) {
    const double v = psi_curved(s, 5.0, 1.0, t);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("right-kill envelopes", "[analytic]") {
  const double t = 95.52;
  const double x = derived_constants().c * std::cbrt(t) / 2.0;
  CHECK_THAT(x, WithinRel(4.999886101612549, 1e-13));
  const auto b = right_kill_bounds(x, t);
  CHECK(b.h.constant_unknown);
  CHECK(b.j.constant_unknown);
  CHECK_THAT(b.h.value, WithinRel(0.003883073944256905, 1e-12));
  CHECK_THAT(b.j.value, WithinRel(0.0009291223262732159, 1e-12));
  CHECK_THAT(b.h.value / b.j.value, WithinRel(std::pow(t, 2.0 / 3.0) / x, 1e-12));
  const auto near0 = right_kill_bounds(1e-9, t);
  CHECK(near0.h.value < 1e-12);
  CHECK(near0.j.value < 1e-12);
}

TEST_CASE("limiting densities", "[analytic]") {
  const QuadOptions opts{.rel_tol = 1e-13, .abs_floor = 1e-16};
  CHECK_THAT(integrate(g_density, 0.0, 80.0, opts), WithinAbs(1.0, 1e-10));
  CHECK_THAT(integrate([](double y) { return y * g_density(y); }, 0.0, 80.0, opts), WithinRel(kSqrt2, 1e-10));
  CHECK_THAT(integrate(h_density, 0.0, 1.0, opts), WithinAbs(1.0, 1e-10));
  CHECK(h_cdf(0.5) == Catch::Approx(0.5).margin(1e-15));
  for (double y : {0.3, 1.0, 4.0})
    CHECK_THAT(g_cdf(y), WithinAbs(integrate(g_density, 0.0, y, opts), 1e-12));
}

TEST_CASE("first moment functional", "[analytic]") {
  const double L = 3.0, x = 1.2;
  const RealFunction eigen = [&](double y) { return std::exp(kSqrt2 * y) * std::sin(kPi * y / L); };
  for (double s : {0.05, 0.5, 4.0}) {
    const double Z0 = std::exp(kSqrt2 * x) * std::sin(kPi * x / L);
    CHECK_THAT(first_moment_functional(eigen, x, L, s, 1e-11), WithinRel(expected_Z_strip(s, L, Z0), 1e-9));
  }
  CHECK(first_moment_functional([](double) { return 0.0; }, x, L, 1.0, 1e-10) == 0.0);

  // f = 1 at large s reduces to the leading mode
  const double s = 40.0;
  const double lead = 2.0 / L * std::exp(-kPi * kPi * s / (2 * L * L)) * std::exp(kSqrt2 * x) *
                      std::sin(kPi * x / L) *
                      integrate([&](double y) { return std::exp(-kSqrt2 * y) * std::sin(kPi * y / L); }, 0.0, L);
  CHECK_THAT(first_moment_functional([](double) { return 1.0; }, x, L, s, 1e-11), WithinRel(lead, 1e-9));

  CHECK_THAT(first_moment_functional([](double) { return 1.0; }, 1.0, 2.0, 1.0, 1e-11),
             WithinRel(0.4460541894452946, 1e-9));
  const std::array cuts{0.5, 1.0};
  const RealFunction ind = [](double y) { return (y >= 0.5 && y <= 1.0) ? 1.0 : 0.0; };
  CHECK_THAT(first_moment_functional(ind, 1.0, 2.0, 1.0, 1e-11, cuts), WithinRel(0.1868629397233520, 1e-9));
}

TEST_CASE("second moment functional", "[analytic]") {
  const std::array cuts{0.5, 1.0};
  const RealFunction ind = [](double y) { return (y >= 0.5 && y <= 1.0) ? 1.0 : 0.0; };
  CHECK(second_moment_functional([](double) { return 0.0; }, 1.0, 2.0, 1.0, 1e-8) == 0.0);
  const double m1 = first_moment_functional(ind, 1.0, 2.0, 1.0, 1e-10, cuts);
  const double m2 = second_moment_functional(ind, 1.0, 2.0, 1.0, 1e-8, cuts);
  CHECK(m2 - m1 * m1 >= 0.0);
  CHECK(m2 >= m1);  // f^2 = f and the branching term is nonnegative
}

TEST_CASE("predicted windows", "[analytic]") {
  const auto w = predicted_windows(10.0);
  CHECK_THAT(w.t(), WithinRel(critical_time(10.0), 1e-15));
  CHECK_THAT(w.N_exponent(w.t() / 2.0), WithinRel(4.316865204111593, 1e-13));
  for (double s = 0.0; s < w.t(); s += w.t() / 50.0) CHECK(w.rightmost_center(s) < w.boundary(s));
  CHECK_THAT(w.boundary(0.0), WithinRel(10.0, 1e-15));
  CHECK(w.ode_max_deviation() <= 1e-6);
  CHECK_THAT(w.heuristic_L_ode_solution(w.t() / 2.0), WithinAbs(w.boundary(w.t() / 2.0), 1e-6));
  CHECK_THROWS_AS(predicted_windows(0.0), std::domain_error);
}

TEST_CASE("Bramson anchor", "[analytic]") {
  CHECK(bramson_median_anchor(1.0).value == 0.0);
  CHECK_THAT(bramson_median_anchor(100.0).value, WithinRel(-4.884520600545441, 1e-13));
  CHECK(bramson_median_anchor(100.0).constant_unknown);
  CHECK(bramson_median_anchor(200.0).value < bramson_median_anchor(100.0).value);
}
