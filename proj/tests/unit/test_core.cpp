#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bbm/core.hpp"

using namespace bbm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("derived constants match extended-precision values", "[core]") {
  const auto k = derived_constants();
  CHECK_THAT(k.tau, WithinRel(0.09552652804179271, 1e-14));
  CHECK_THAT(k.c, WithinRel(2.187553427990652, 1e-14));
}

TEST_CASE("derived constants satisfy their algebraic identities", "[core][property]") {
  const auto k = derived_constants();
  CHECK_THAT(kSqrt2 * k.c - cube_root_three_pi_sq(), WithinAbs(0.0, 1e-12));
  CHECK_THAT(k.tau * k.c * k.c * k.c, WithinAbs(1.0, 1e-12));
  CHECK_THAT(critical_time(10.0), WithinRel(95.52652804179271, 1e-14));
}

TEST_CASE("boundary_at examples", "[core]") {
  const Curved curved{10.0};
  const double t = curved.t_alpha();
  CHECK_THAT(boundary_at(curved, 0.0), WithinRel(10.0, 1e-14));
  CHECK_THAT(boundary_at(curved, t / 2.0), WithinRel(7.937005259840997, 1e-14));
  CHECK(boundary_at(curved, t) == 0.0);
  CHECK(boundary_at(Strip{5.0}, 0.0) == 5.0);
  CHECK(boundary_at(Strip{5.0}, 1e6) == 5.0);
  CHECK(std::isinf(boundary_at(OriginOnly{}, 3.0)));
}

TEST_CASE("curved boundary outside its lifetime is a domain error", "[core]") {
  const Curved curved{10.0, 0.0, 2.0};
  CHECK_THROWS_AS(boundary_at(curved, 1.0), std::domain_error);
  CHECK_THROWS_AS(boundary_at(curved, 2.0 + curved.t_alpha() + 1e-9), std::domain_error);
  CHECK_NOTHROW(boundary_at(curved, 2.0));
  CHECK(boundary_end_time(curved) == 2.0 + curved.t_alpha());
  CHECK(std::isinf(killing_level(curved, 1.0)));
  CHECK(killing_level(curved, 1e9) == 0.0);
}

TEST_CASE("curved boundary is strictly decreasing and concave", "[core][property]") {
  for (const Curved curved : {Curved{10.0}, Curved{6.0, 1.0, 3.0}, Curved{12.0, -2.0, 0.5}}) {
    const double a = curved.time_shift, b = boundary_end_time(curved);
    const int n = 400;
    const double h = (b - a) / n;
    double prev = boundary_at(curved, a);
    for (int i = 1; i <= n; ++i) {
      const double cur = boundary_at(curved, a + i * h);
      CHECK(cur < prev);
      prev = cur;
    }
    CHECK(prev == 0.0);
    for (int i = 1; i < n; ++i) {
      const double s = a + i * h;
      const double second = boundary_at(curved, s - h) - 2.0 * boundary_at(curved, s) + boundary_at(curved, s + h);
      CHECK(second <= 1e-12);
    }
  }
}

TEST_CASE("boundary validation", "[core]") {
  CHECK_THROWS_AS(validate(BoundarySpec{Strip{0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(BoundarySpec{Curved{-1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(BoundarySpec{Curved{5.0, -6.0}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(BoundarySpec{Curved{5.0, 0.0, -1.0}}), std::invalid_argument);
  CHECK_NOTHROW(validate(BoundarySpec{OriginOnly{}}));
}

TEST_CASE("SimParams validation", "[core]") {
  SimParams p;
  CHECK_NOTHROW(validate(p));
  p.x0 = 0.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.boundary = Strip{1.0};
  p.x0 = 1.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.record_times = {0.5, 0.2};
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p.record_times = {0.5, 2.0};
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p = {};
  p.dt_max = 0.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
}
