#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bbm/analytic.hpp"
#include "bbm/engine.hpp"
#include "bbm/stats.hpp"

using namespace bbm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

template <class Fn>
stats::Aggregate replicate_mean(std::size_t n, Fn&& fn) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = fn(i);
  return stats::aggregate(v);
}

bool within(const stats::Aggregate& a, double expected, double band = 4.0) {
  return std::abs(a.mean - expected) <= band * a.stderr_;
}

}  // namespace

TEST_CASE("bridge crossing probability examples", "[engine]") {
  CHECK_THAT(bridge_crossing_probability(0.1, 0.1, 0.01), WithinRel(0.1353352832366127, 1e-14));
  CHECK(bridge_crossing_probability(0.0, 0.3, 0.1) == 1.0);
  CHECK(bridge_crossing_probability(0.3, -0.1, 0.1) == 1.0);
  CHECK(bridge_crossing_probability(0.1, 0.1, 1e-8) == 0.0);
  double prev = 1.0;
  for (double h : {10.0, 1.0, 0.1, 0.01, 0.001}) {
    const double p = bridge_crossing_probability(0.2, 0.3, h);
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("bridge hit probability takes the start side as survival side", "[engine]") {
  CHECK_THAT(bridge_hit_probability(0.9, 0.9, 1.0, 1.0, 0.01), WithinRel(std::exp(-2.0), 1e-14));
  CHECK_THAT(bridge_hit_probability(1.1, 1.1, 1.0, 1.0, 0.01), WithinRel(std::exp(-2.0), 1e-14));
  CHECK_THAT(bridge_hit_probability(0.5, 0.5, 1.0, 0.8, 0.1),
             WithinRel(bridge_crossing_probability(0.5, 0.3, 0.1), 1e-15));
  CHECK(bridge_hit_probability(1.0, 0.5, 1.0, 1.0, 0.1) == 1.0);
}

TEST_CASE("advance on an empty system only moves the clock", "[engine][property]") {
  SimState state;
  state.time = 1.5;
  advance(state, 7.0, Dynamics{});
  CHECK(state.time == 7.0);
  CHECK(state.particles.empty());
  CHECK(state.origin_kills == 0);
  CHECK(state.right_kills == 0);
  CHECK_FALSE(state.extinction_time.has_value());
}

TEST_CASE("x0 = 0 is rejected", "[engine]") {
  SimParams p;
  p.x0 = 0.0;
  CHECK_THROWS_AS(run(p), std::invalid_argument);
}

TEST_CASE("identical seeds give bit-identical runs", "[engine]") {
  SimParams p;
  p.x0 = 2.0;
  p.boundary = Strip{4.0};
  p.dt_max = 0.01;
  p.record_times = {0.5, 1.0, 2.0};
  p.t_end = 3.0;
  p.seed = 99;
  p.replicate_id = 4;
  const RunResult a = run(p), b = run(p);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) CHECK(a.snapshots[k].positions == b.snapshots[k].positions);
  CHECK(a.extinction_time == b.extinction_time);
  CHECK(a.origin_kills == b.origin_kills);
  CHECK(a.right_kills == b.right_kills);
  p.replicate_id = 5;
  const RunResult c = run(p);
  CHECK((c.snapshots.back().positions != a.snapshots.back().positions || c.origin_kills != a.origin_kills));
}

TEST_CASE("non-branching driftless particle is a Brownian motion", "[engine]") {
  SimParams p;
  p.x0 = 50.0;
  p.mu = 0.0;
  p.branch_rate = 0.0;
  p.dt_max = 0.05;
  p.record_times = {1.0};
  p.t_end = 1.0;
  p.seed = 11;
  const auto mean = replicate_mean(20000, [&](std::size_t i) {
    SimParams q = p;
    q.replicate_id = i;
    const auto r = run(q);
    REQUIRE(r.snapshots[0].size() == 1);
    return r.snapshots[0].positions[0];
  });
  CHECK(within(mean, 50.0));
  CHECK_THAT(mean.stderr_ * std::sqrt(20000.0), WithinRel(1.0, 0.03));
}

TEST_CASE("expected particle count without killing is e^s", "[engine]") {
  SimParams p;
  p.x0 = 200.0;
  p.dt_max = kInf;
  p.record_times = {2.0};
  p.t_end = 2.0;
  p.seed = 12;
  const auto mean = replicate_mean(20000, [&](std::size_t i) {
    SimParams q = p;
    q.replicate_id = i;
    return static_cast<double>(run(q).snapshots[0].size());
  });
  CHECK(within(mean, std::exp(2.0)));
}

TEST_CASE("strip Z follows its exact mean law", "[engine]") {
  const double L = 3.0, x = 1.5, s = 4.5;
  SimParams p;
  p.x0 = x;
  p.boundary = Strip{L};
  p.dt_max = 0.01;
  p.record_times = {s};
  p.t_end = s;
  p.seed = 13;
  const auto mean = replicate_mean(40000, [&](std::size_t i) {
    SimParams q = p;
    q.replicate_id = i;
    return *stats::snapshot_stats(run(q).snapshots[0], p.boundary).Z;
  });
  const double expected = analytic::expected_Z_strip(s, L, std::exp(kSqrt2 * x));
  CHECK_THAT(expected, WithinRel(0.7074553530308619, 1e-12));
  CHECK(within(mean, expected));
}

TEST_CASE("widening the strip never kills more under common random numbers", "[engine][property]") {
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    SimParams narrow;
    narrow.x0 = 1.0;
    narrow.dt_max = 0.02;
    narrow.record_times = {1.5};
    narrow.t_end = 1.5;
    narrow.seed = 21;
    narrow.replicate_id = rep;
    narrow.boundary = Strip{2.0};
    SimParams wide = narrow;
    wide.boundary = Strip{3.0};
    const auto a = run(narrow), b = run(wide);
    auto pa = a.snapshots[0].positions, pb = b.snapshots[0].positions;
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    REQUIRE(pa.size() <= pb.size());
    CHECK(std::includes(pb.begin(), pb.end(), pa.begin(), pa.end()));
  }
}

TEST_CASE("supercritical drift leads to extinction", "[engine]") {
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    SimParams p;
    p.x0 = 2.0;
    p.dt_max = kInf;
    p.t_end = 1e6;
    p.seed = 31;
    p.replicate_id = rep;
    const auto r = run(p);
    REQUIRE(r.extinction_time.has_value());
    CHECK(*r.extinction_time > 0.0);
    CHECK(r.origin_kills >= 1);
    CHECK_FALSE(r.truncated);
  }
}

TEST_CASE("population cap sets the truncation flag", "[engine]") {
  SimParams p;
  p.x0 = 30.0;
  p.dt_max = kInf;
  p.record_times = {5.0, 10.0};
  p.t_end = 10.0;
  p.max_particles = 50;
  p.seed = 3;
  const auto r = run(p);
  CHECK(r.truncated);
  CHECK(r.snapshots.size() < 2);
}

TEST_CASE("curved boundary kills on the right", "[engine]") {
  std::uint64_t right = 0;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    SimParams p;
    p.x0 = 4.0;
    p.boundary = Curved{4.0, 0.5};
    p.dt_max = 0.05;
    p.t_end = std::get<Curved>(p.boundary).t_alpha() * 0.9;
    p.seed = 8;
    p.replicate_id = rep;
    right += run(p).right_kills;
  }
  CHECK(right > 0);
}

TEST_CASE("snapshot at time zero holds the initial particle", "[engine]") {
  SimParams p;
  p.x0 = 1.25;
  p.record_times = {0.0};
  p.t_end = 0.0;
  const auto r = run(p);
  REQUIRE(r.snapshots.size() == 1);
  CHECK(r.snapshots[0].positions == std::vector<double>{1.25});
}

TEST_CASE("Neveu count as y tends to zero is one", "[engine]") {
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    const auto k = neveu_count(10.0, 1e-12, 5, rep);
    CHECK(k.count == 1);
  }
  CHECK_THROWS_AS(neveu_count(5.0, 6.0, 1, 0), std::invalid_argument);
}

TEST_CASE("Neveu counts are reproducible", "[engine]") {
  const auto a = neveu_count(10.0, 3.0, 17, 2);
  const auto b = neveu_count(10.0, 3.0, 17, 2);
  CHECK(a.count == b.count);
  CHECK(a.count >= 1);
}
