#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bbm {

/// Neumaier-compensated running sum.
class KahanSum {
 public:
  KahanSum& operator+=(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
    else comp_ += (v - t) + sum_;
    sum_ = t;
    return *this;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, QuadResult estimate)
      : std::runtime_error(what + " (estimate " + std::to_string(estimate.value) + " +/- " +
                           std::to_string(estimate.abs_error) + ")"),
        estimate_(estimate) {}
  [[nodiscard]] const QuadResult& estimate() const noexcept { return estimate_; }

 private:
  QuadResult estimate_;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const noexcept { return error < o.error; }
};

template <class F>
Segment kronrod15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double gauss = fc * kWg[3];
  double kronrod = fc * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    kronrod += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  const double value = kronrod * half;
  const double error = std::abs((kronrod - gauss) * half);
  return {a, b, value, error};
}

}  // namespace detail

struct QuadOptions {
  double rel_tol = 1e-10;
  double abs_floor = 1e-14;
  std::size_t max_segments = 4000;
  std::size_t initial_segments = 1;
};

/// Globally adaptive Gauss-Kronrod integration over [a, b], split first at
/// the given breakpoints. Never throws; check `converged`.
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, QuadOptions opts = {},
                              std::span<const double> breakpoints = {}) {
  QuadResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  std::vector<double> cuts{a};
  for (double p : breakpoints)
    if (p > a && p < b) cuts.push_back(p);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<detail::Segment> heap;
  const std::size_t per = std::max<std::size_t>(1, opts.initial_segments);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double w = (cuts[i + 1] - cuts[i]) / static_cast<double>(per);
    for (std::size_t k = 0; k < per; ++k) {
      const double lo = cuts[i] + w * static_cast<double>(k);
      const double hi = k + 1 == per ? cuts[i + 1] : lo + w;
      heap.push(detail::kronrod15(f, lo, hi));
      out.evaluations += 15;
    }
  }

  auto totals = [&heap]() {
    KahanSum v, e;
    auto copy = heap;
    while (!copy.empty()) {
      v += copy.top().value;
      e += copy.top().error;
      copy.pop();
    }
    return std::pair{v.value(), e.value()};
  };

  double value = 0.0, error = 0.0;
  // running totals, refreshed exactly every so often to limit drift
  {
    auto [v, e] = totals();
    value = v;
    error = e;
  }
  std::size_t iterations = 0;
  while (error > std::max(opts.abs_floor, opts.rel_tol * std::abs(value)) && heap.size() < opts.max_segments) {
    const detail::Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    const auto left = detail::kronrod15(f, worst.a, mid);
    const auto right = detail::kronrod15(f, mid, worst.b);
    out.evaluations += 30;
    heap.push(left);
    heap.push(right);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    if (++iterations % 64 == 0) {
      auto [v, e] = totals();
      value = v;
      error = e;
    }
  }
  auto [v, e] = totals();
  out.value = v;
  out.abs_error = e;
  out.converged = e <= std::max(opts.abs_floor, opts.rel_tol * std::abs(v));
  return out;
}

/// As integrate_adaptive, but throws QuadratureError carrying the achieved
/// estimate when the tolerance is not met.
template <class F>
double integrate(F&& f, double a, double b, QuadOptions opts = {},
                 std::span<const double> breakpoints = {}) {
  const QuadResult r = integrate_adaptive(f, a, b, opts, breakpoints);
  if (!r.converged) throw QuadratureError("adaptive quadrature did not converge", r);
  return r.value;
}

}  // namespace bbm
