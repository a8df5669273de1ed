#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include "conetrace/errors.hpp"

namespace conetrace::quad {

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t evaluations = 0;
  bool converged = true;
};

struct Tolerance {
  double abs = 1e-13;
  double rel = 1e-12;
  std::size_t max_intervals = 4000;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes on [-1, 1]: {node, gauss weight, kronrod weight}.
inline constexpr std::array<std::array<double, 3>, 8> kGK15 = {{
    {0.000000000000000000000000000000000, 0.417959183673469387755102040816327,
     0.209482141084727828012999174891714},
    {0.405845151377397166906606412076961, 0.381830050505118944950369775488975,
     0.190350578064785409913256402421014},
    {0.741531185599394439863864773280788, 0.279705391489276667901467771423780,
     0.140653259715525918745189590510238},
    {0.949107912342758524526189684047851, 0.129484966168869693270611432679082,
     0.063092092629978553290700663189204},
    {0.207784955007898467600689403773245, 0.0, 0.204432940075298892414161999234649},
    {0.586087235467691130294144845693013, 0.0, 0.169004726639267902826583426598550},
    {0.864864423359769072789712788640926, 0.0, 0.104790010322250183839876322541518},
    {0.991455371120812639206854697526329, 0.0, 0.022935322010529224963732008058970},
}};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gk15(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double f0 = f(center);
  double gauss = kGK15[0][1] * f0;
  double kronrod = kGK15[0][2] * f0;
  for (std::size_t i = 1; i < kGK15.size(); ++i) {
    const double dx = half * kGK15[i][0];
    const double pair = f(center - dx) + f(center + dx);
    gauss += kGK15[i][1] * pair;
    kronrod += kGK15[i][2] * pair;
  }
  gauss *= half;
  kronrod *= half;
  return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod (7,15) on a finite interval. The interval
// with the largest error estimate is bisected first; the subdivision order
// depends only on the integrand, so results are deterministic.
template <class F>
Result integrate(const F& f, double a, double b, const Tolerance& tol = {}) {
  Result out;
  if (a == b) return out;
  std::priority_queue<detail::Segment> heap;
  auto first = detail::gk15(f, a, b);
  out.evaluations = 15;
  double total = first.value;
  double error = first.error;
  heap.push(first);
  std::size_t intervals = 1;
  while (error > std::max(tol.abs, tol.rel * std::abs(total))) {
    if (intervals >= tol.max_intervals) {
      out.converged = false;
      break;
    }
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    auto left = detail::gk15(f, worst.a, mid);
    auto right = detail::gk15(f, mid, worst.b);
    out.evaluations += 30;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++intervals;
    if (mid <= worst.a || mid >= worst.b) {
      out.converged = false;
      break;
    }
  }
  // Re-sum from the leaves so the running total does not accumulate
  // cancellation from the subtract-and-add updates.
  total = 0.0;
  error = 0.0;
  std::vector<detail::Segment> leaves;
  leaves.reserve(heap.size());
  while (!heap.empty()) {
    leaves.push_back(heap.top());
    heap.pop();
  }
  std::sort(leaves.begin(), leaves.end(),
            [](const auto& l, const auto& r) { return l.a < r.a; });
  for (const auto& s : leaves) {
    total += s.value;
    error += s.error;
  }
  out.value = total;
  out.abs_error = error;
  return out;
}

// Same as integrate() but throws ConvergenceError when the tolerance is not met.
template <class F>
Result integrate_or_throw(const F& f, double a, double b, const Tolerance& tol,
                          const std::string& context) {
  auto r = integrate(f, a, b, tol);
  if (!r.converged) {
    throw ConvergenceError("quadrature did not converge (" + context +
                           "), error estimate " + std::to_string(r.abs_error));
  }
  return r;
}

// Integral over [a, inf) through the map x = a + s/(1-s), s in [0, 1).
template <class F>
Result integrate_to_infinity(const F& f, double a, const Tolerance& tol = {}) {
  auto mapped = [&](double s) {
    if (s >= 1.0) return 0.0;
    const double one_minus = 1.0 - s;
    const double x = a + s / one_minus;
    return f(x) / (one_minus * one_minus);
  };
  return integrate(mapped, 0.0, 1.0, tol);
}

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline Rule gauss_legendre(std::size_t n) {
  Rule rule{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      derivative = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / derivative;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * derivative * derivative);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

// d-th derivative at `center` of the degree-(n-1) Chebyshev interpolant of f
// on [center - half_width, center + half_width], sampled at first-kind
// Chebyshev points.
template <class F>
double chebyshev_derivative(const F& f, double center, double half_width,
                            std::size_t n, int order) {
  if (n < 2 || order < 0) throw PreconditionError("chebyshev_derivative: bad stencil");
  std::vector<double> values(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double theta = std::numbers::pi * (j + 0.5) / n;
    values[j] = f(center + half_width * std::cos(theta));
  }
  std::vector<double> coeff(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s += values[j] * std::cos(std::numbers::pi * k * (j + 0.5) / n);
    }
    coeff[k] = 2.0 * s / n;
  }
  coeff[0] *= 0.5;
  for (int d = 0; d < order; ++d) {
    std::vector<double> next(n, 0.0);
    for (std::size_t k = n - 1; k >= 1; --k) {
      const double above = (k + 1 < n) ? next[k + 1] : 0.0;
      next[k - 1] = above + 2.0 * k * coeff[k];
    }
    next[0] *= 0.5;
    coeff.swap(next);
  }
  // Evaluate at x = 0: T_k(0) = cos(k pi / 2).
  double value = 0.0;
  for (std::size_t k = 0; k < n; k += 4) value += coeff[k];
  for (std::size_t k = 2; k < n; k += 4) value -= coeff[k];
  return value / std::pow(half_width, order);
}

}  // namespace conetrace::quad
