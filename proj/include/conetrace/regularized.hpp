#pragma once

// Regularized (finite-part) integrals over (0, inf). Power-log terms
// c t^alpha log^j t that are not integrable at an end are integrated by
// analytic continuation in alpha:
//   int_0^1 t^alpha log^j t dt  = (-1)^j j! / (alpha+1)^{j+1},
//   int_1^inf t^alpha log^j t dt = (-1)^{j+1} j! / (alpha+1)^{j+1},
// and the finite part at alpha = -1 is 0 for every j.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "conetrace/errors.hpp"
#include "conetrace/quadrature.hpp"

namespace conetrace {

// coeff * t^alpha * log^j t
struct PowerLogTerm {
  double alpha = 0.0;
  int j = 0;
  double coeff = 0.0;

  double operator()(double t) const {
    const double lg = std::log(t);
    return coeff * std::pow(t, alpha) * std::pow(lg, j);
  }
};

// f(t) = sum(terms) + O(t^remainder) at one end of (0, inf).
struct EndExpansion {
  std::vector<PowerLogTerm> terms;
  double remainder = std::numeric_limits<double>::quiet_NaN();  // NaN: f integrable, no data
};

// Antiderivative of t^beta log^j t normalized so that the continued value
// at 0 (beta > -1) or at inf (beta < -1) vanishes:
// F = t^{beta+1} sum_{i<=j} (-1)^{j-i} j!/i! log^i t / (beta+1)^{j-i+1};
// beta = -1 gives log^{j+1} t / (j+1).
inline double power_log_antiderivative(double beta, int j, double t) {
  const double lg = std::log(t);
  if (beta == -1.0) return std::pow(lg, j + 1) / double(j + 1);
  const double b1 = beta + 1.0;
  double sum = 0.0;
  double fact_ratio = 1.0;  // j!/i!
  for (int i = j; i >= 0; --i) {
    const double sign = ((j - i) % 2 == 0) ? 1.0 : -1.0;
    sum += sign * fact_ratio * std::pow(lg, i) / std::pow(b1, j - i + 1);
    fact_ratio *= double(i);
  }
  return std::pow(t, b1) * sum;
}

// Continued int_a^b of t^beta log^j t; a = 0 or b = inf use the continuation.
inline double power_log_integral(double beta, int j, double a, double b) {
  const double upper = std::isinf(b) ? 0.0 : power_log_antiderivative(beta, j, b);
  const double lower = (a == 0.0) ? 0.0 : power_log_antiderivative(beta, j, a);
  return upper - lower;
}

struct RegularizedOptions {
  quad::Tolerance tol{1e-300, 1e-14, 4000};
};

struct RegularizedResult {
  double value = 0.0;
  double error = 0.0;
  double zero_switch = 0.0;     // below this the zero expansion replaces f
  double infinity_switch = 0.0; // above this the infinity expansion replaces f
};

namespace detail {

inline double sum_terms(const std::vector<PowerLogTerm>& terms, double t) {
  double s = 0.0;
  for (const auto& term : terms) s += term(t);
  return s;
}

inline double sum_abs_terms(const std::vector<PowerLogTerm>& terms, double t) {
  double s = 0.0;
  for (const auto& term : terms) s += std::abs(term(t));
  return s;
}

}  // namespace detail

// Finite part of int_0^inf f. f must be integrable on compacts of (0, inf);
// `at_zero` / `at_infinity` list the terms that carry the end behaviour.
// Terms with alpha <= -1 at 0 and alpha >= -1 at inf are subtracted and
// continued; the remainders must be integrable (remainder > -1 at 0,
// < -1 at inf), otherwise CapabilityError.
inline RegularizedResult regularized_integral_detailed(const std::function<double(double)>& f,
                                                       const EndExpansion& at_infinity = {},
                                                       const EndExpansion& at_zero = {},
                                                       const RegularizedOptions& opt = {}) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (!at_infinity.terms.empty() && !(at_infinity.remainder < -1.0)) {
    throw CapabilityError("regularized_integral: expansion at infinity too shallow (remainder " +
                          std::to_string(at_infinity.remainder) + " must be < -1)");
  }
  if (!at_zero.terms.empty() && !(at_zero.remainder > -1.0)) {
    throw CapabilityError("regularized_integral: expansion at zero too shallow (remainder " +
                          std::to_string(at_zero.remainder) + " must be > -1)");
  }
  RegularizedResult out;

  // ---- [1, inf) ----
  std::vector<PowerLogTerm> inf_sub, inf_keep;
  for (const auto& t : at_infinity.terms) (t.alpha >= -1.0 ? inf_sub : inf_keep).push_back(t);
  double upper_part = 0.0;
  if (at_infinity.terms.empty()) {
    // Geometric panels [X, 4X]; once successive panels shrink by a steady
    // ratio q the rest is estimated as a geometric series.
    double lo = 1.0, prev = 0.0;
    int steady = 0;
    for (; lo < 1e300; lo *= 4.0) {
      const auto r = quad::integrate(f, lo, 4.0 * lo, opt.tol);
      upper_part += r.value;
      out.error += r.abs_error;
      const double q = (prev != 0.0) ? r.value / prev : 0.0;
      prev = r.value;
      if (r.value == 0.0) break;
      if (q > 0.0 && q < 1.0) {
        const double rest = r.value * q / (1.0 - q);
        if (std::abs(rest) < eps * std::abs(upper_part) && ++steady >= 2) break;
      } else {
        steady = 0;
      }
    }
    out.infinity_switch = std::numeric_limits<double>::infinity();
  } else {
    // Switch point Z: balance cancellation noise on [1, Z] against the
    // neglected remainder beyond Z.
    double best_z = 2.0, best_err = std::numeric_limits<double>::infinity();
    for (double z = 2.0; z < 1e12; z *= 2.0) {
      const double rem = std::abs(f(z) - detail::sum_terms(at_infinity.terms, z));
      const double trunc = rem * z / std::max(-1.0 - at_infinity.remainder, 1e-3);
      const double noise = eps * detail::sum_abs_terms(inf_sub, z) * z;
      const double est = trunc + noise;
      if (est < best_err) {
        best_err = est;
        best_z = z;
      }
    }
    out.infinity_switch = best_z;
    auto g = [&](double t) { return f(t) - detail::sum_terms(inf_sub, t); };
    double lo = 1.0;
    while (lo < best_z) {
      const double hi = std::min(best_z, 4.0 * lo);
      const auto r = quad::integrate(g, lo, hi, opt.tol);
      upper_part += r.value;
      out.error += r.abs_error;
      lo = hi;
    }
    for (const auto& t : inf_keep) {
      upper_part += t.coeff * power_log_integral(t.alpha, t.j, best_z, INFINITY);
    }
    for (const auto& t : inf_sub) {
      upper_part += t.coeff * power_log_integral(t.alpha, t.j, 1.0, INFINITY);
    }
    out.error += best_err;
  }

  // ---- (0, 1] ----
  std::vector<PowerLogTerm> zero_sub, zero_keep;
  for (const auto& t : at_zero.terms) (t.alpha <= -1.0 ? zero_sub : zero_keep).push_back(t);
  double lower_part = 0.0;
  if (at_zero.terms.empty()) {
    const auto r = quad::integrate(f, 0.0, 1.0, opt.tol);
    lower_part = r.value;
    out.error += r.abs_error;
  } else {
    double best_d = 0.5, best_err = std::numeric_limits<double>::infinity();
    for (double d = 0.5; d > 1e-12; d *= 0.5) {
      const double rem = std::abs(f(d) - detail::sum_terms(at_zero.terms, d));
      const double trunc = rem * d / std::max(at_zero.remainder + 1.0, 1e-3);
      const double noise = eps * detail::sum_abs_terms(zero_sub, d) * d;
      const double est = trunc + noise;
      if (est < best_err) {
        best_err = est;
        best_d = d;
      }
    }
    out.zero_switch = best_d;
    auto g = [&](double t) { return f(t) - detail::sum_terms(zero_sub, t); };
    double hi = 1.0;
    while (hi > best_d) {
      const double lo = std::max(best_d, 0.25 * hi);
      const auto r = quad::integrate(g, lo, hi, opt.tol);
      lower_part += r.value;
      out.error += r.abs_error;
      hi = lo;
    }
    for (const auto& t : zero_keep) {
      lower_part += t.coeff * power_log_integral(t.alpha, t.j, 0.0, best_d);
    }
    for (const auto& t : zero_sub) {
      lower_part += t.coeff * power_log_integral(t.alpha, t.j, 0.0, 1.0);
    }
    out.error += best_err;
  }
  out.value = lower_part + upper_part;
  return out;
}

inline double regularized_integral(const std::function<double(double)>& f,
                                   const EndExpansion& at_infinity = {},
                                   const EndExpansion& at_zero = {},
                                   const RegularizedOptions& opt = {}) {
  return regularized_integral_detailed(f, at_infinity, at_zero, opt).value;
}

}  // namespace conetrace
