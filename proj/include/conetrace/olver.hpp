#pragma once

// Uniform large-order (Debye/Olver) expansions of the modified Bessel
// functions:
//
//   I_nu(nu t) ~ e^{nu eta} / ((2 pi nu)^{1/2} (1+t^2)^{1/4}) * (1 + sum U_k(p) / nu^k)
//   K_nu(nu t) ~ (pi / (2 nu))^{1/2} e^{-nu eta} / (1+t^2)^{1/4} * (1 + sum U_k(p) / (-nu)^k)
//
// with eta(t) = sqrt(1+t^2) + log(t / (1 + sqrt(1+t^2))) and p = 1/sqrt(1+t^2).
// The U_k are generated once with exact rational arithmetic.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "conetrace/errors.hpp"

namespace conetrace {

// Highest U_k index available. Olver evaluation in bessel.hpp needs ~16 at
// the smallest order it is used for.
inline constexpr std::size_t kOlverMaxTerms = 20;

using Rational = boost::multiprecision::cpp_rational;

// Dense polynomial in p, coefficient i multiplies p^i.
struct RationalPolynomial {
  std::vector<Rational> coeffs;

  std::size_t degree() const {
    for (std::size_t i = coeffs.size(); i-- > 0;) {
      if (coeffs[i] != 0) return i;
    }
    return 0;
  }

  double operator()(double p) const {
    double acc = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) {
      acc = acc * p + static_cast<double>(coeffs[i]);
    }
    return acc;
  }
};

namespace detail {

// U_{k+1}(p) = 1/2 p^2 (1-p^2) U_k'(p) + 1/8 int_0^p (1 - 5t^2) U_k(t) dt
inline RationalPolynomial next_u_polynomial(const RationalPolynomial& u) {
  const std::size_t n = u.coeffs.size();
  RationalPolynomial next;
  next.coeffs.assign(n + 3, Rational(0));
  for (std::size_t i = 1; i < n; ++i) {
    const Rational d = u.coeffs[i] * static_cast<long>(i);  // p^{i-1}
    next.coeffs[i + 1] += d / 2;                            // p^2 / 2
    next.coeffs[i + 3] -= d / 2;                            // -p^4 / 2
  }
  for (std::size_t i = 0; i < n; ++i) {
    // int_0^p t^i (1 - 5 t^2) dt = p^{i+1}/(i+1) - 5 p^{i+3}/(i+3)
    next.coeffs[i + 1] += u.coeffs[i] / (8 * static_cast<long>(i + 1));
    next.coeffs[i + 3] -= 5 * u.coeffs[i] / (8 * static_cast<long>(i + 3));
  }
  return next;
}

struct UTable {
  std::vector<RationalPolynomial> exact;
  // Double coefficients, same layout, for fast evaluation.
  std::vector<std::vector<double>> coeffs;

  UTable() {
    RationalPolynomial u;
    u.coeffs = {Rational(1)};
    exact.push_back(u);
    for (std::size_t k = 1; k <= kOlverMaxTerms; ++k) {
      u = next_u_polynomial(u);
      exact.push_back(u);
    }
    for (const auto& poly : exact) {
      std::vector<double> c(poly.coeffs.size());
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<double>(poly.coeffs[i]);
      coeffs.push_back(std::move(c));
    }
  }
};

inline const UTable& u_table() {
  static const UTable table;
  return table;
}

inline double eval_u(std::size_t k, double p) {
  const auto& c = u_table().coeffs[k];
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * p + c[i];
  return acc;
}

}  // namespace detail

// U_0 .. U_{max_k} with exact rational coefficients.
inline std::vector<RationalPolynomial> u_polynomials(std::size_t max_k) {
  if (max_k > kOlverMaxTerms) {
    throw CapabilityError("u_polynomials: max_k exceeds " + std::to_string(kOlverMaxTerms));
  }
  const auto& exact = detail::u_table().exact;
  return {exact.begin(), exact.begin() + static_cast<std::ptrdiff_t>(max_k + 1)};
}

enum class BesselKind { I, K };

// Scaled argument frame for the uniform expansion at t = x / nu.
struct OlverFrame {
  double t = 0.0;
  double eta = 0.0;
  double p = 1.0;
  double root = 1.0;  // sqrt(1 + t^2)

  static OlverFrame at(double t) {
    if (!(t > 0.0)) throw DomainError("OlverFrame: t must be positive");
    OlverFrame f;
    f.t = t;
    f.root = std::hypot(1.0, t);
    f.p = 1.0 / f.root;
    // log(t / (1 + root)), written to stay accurate for small t.
    f.eta = f.root + std::log(t) - std::log1p(f.root);
    return f;
  }
};

// Truncated series 1 + sum_{k=1}^{terms-1} (+-1)^k U_k(p) / nu^k.
inline double olver_series(BesselKind kind, double nu, double p, std::size_t terms) {
  double sum = 0.0;
  double scale = 1.0;
  const double step = (kind == BesselKind::I ? 1.0 : -1.0) / nu;
  for (std::size_t k = 0; k < terms; ++k) {
    sum += detail::eval_u(k, p) * scale;
    scale *= step;
  }
  return sum;
}

// Log of the prefactor (everything except the bracketed series) of the
// expansion of I_nu(nu t) or K_nu(nu t).
inline double olver_log_prefactor(BesselKind kind, double nu, const OlverFrame& f) {
  const double quarter = 0.5 * std::log(f.root);
  if (kind == BesselKind::I) {
    return nu * f.eta - 0.5 * std::log(2.0 * std::numbers::pi * nu) - quarter;
  }
  return -nu * f.eta + 0.5 * std::log(std::numbers::pi / (2.0 * nu)) - quarter;
}

// Value of the uniform expansion truncated to `terms` terms (terms = 1 keeps
// only the leading "1"). Overflows to inf like the function it approximates.
inline double olver_uniform(BesselKind kind, double nu, double t, std::size_t terms) {
  if (!(nu > 0.0)) throw DomainError("olver_uniform: nu must be positive");
  if (terms == 0 || terms > kOlverMaxTerms + 1) {
    throw CapabilityError("olver_uniform: terms must be in [1, " +
                          std::to_string(kOlverMaxTerms + 1) + "]");
  }
  const auto f = OlverFrame::at(t);
  return std::exp(olver_log_prefactor(kind, nu, f)) * olver_series(kind, nu, f.p, terms);
}

}  // namespace conetrace
