#pragma once

// Single-mode resolvent traces for the Bessel operator
//   l_nu = -d^2/dx^2 + (nu^2 - 1/4)/x^2  on (0, 1],  Dirichlet at x = 1,
// Friedrichs extension at x = 0. Its eigenvalues are j_{nu,k}^2.
//
// Three independent evaluations of  h_m(nu, w) = sum_k (j_{nu,k}^2 + w)^{-m}:
//   * kernel quadrature of the Green kernel diagonal (m = 1), with
//     Chebyshev differentiation in w for m >= 2;
//   * brute-force eigenvalue sums over Bessel zeros;
//   * the closed form sum_k 1/(j_{nu,k}^2 + z^2) = I_{nu+1}(z) / (2 z I_nu(z)),
//     differentiated in w through the Riccati equation of the ratio, with the
//     Rayleigh-sum series for w below the lowest eigenvalue.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "conetrace/bessel.hpp"
#include "conetrace/bessel_zeros.hpp"
#include "conetrace/errors.hpp"
#include "conetrace/quadrature.hpp"
#include "conetrace/series.hpp"

namespace conetrace {

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

inline void check_mode_args(double nu, double z, const char* who) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw DomainError(std::string(who) + ": nu must be finite and >= 0");
  }
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw DomainError(std::string(who) + ": z must be finite and > 0");
  }
}

inline std::string mode_context(double nu, double z) {
  return "nu=" + std::to_string(nu) + ", z=" + std::to_string(z);
}

// sqrt(xy) [K(xz) - K(z)/I(z) I(xz)] I(yz) for y <= x, as a signed value
// times exp(log_scale).
inline Scaled green_kernel_scaled(double nu, double z, double x, double y) {
  const auto at_x = bessel_ik(nu, x * z);
  const auto at_y = bessel_ik(nu, y * z);
  const auto at_1 = bessel_ik(nu, z);
  // Bring both bracket terms to the common scale exp(-xz).
  const double a = at_x.k.mantissa * std::exp(at_x.k.log_scale + x * z);
  const Scaled b = at_1.k / at_1.i * at_x.i;
  const double bracket = a - b.mantissa * std::exp(b.log_scale + x * z);
  Scaled out{bracket * std::sqrt(x * y), -x * z};
  return out * at_y.i;
}

}  // namespace detail

// Dirichlet Green kernel of l_nu + z^2 at (x, y); symmetric in x and y.
inline double mode_kernel(double nu, double z, double x, double y) {
  detail::check_mode_args(nu, z, "mode_kernel");
  if (!(x > 0.0 && x <= 1.0 && y > 0.0 && y <= 1.0)) {
    throw DomainError("mode_kernel: x and y must lie in (0, 1]");
  }
  if (x < y) std::swap(x, y);
  if (x == 1.0) return 0.0;
  return detail::green_kernel_scaled(nu, z, x, y).value();
}

// log |mode_kernel|, finite even where the kernel underflows; -inf at x = 1.
inline double log_abs_mode_kernel(double nu, double z, double x, double y) {
  detail::check_mode_args(nu, z, "log_abs_mode_kernel");
  if (x < y) std::swap(x, y);
  if (x == 1.0) return -std::numeric_limits<double>::infinity();
  const auto s = detail::green_kernel_scaled(nu, z, x, y);
  return std::log(std::abs(s.mantissa)) + s.log_scale;
}

// Diagonal of the Green kernel, G(x, x).
inline double mode_kernel_diagonal(double nu, double z, double x) {
  if (x >= 1.0) return 0.0;
  const auto at_x = bessel_ik(nu, x * z);
  const auto at_1 = bessel_ik(nu, z);
  const double ki = (at_x.k * at_x.i).value();
  const double ratio = (at_1.k / at_1.i * at_x.i * at_x.i).value();
  return x * (ki - ratio);
}

// sum_k (j_{nu,k}^2 + z^2)^{-1} = int_0^1 G(x, x) dx by adaptive quadrature in
// u = -log x.
inline Estimate mode_trace(double nu, double z) {
  detail::check_mode_args(nu, z, "mode_trace");
  auto integrand = [&](double u) {
    const double x = std::exp(-u);
    return x * mode_kernel_diagonal(nu, z, x);
  };
  quad::Tolerance tol{1e-15, 1e-13, 20000};
  // Split where the boundary layer of width ~1/z ends.
  const double knee = std::min(1.0, 4.0 / z);
  const auto near = quad::integrate(integrand, 0.0, knee, tol);
  const auto far = quad::integrate(integrand, knee, 45.0, tol);
  if (!near.converged || !far.converged) {
    throw ConvergenceError("mode_trace: quadrature did not converge (" +
                           detail::mode_context(nu, z) + ")");
  }
  return {near.value + far.value, near.abs_error + far.abs_error};
}

// Rayleigh sums sigma_n = sum_k j_{nu,k}^{-2n}, stored as
// t_n = sigma_n (4(nu+1))^n with t_1 = 1 and (nu+n) t_n = sum_{k<n} t_k t_{n-k}.
class RayleighSums {
 public:
  explicit RayleighSums(double nu) : nu_(nu), t_{0.0, 1.0} {}

  double scaled(std::size_t n) {
    while (t_.size() <= n) {
      const std::size_t k = t_.size();
      double s = 0.0;
      for (std::size_t i = 1; i < k; ++i) s += t_[i] * t_[k - i];
      t_.push_back(s / (nu_ + static_cast<double>(k)));
    }
    return t_[n];
  }

  double sigma(std::size_t n) { return scaled(n) * std::pow(4.0 * (nu_ + 1.0), -double(n)); }

 private:
  double nu_;
  std::vector<double> t_;
};

// h_m(nu, w) = sum_r C(m+r-1, r) (-w)^r sigma_{m+r}; converges for w < j_{nu,1}^2.
inline double rayleigh_resolvent_power(double nu, double w, int m) {
  RayleighSums sums(nu);
  const double scale = 4.0 * (nu + 1.0);
  const double q = w / scale;
  double binom = 1.0;
  double power = 1.0;
  double total = 0.0;
  for (std::size_t r = 0; r < 5000; ++r) {
    if (r > 0) {
      binom *= static_cast<double>(m + r - 1) / static_cast<double>(r);
      power *= -q;
    }
    const double term = binom * power * sums.scaled(static_cast<std::size_t>(m) + r);
    total += term;
    if (r > 4 && std::abs(term) < 1e-17 * std::abs(total)) {
      return total * std::pow(scale, -double(m));
    }
  }
  throw ConvergenceError("rayleigh_resolvent_power: series did not converge (nu=" +
                         std::to_string(nu) + ", w=" + std::to_string(w) + ")");
}

// Region where the Rayleigh series is used: w <= (nu + 2)^2 / 4, well
// inside the disc of convergence |w| < j_{nu,1}^2.
inline bool rayleigh_region(double nu, double w) { return w <= 0.25 * (nu + 2.0) * (nu + 2.0); }

namespace detail {

// h_m from the ratio R = I_{nu+1}/I_nu: h_1 = R / (2z), and higher m from
// the Taylor jet of R given by z R' = z - (2nu+1) R - z R^2.
inline double riccati_resolvent_power(double nu, double z, int m) {
  const double w = z * z;
  const std::size_t order = static_cast<std::size_t>(m - 1);
  const Scaled ratio = bessel_ik(nu + 1.0, z).i / bessel_ik(nu, z).i;
  const double r0 = ratio.value();
  if (order == 0) return r0 / (2.0 * z);

  // Taylor coefficients of R(z0 + d) from z R' = z - (2nu+1) R - z R^2.
  const double a = 2.0 * nu + 1.0;
  std::vector<double> r(order + 1, 0.0), p(order + 1, 0.0);
  r[0] = r0;
  for (std::size_t n = 0; n < order; ++n) {
    p[n] = 0.0;
    for (std::size_t i = 0; i <= n; ++i) p[n] += r[i] * r[n - i];
    double rhs = (n == 0 ? z : 0.0) + (n == 1 ? 1.0 : 0.0) - a * r[n] - z * p[n] -
                 (n >= 1 ? p[n - 1] : 0.0) - static_cast<double>(n) * r[n];
    r[n + 1] = rhs / (z * static_cast<double>(n + 1));
  }
  // w = z0^2 + e, z(e) = sqrt(z0^2 + e), d(e) = z(e) - z0.
  Jet zs = sqrt(Jet::variable(order, w));
  Jet d = zs;
  d[0] = 0.0;
  const Jet big_r = Jet::compose(r, d);
  const Jet t = big_r / (2.0 * zs);
  const double sign = (order % 2 == 0) ? 1.0 : -1.0;
  return sign * t[order];
}


// For nu >= kOlverMinOrder: h_m = (-1)^{m-1} m [w^m] F with
// F(w) = log(z^{-nu} I_nu(z)) from the uniform expansion, as a Taylor jet in w.
// The leading part differentiates to 1 / (2 (nu + sqrt(nu^2 + w))).
inline double olver_resolvent_power(double nu, double w, int m) {
  const std::size_t order = static_cast<std::size_t>(m);
  Jet e = Jet::variable(order, nu * nu + w);
  const Jet q = sqrt(e);
  Jet lead = Jet(order, 2.0 * nu) + 2.0 * q;
  const Jet b = Jet(order, 1.0) / lead;
  const Jet p = Jet(order, nu) / q;

  const auto& table = u_table().coeffs;
  Jet series(order, 0.0);
  double scale = 1.0;
  for (std::size_t k = 0; k <= kOlverMaxTerms; ++k) {
    const auto& c = table[k];
    Jet u(order, 0.0);
    for (std::size_t i = c.size(); i-- > 0;) {
      u = u * p;
      u[0] += c[i];
    }
    series = series + scale * u;
    if (k >= 2 && std::abs(u[0] * scale) < 1e-18 * std::abs(series[0])) break;
    scale /= nu;
  }
  std::vector<double> log_s(order + 1, 0.0);
  for (std::size_t n = 1; n <= order; ++n) {
    double acc = double(n) * series[n];
    for (std::size_t k = 1; k < n; ++k) acc -= double(k) * log_s[k] * series[n - k];
    log_s[n] = acc / (double(n) * series[0]);
  }
  const double base = nu * nu + w;
  const double quarter = -0.25 * ((m % 2 == 1) ? 1.0 : -1.0) / (double(m) * std::pow(base, m));
  const double coeff = b[order - 1] / double(m) + quarter + log_s[order];
  const double sign = (m % 2 == 1) ? 1.0 : -1.0;
  return sign * double(m) * coeff;
}

}  // namespace detail

// Closed-form h_m(nu, z^2), any m >= 1.
inline double mode_trace_closed(double nu, double z, int m) {
  detail::check_mode_args(nu, z, "mode_trace_closed");
  if (m < 1) throw DomainError("mode_trace_closed: m must be >= 1");
  const double w = z * z;
  if (rayleigh_region(nu, w)) return rayleigh_resolvent_power(nu, w, m);
  if (nu >= kOlverMinOrder) return detail::olver_resolvent_power(nu, w, m);
  return detail::riccati_resolvent_power(nu, z, m);
}

// Kernel route for general m: quadrature for m = 1; for m >= 2 the
// (m-1)-th w-derivative of the quadrature trace by Chebyshev differentiation
// on a stencil around w = z^2 that stays clear of the poles at -j_{nu,k}^2.
inline Estimate mode_trace_kernel(double nu, double z, int m, std::size_t stencil = 14) {
  detail::check_mode_args(nu, z, "mode_trace_kernel");
  if (m < 1) throw DomainError("mode_trace_kernel: m must be >= 1");
  if (m == 1) return mode_trace(nu, z);
  const double w = z * z;
  const double reach = w + (nu + 2.0) * (nu + 2.0) * 0.5;
  const double half = std::min(0.5 * w, 0.125 * reach);
  double err = 0.0;
  auto f = [&](double ww) {
    auto e = mode_trace(nu, std::sqrt(ww));
    err = std::max(err, e.error);
    return e.value;
  };
  const int order = m - 1;
  const double deriv = quad::chebyshev_derivative(f, w, half, stencil, order);
  double factorial = 1.0;
  for (int i = 2; i <= order; ++i) factorial *= i;
  const double sign = (order % 2 == 0) ? 1.0 : -1.0;
  const double value = sign * deriv / factorial;
  // Quadrature noise amplified by the differentiation stencil.
  const double amplification =
      std::pow(static_cast<double>(stencil), 2.0 * order) / std::pow(half, order) / factorial;
  return {value, err * amplification};
}

struct EigensumOptions {
  std::size_t min_exact = 200;     // exact zeros: max(min_exact, 2 nu + 50)
  std::size_t mcmahon_factor = 8;  // McMahon zeros up to mcmahon_factor * exact
};

inline std::size_t eigensum_exact_count(double nu, const EigensumOptions& opt = {}) {
  return std::max<std::size_t>(opt.min_exact, static_cast<std::size_t>(2.0 * nu) + 50);
}

// sum_k (j_{nu,k}^2 + z^2)^{-m} from Bessel zeros: exact zeros first, then
// McMahon zeros, then an integral tail with its first Euler-Maclaurin
// correction. Any real power m > 1/2 is accepted.
inline Estimate mode_eigensum(double nu, double z, double m, const EigensumOptions& opt = {},
                              ZeroCache& cache = ZeroCache::global()) {
  detail::check_mode_args(nu, z, "mode_eigensum");
  if (!(m > 0.5)) throw DomainError("mode_eigensum: power must exceed 1/2");
  const double w = z * z;
  const std::size_t exact = eigensum_exact_count(nu, opt);
  const auto zeros = cache.get(nu, exact);
  auto term = [&](double j) { return std::pow(j * j + w, -m); };

  double exact_sum = 0.0;
  for (std::size_t k = exact; k-- > 0;) exact_sum += term((*zeros)[k]);

  const std::size_t upper = opt.mcmahon_factor * exact;
  double mcmahon_sum = 0.0;
  for (std::size_t k = upper; k > exact; --k) mcmahon_sum += term(mcmahon_zero(nu, double(k)));

  auto f = [&](double k) { return term(mcmahon_zero(nu, k)); };
  const double a = static_cast<double>(upper) + 0.5;
  const auto tail = quad::integrate_to_infinity(f, a, quad::Tolerance{0.0, 1e-13, 4000});
  const double hd = 0.25;
  const double fprime = (f(a + hd) - f(a - hd)) / (2.0 * hd);
  const double correction = fprime / 24.0;

  // McMahon truncation: the omitted term is of the size of the last one kept.
  const double mu = 4.0 * nu * nu;
  const double b = (double(exact + 1) + 0.5 * nu - 0.25) * std::numbers::pi;
  const double last = 64.0 * std::abs((mu - 1.0) * (((6949.0 * mu - 153855.0) * mu + 1585743.0) * mu -
                                                   6277237.0)) /
                      105.0 / std::pow(8.0 * b, 7.0);
  const double zero_rel = last / b;
  const double err = 2.0 * m * zero_rel * (mcmahon_sum + tail.value) + std::abs(correction) * 1e-2 +
                     tail.abs_error + 1e-16 * exact_sum * std::sqrt(double(exact));
  return {exact_sum + mcmahon_sum + tail.value + correction, err};
}

// h_s(nu, z^2) for integer or half-integer s >= 1. Half-integer powers come
// from the integer power s + 1/2 through
//   h_s(w) = Gamma(s + 1/2) / (sqrt(pi) Gamma(s)) * int_R h_{s+1/2}(w + sigma^2) dsigma,
// with sigma = r tan(theta) and Gauss-Legendre in theta.
inline double mode_trace_closed_power(double nu, double z, double s) {
  detail::check_mode_args(nu, z, "mode_trace_closed_power");
  if (!(s >= 1.0) || std::floor(2.0 * s) != 2.0 * s)
    throw DomainError("mode_trace_closed_power: power must be an integer or half-integer >= 1");
  if (std::floor(s) == s) return mode_trace_closed(nu, z, static_cast<int>(s));
  const int m = static_cast<int>(s + 0.5);
  static const quad::Rule rule = quad::gauss_legendre(48);
  const double w = z * z;
  const double r = std::sqrt(w + (nu + 1.0) * (nu + 1.0));
  const double half_pi = 0.5 * std::numbers::pi;
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double theta = 0.5 * half_pi * (rule.nodes[i] + 1.0);
    const double c = std::cos(theta);
    const double sigma = r * std::tan(theta);
    sum += rule.weights[i] * mode_trace_closed(nu, std::sqrt(w + sigma * sigma), m) * r / (c * c);
  }
  const double integral = 2.0 * 0.5 * half_pi * sum;
  return std::exp(std::lgamma(s + 0.5) - std::lgamma(s)) / std::sqrt(std::numbers::pi) * integral;
}

}  // namespace conetrace
