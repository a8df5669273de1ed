#pragma once

// Checkable forms of the Bessel inequalities behind the cone kernel
// estimates, plus accuracy probes (Wronskian, Olver truncation).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "conetrace/bessel.hpp"
#include "conetrace/errors.hpp"
#include "conetrace/olver.hpp"

namespace conetrace {

inline constexpr double kInequalitySlack = 1e-12;

// |x (I K' - I' K) + 1|, evaluated relative to I_nu K_nu so that neither
// factor has to be representable on its own.
inline double wronskian_residual(double nu, double x) {
  const auto a = bessel_ik(nu, x);
  const auto b = bessel_ik(nu + 1.0, x);
  const double ri = (b.i / a.i).value();
  const double rk = (b.k / a.k).value();
  const double dk = -rk + nu / x;  // K'/K
  const double di = ri + nu / x;   // I'/I
  const double product = (a.i * a.k).value();
  return std::abs(x * product * (dk - di) + 1.0);
}

struct BariczResult {
  bool exponential = false;  // K(yz)/K(xz) > e^{z(x-y)}
  bool power = false;        // K(yz)/K(xz) > (x/y)^nu
  double exponential_margin = 0.0;  // log ratio minus log bound
  double power_margin = 0.0;
};

inline BariczResult baricz_ratio_bounds(double nu, double x, double y, double z) {
  if (!(x > y && y > 0.0 && z > 0.0 && nu >= 0.0)) {
    throw PreconditionError("baricz_ratio_bounds: need x > y > 0, z > 0, nu >= 0");
  }
  const double log_ratio = log_bessel_k(nu, y * z) - log_bessel_k(nu, x * z);
  BariczResult r;
  r.exponential_margin = log_ratio - z * (x - y);
  r.power_margin = log_ratio - nu * std::log(x / y);
  // Relative slack on the ratio is additive slack on its log.
  r.exponential = r.exponential_margin > -kInequalitySlack;
  r.power = r.power_margin > -kInequalitySlack;
  return r;
}

// K(xz) < K(yz) (y/x)^{2nu/3} e^{-z(x-y)/3}; returns the log margin
// (positive when the bound holds).
inline double composite_bound_margin(double nu, double x, double y, double z) {
  if (!(x > y && y > 0.0 && z > 0.0 && nu >= 0.0)) {
    throw PreconditionError("composite_bound_margin: need x > y > 0, z > 0, nu >= 0");
  }
  const double bound =
      log_bessel_k(nu, y * z) + (2.0 * nu / 3.0) * std::log(y / x) - z * (x - y) / 3.0;
  return bound - log_bessel_k(nu, x * z);
}

struct InequalityReport {
  std::size_t samples = 0;
  std::size_t exponential_failures = 0;
  std::size_t power_failures = 0;
  std::size_t composite_failures = 0;
  double min_exponential_margin = INFINITY;
  double min_power_margin = INFINITY;
  double min_composite_margin = INFINITY;
};

// Randomized check over 0 < y < x <= 1, nu in (0, 20], z in (0, 50].
inline InequalityReport bessel_inequality_suite(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  InequalityReport rep;
  rep.samples = samples;
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = 1.0 - unit(rng);          // (0, 1]
    const double y = x * (1.0 - unit(rng));    // (0, x]
    const double nu = 20.0 * (1.0 - unit(rng));
    const double z = 50.0 * (1.0 - unit(rng));
    if (!(y < x)) continue;
    const auto b = baricz_ratio_bounds(nu, x, y, z);
    const double c = composite_bound_margin(nu, x, y, z);
    rep.exponential_failures += b.exponential ? 0 : 1;
    rep.power_failures += b.power ? 0 : 1;
    rep.composite_failures += c > -kInequalitySlack ? 0 : 1;
    rep.min_exponential_margin = std::min(rep.min_exponential_margin, b.exponential_margin);
    rep.min_power_margin = std::min(rep.min_power_margin, b.power_margin);
    rep.min_composite_margin = std::min(rep.min_composite_margin, c);
  }
  return rep;
}

// Empirical C in y K_nu(yz) I_nu(yz) <= C / z over a grid.
inline double diagonal_product_constant(const std::vector<double>& nus,
                                        const std::vector<double>& ys,
                                        const std::vector<double>& zs) {
  double c = 0.0;
  for (double nu : nus) {
    for (double y : ys) {
      for (double z : zs) {
        const auto ik = bessel_ik(nu, y * z);
        c = std::max(c, z * y * (ik.i * ik.k).value());
      }
    }
  }
  return c;
}

// |truncated uniform expansion / exact - 1| at x = nu t.
inline double olver_truncation_error(BesselKind kind, double nu, double t, std::size_t terms) {
  const auto f = OlverFrame::at(t);
  const double series = olver_series(kind, nu, f.p, terms);
  const auto ik = bessel_ik(nu, nu * t);
  const double exact = kind == BesselKind::I ? ik.i.log() : ik.k.log();
  return std::abs(std::expm1(olver_log_prefactor(kind, nu, f) + std::log(series) - exact));
}

// Log-spaced grid of `count` points on [0.01, 100].
inline std::vector<double> olver_t_grid(std::size_t count = 81) {
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) {
    t[i] = std::pow(10.0, -2.0 + 4.0 * double(i) / double(count - 1));
  }
  return t;
}

inline double olver_sup_truncation_error(BesselKind kind, double nu, std::size_t terms) {
  double sup = 0.0;
  for (double t : olver_t_grid()) sup = std::max(sup, olver_truncation_error(kind, nu, t, terms));
  return sup;
}

}  // namespace conetrace
