#pragma once

// Modified Bessel functions I_nu(x), K_nu(x) for real order nu >= 0 and real
// argument x > 0.
//
// Values are carried as mantissa * exp(log_scale) so that products such as
// K_nu(xz) I_nu(yz) never pass through an overflowing intermediate. The
// scaled functions e^{-x} I_nu(x) and e^{x} K_nu(x) are the canonical outputs;
// unscaled values are derived from them.
//
// Evaluation regimes (crossovers pinned by tests/test_bessel.cpp):
//   nu >= kOlverMinOrder              uniform Olver expansion
//   nu <  kOlverMinOrder, x >= hankel  large-argument Hankel expansion
//   otherwise                          Temme series (x <= 2) or Steed's
//                                      continued fraction for K_mu, |mu| <= 1/2,
//                                      upward recurrence in the order, and the
//                                      Wronskian with a continued fraction
//                                      for I_nu'/I_nu.

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "conetrace/errors.hpp"
#include "conetrace/olver.hpp"

namespace conetrace {

inline constexpr double kOlverMinOrder = 20.0;

// mantissa * exp(log_scale)
struct Scaled {
  double mantissa = 0.0;
  double log_scale = 0.0;

  double value() const { return mantissa * std::exp(log_scale); }
  double log() const { return std::log(mantissa) + log_scale; }

  friend Scaled operator*(Scaled a, Scaled b) {
    return {a.mantissa * b.mantissa, a.log_scale + b.log_scale};
  }
  friend Scaled operator/(Scaled a, Scaled b) {
    return {a.mantissa / b.mantissa, a.log_scale - b.log_scale};
  }
  friend Scaled operator*(double s, Scaled a) { return {s * a.mantissa, a.log_scale}; }
};

struct BesselIK {
  Scaled i;
  Scaled k;
};

namespace detail {

inline constexpr double kEps = 1e-16;
inline constexpr double kRenorm = 1e200;

inline constexpr std::array<double, 27> kRecipGammaSeries = {
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
};

// 1/Gamma(1+mu) = sum c_k mu^k. Returns
//   gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu),
//   gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2,
// and the two reciprocals, all free of cancellation at mu = 0.
struct TemmeGammas {
  double gam1, gam2, gampl, gammi;
};

inline TemmeGammas temme_gammas(double mu) {
  double even = 0.0, odd = 0.0;
  const double mu2 = mu * mu;
  for (std::size_t k = kRecipGammaSeries.size(); k-- > 0;) {
    if (k % 2 == 0) {
      even = even * mu2 + kRecipGammaSeries[k];
    } else {
      odd = odd * mu2 + kRecipGammaSeries[k];
    }
  }
  // 1/Gamma(1+mu) = even(mu^2) + mu * odd(mu^2)
  TemmeGammas g;
  g.gam2 = even;
  g.gam1 = -odd;
  g.gampl = even + mu * odd;
  g.gammi = even - mu * odd;
  return g;
}

inline BesselIK olver_ik(double nu, double x) {
  const auto f = OlverFrame::at(x / nu);
  double sum_i = 1.0, sum_k = 1.0, scale = 1.0, last = 1.0;
  for (std::size_t k = 1; k <= kOlverMaxTerms; ++k) {
    scale /= nu;
    const double term = detail::eval_u(k, f.p) * scale;
    sum_i += term;
    sum_k += (k % 2 == 0) ? term : -term;
    last = std::abs(term);
    if (last < 1e-17) break;
  }
  const double pre_i = olver_log_prefactor(BesselKind::I, nu, f);
  const double pre_k = olver_log_prefactor(BesselKind::K, nu, f);
  return {{sum_i, pre_i}, {sum_k, pre_k}};
}

inline double hankel_threshold(double nu) { return std::max(40.0, nu * nu); }

inline BesselIK hankel_ik(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0, sum_i = 1.0, sum_k = 1.0;
  for (int k = 1; k < 400; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = term * (mu - odd * odd) / (8.0 * k * x);
    if (std::abs(next) > std::abs(term) && k > 2) break;
    term = next;
    sum_k += term;
    sum_i += (k % 2 == 0) ? term : -term;
    if (std::abs(term) < 1e-17 * std::abs(sum_k)) break;
  }
  const double root = std::sqrt(2.0 * std::numbers::pi * x);
  return {{sum_i / root, x}, {sum_k * std::numbers::pi / root, -x}};
}

// Temme / Steed evaluation for nu < kOlverMinOrder.
inline BesselIK temme_steed_ik(double nu, double x) {
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  const double mu2 = mu * mu;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;
  constexpr double kTiny = 1e-300;

  // Continued fraction for I_nu'/I_nu (modified Lentz).
  double h = nu * xi;
  if (h < kTiny) h = kTiny;
  double b = xi2 * nu;
  double d = 0.0;
  double c = h;
  int iter = 0;
  const int max_iter = 100000 + static_cast<int>(4.0 * x);
  for (; iter < max_iter; ++iter) {
    b += xi2;
    d = 1.0 / (b + d);
    c = b + 1.0 / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  if (iter >= max_iter) {
    throw ConvergenceError("bessel_ik: continued fraction for I'/I failed at nu=" +
                           std::to_string(nu) + ", x=" + std::to_string(x));
  }

  // Downward recurrence from nu to mu on an unnormalised solution, with
  // renormalisation tracked in ril_log.
  double ril = 1.0;
  double ripl = h;
  double ril_log = 0.0;
  double fact = nu * xi;
  double ratio_up = 0.0;  // I_{mu+1}/I_mu, only meaningful when nl >= 1
  for (int l = nl; l >= 1; --l) {
    const double ritemp = fact * ril + ripl;
    if (l == 1) ratio_up = ril / ritemp;
    fact -= xi;
    ripl = fact * ritemp + ril;
    ril = ritemp;
    if (std::abs(ril) > kRenorm) {
      ril /= kRenorm;
      ripl /= kRenorm;
      ril_log += std::log(kRenorm);
    }
  }
  const double f_mu = ripl / ril;  // I_mu'/I_mu

  // K_mu, K_{mu+1}, scaled by e^{x}.
  double rkmu = 0.0, rk1 = 0.0;
  if (x < 2.0) {
    const double x2 = 0.5 * x;
    const double pimu = std::numbers::pi * mu;
    const double fact0 = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
    double dd = -std::log(x2);
    double e = mu * dd;
    const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
    const auto g = temme_gammas(mu);
    double ff = fact0 * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * dd);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / g.gampl;
    double q = 0.5 / (e * g.gammi);
    double cc = 1.0;
    dd = x2 * x2;
    double sum1 = p;
    int i = 1;
    for (; i < 10000; ++i) {
      ff = (i * ff + p + q) / (i * i - mu2);
      cc *= dd / i;
      p /= (i - mu);
      q /= (i + mu);
      const double del = cc * ff;
      sum += del;
      const double del1 = cc * (p - i * ff);
      sum1 += del1;
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    const double ex = std::exp(x);
    rkmu = sum * ex;
    rk1 = sum1 * xi2 * ex;
  } else {
    double bb = 2.0 * (1.0 + x);
    double dd = 1.0 / bb;
    double hh = dd;
    double delh = dd;
    double q1 = 0.0, q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double cc = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 2;
    for (; i < 100000; ++i) {
      a -= 2 * (i - 1);
      cc = -a * cc / i;
      const double qnew = (q1 - bb * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += cc * qnew;
      bb += 2.0;
      dd = 1.0 / (bb + a * dd);
      delh = (bb * dd - 1.0) * delh;
      hh += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < kEps) break;
    }
    hh = a1 * hh;
    rkmu = std::sqrt(std::numbers::pi / (2.0 * x)) / s;
    rk1 = rkmu * (mu + x + 0.5 - hh) * xi;
  }
  // Wronskian: I_mu (f_mu K_mu - K_mu') = 1/x. For mu < 0 the two leading
  // terms cancel, so use f_mu - mu/x = I_{mu+1}/I_mu from the recurrence.
  const double denom = nl >= 1 ? ratio_up * rkmu + rk1 : f_mu * rkmu - (mu * xi * rkmu - rk1);
  const double rimu = xi / denom;  // e^{-x} I_mu

  // I_nu = I_mu * (unnormalised I_nu / unnormalised I_mu); the unnormalised
  // I_nu was 1.
  Scaled i_nu{rimu / ril, x - ril_log};

  double k_log = -x;  // undo the e^{x} scaling
  for (int i = 1; i <= nl; ++i) {
    const double rktemp = (mu + i) * xi2 * rk1 + rkmu;
    rkmu = rk1;
    rk1 = rktemp;
    if (std::abs(rk1) > kRenorm) {
      rk1 /= kRenorm;
      rkmu /= kRenorm;
      k_log += std::log(kRenorm);
    }
  }
  return {i_nu, {rkmu, k_log}};
}

inline void check_args(double nu, double x, const char* who) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw DomainError(std::string(who) + ": order must be finite and >= 0");
  }
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(who) + ": argument must be finite and > 0");
  }
}

inline double checked_exp(Scaled s, const char* who) {
  const double l = s.log();
  if (l > std::log(std::numeric_limits<double>::max())) {
    throw RangeError(std::string(who) + ": result overflows double");
  }
  return s.value();
}

}  // namespace detail

// I_nu(x) and K_nu(x) as mantissa/exponent pairs.
inline BesselIK bessel_ik(double nu, double x) {
  detail::check_args(nu, x, "bessel_ik");
  if (nu >= kOlverMinOrder) return detail::olver_ik(nu, x);
  if (x >= detail::hankel_threshold(nu)) return detail::hankel_ik(nu, x);
  return detail::temme_steed_ik(nu, x);
}

inline double bessel_i_scaled(double nu, double x) {
  auto s = bessel_ik(nu, x).i;
  s.log_scale -= x;
  return s.value();
}

inline double bessel_k_scaled(double nu, double x) {
  auto s = bessel_ik(nu, x).k;
  s.log_scale += x;
  return s.value();
}

inline double bessel_i(double nu, double x) {
  if (x == 0.0 && nu >= 0.0) return nu == 0.0 ? 1.0 : 0.0;
  return detail::checked_exp(bessel_ik(nu, x).i, "bessel_i");
}

inline double bessel_k(double nu, double x) {
  return detail::checked_exp(bessel_ik(nu, x).k, "bessel_k");
}

inline double log_bessel_i(double nu, double x) { return bessel_ik(nu, x).i.log(); }
inline double log_bessel_k(double nu, double x) { return bessel_ik(nu, x).k.log(); }

// Derivatives through the order recurrences
//   I_nu' = I_{nu+1} + (nu/x) I_nu,   K_nu' = -K_{nu+1} + (nu/x) K_nu.
struct BesselIKDerivatives {
  double i, k, di, dk;
};

inline BesselIKDerivatives bessel_ik_with_derivatives(double nu, double x) {
  const auto a = bessel_ik(nu, x);
  const auto b = bessel_ik(nu + 1.0, x);
  const double i = a.i.value(), k = a.k.value();
  const double i1 = b.i.value(), k1 = b.k.value();
  return {i, k, i1 + nu / x * i, -k1 + nu / x * k};
}

}  // namespace conetrace
