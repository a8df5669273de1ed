#pragma once

// Large-z expansion of int_0^inf sigma(x, xz) dx for symbols with an
// expansion sigma ~ sum sigma_{alpha j}(x) zeta^alpha log^j zeta as zeta -> inf:
//
//   sum_k z^{-k-1} reg int_0^inf zeta^k / k! sigma^{(k)}(0, zeta) dzeta
// + sum_{alpha,j} reg int_0^inf sigma_{alpha j}(x) (xz)^alpha log^j(xz) dx
// + sum_{alpha = -1, -2, ...} sum_j sigma_{alpha j}^{(-alpha-1)}(0)
//       z^alpha log^{j+1} z / ((j+1) (-alpha-1)!)
//
// sigma^{(k)} is the k-th x-derivative.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "conetrace/errors.hpp"
#include "conetrace/quadrature.hpp"
#include "conetrace/regularized.hpp"

namespace conetrace {

// ---- expansion series ----

struct SeriesTerm {
  double power = 0.0;
  int logpow = 0;
  double coeff = 0.0;
  bool operator==(const SeriesTerm&) const = default;
};

// sum coeff z^power log^logpow z, sorted by descending power then ascending
// log power, keys unique.
struct ExpansionSeries {
  std::vector<SeriesTerm> terms;
  double z_min = 0.0;  // validity window, when known
  double z_max = std::numeric_limits<double>::infinity();
  std::map<std::string, double> diagnostics;

  void add(double power, int logpow, double coeff) {
    for (auto& t : terms) {
      if (t.power == power && t.logpow == logpow) {
        t.coeff += coeff;
        return;
      }
    }
    terms.push_back({power, logpow, coeff});
    normalize();
  }

  void normalize() {
    std::sort(terms.begin(), terms.end(), [](const SeriesTerm& a, const SeriesTerm& b) {
      return a.power != b.power ? a.power > b.power : a.logpow < b.logpow;
    });
  }

  double coefficient(double power, int logpow) const {
    for (const auto& t : terms) {
      if (std::abs(t.power - power) < 1e-12 && t.logpow == logpow) return t.coeff;
    }
    return 0.0;
  }

  std::vector<double> powers() const {
    std::vector<double> p;
    for (const auto& t : terms) {
      if (p.empty() || p.back() != t.power) p.push_back(t.power);
    }
    return p;
  }

  // Terms with power >= min_power.
  double evaluate(double z, double min_power = -std::numeric_limits<double>::infinity()) const {
    const double lg = std::log(z);
    double s = 0.0;
    for (std::size_t i = terms.size(); i-- > 0;) {
      const auto& t = terms[i];
      if (t.power < min_power) continue;
      s += t.coeff * std::pow(z, t.power) * std::pow(lg, t.logpow);
    }
    return s;
  }
};

inline void to_json(nlohmann::json& j, const ExpansionSeries& s) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : s.terms) {
    terms.push_back({{"power", t.power}, {"logpow", t.logpow}, {"coeff", t.coeff}});
  }
  j = nlohmann::json{{"terms", terms}, {"diagnostics", s.diagnostics}};
  j["window"] = {{"z_min", s.z_min},
                 {"z_max", std::isinf(s.z_max) ? nlohmann::json(nullptr) : nlohmann::json(s.z_max)}};
}

inline void from_json(const nlohmann::json& j, ExpansionSeries& s) {
  s = ExpansionSeries{};
  for (const auto& t : j.at("terms")) {
    s.terms.push_back({t.at("power").get<double>(), t.at("logpow").get<int>(),
                       t.at("coeff").get<double>()});
  }
  s.normalize();
  if (j.contains("window")) {
    s.z_min = j["window"].at("z_min").get<double>();
    const auto& zmax = j["window"].at("z_max");
    s.z_max = zmax.is_null() ? std::numeric_limits<double>::infinity() : zmax.get<double>();
  }
  if (j.contains("diagnostics")) s.diagnostics = j["diagnostics"].get<std::map<std::string, double>>();
}

// ---- symbols ----

struct ZetaTerm {
  double alpha = 0.0;
  int j = 0;
  std::function<double(double)> coeff;      // sigma_{alpha j}(x)
  std::function<double(int)> taylor_at_0;   // k -> sigma_{alpha j}^{(k)}(0)
};

struct SymbolProvider {
  std::function<double(double, double)> eval;           // sigma(x, zeta)
  std::function<double(int, double)> x_deriv_at_0;      // (k, zeta) -> sigma^{(k)}(0, zeta); optional
  std::vector<ZetaTerm> zeta_expansion;                  // by decreasing alpha
  double remainder_exponent = -std::numeric_limits<double>::infinity();
  double x_max = 40.0;  // sigma_{alpha j} decay is checked out to here
};

struct SalOrders {
  int order = 4;             // keep terms with power >= -order
  int taylor_terms = 24;     // Taylor terms of sigma_{alpha j} at 0 beyond the singular ones
  double fd_step = 1e-2;     // finite-difference step when x_deriv_at_0 is not supplied
};

// Finite-difference x-derivative with one Richardson step; used when a
// symbol does not supply its derivatives.
inline double fd_x_derivative(const std::function<double(double, double)>& eval, int k, double x,
                              double zeta, double h) {
  if (k == 0) return eval(x, zeta);
  auto central = [&](double step) {
    double s = 0.0;
    double binom = 1.0;
    for (int i = 0; i <= k; ++i) {
      const double sign = (i % 2 == 0) ? 1.0 : -1.0;
      s += sign * binom * eval(x + (0.5 * k - i) * step, zeta);
      binom = binom * double(k - i) / double(i + 1);
    }
    return s / std::pow(step, k);
  };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

inline double x_derivative_at_0(const SymbolProvider& s, int k, double zeta, const SalOrders& o) {
  if (s.x_deriv_at_0) return s.x_deriv_at_0(k, zeta);
  return fd_x_derivative(s.eval, k, 0.0, zeta, o.fd_step);
}

// Separable symbol phi(x) g(zeta), g ~ sum c t^alpha log^j t with the given remainder.
inline SymbolProvider separable_symbol(std::function<double(double)> phi,
                                       std::function<double(int)> phi_taylor,
                                       std::function<double(double)> g,
                                       std::vector<PowerLogTerm> g_expansion, double remainder,
                                       double x_max = 40.0) {
  SymbolProvider s;
  s.eval = [phi, g](double x, double zeta) { return phi(x) * g(zeta); };
  s.x_deriv_at_0 = [phi_taylor, g](int k, double zeta) { return phi_taylor(k) * g(zeta); };
  for (const auto& t : g_expansion) {
    const double c = t.coeff;
    s.zeta_expansion.push_back(
        {t.alpha, t.j, [phi, c](double x) { return c * phi(x); },
         [phi_taylor, c](int k) { return c * phi_taylor(k); }});
  }
  s.remainder_exponent = remainder;
  s.x_max = x_max;
  return s;
}

// a s1 + b s2, merging expansion terms with equal (alpha, j).
inline SymbolProvider linear_combination(double a, const SymbolProvider& s1, double b,
                                         const SymbolProvider& s2) {
  SymbolProvider out;
  out.eval = [=](double x, double z) { return a * s1.eval(x, z) + b * s2.eval(x, z); };
  if (s1.x_deriv_at_0 && s2.x_deriv_at_0) {
    out.x_deriv_at_0 = [=](int k, double z) {
      return a * s1.x_deriv_at_0(k, z) + b * s2.x_deriv_at_0(k, z);
    };
  }
  auto scaled = [](double c, const ZetaTerm& t) {
    return ZetaTerm{t.alpha, t.j, [c, f = t.coeff](double x) { return c * f(x); },
                    [c, f = t.taylor_at_0](int k) { return c * f(k); }};
  };
  std::vector<ZetaTerm> terms;
  for (const auto& t : s1.zeta_expansion) terms.push_back(scaled(a, t));
  for (const auto& t : s2.zeta_expansion) {
    auto it = std::find_if(terms.begin(), terms.end(),
                           [&](const ZetaTerm& u) { return u.alpha == t.alpha && u.j == t.j; });
    if (it == terms.end()) {
      terms.push_back(scaled(b, t));
    } else {
      it->coeff = [f = it->coeff, g = t.coeff, b](double x) { return f(x) + b * g(x); };
      it->taylor_at_0 = [f = it->taylor_at_0, g = t.taylor_at_0, b](int k) {
        return f(k) + b * g(k);
      };
    }
  }
  std::stable_sort(terms.begin(), terms.end(),
                   [](const ZetaTerm& u, const ZetaTerm& v) { return u.alpha > v.alpha; });
  out.zeta_expansion = std::move(terms);
  out.remainder_exponent = std::max(s1.remainder_exponent, s2.remainder_exponent);
  out.x_max = std::max(s1.x_max, s2.x_max);
  return out;
}

// sigma(x, c zeta), c > 0. Log terms pick up log c through the binomial expansion.
inline SymbolProvider rescale_zeta(const SymbolProvider& s, double c) {
  if (!(c > 0.0)) throw DomainError("rescale_zeta: c must be > 0");
  SymbolProvider out = s;
  out.eval = [e = s.eval, c](double x, double z) { return e(x, c * z); };
  if (s.x_deriv_at_0) out.x_deriv_at_0 = [d = s.x_deriv_at_0, c](int k, double z) { return d(k, c * z); };
  out.zeta_expansion.clear();
  const double lc = std::log(c);
  for (const auto& t : s.zeta_expansion) {
    // c^alpha (log zeta + log c)^j = sum_i binom(j, i) c^alpha log^{j-i} c log^i zeta
    double binom = 1.0;
    for (int i = t.j; i >= 0; --i) {
      const double factor = std::pow(c, t.alpha) * binom * std::pow(lc, t.j - i);
      binom = binom * double(i) / double(t.j - i + 1);
      out.zeta_expansion.push_back({t.alpha, i, [f = t.coeff, factor](double x) { return factor * f(x); },
                                    [f = t.taylor_at_0, factor](int k) { return factor * f(k); }});
    }
  }
  return out;
}

// ---- hypothesis probes ----

struct HypothesisReport {
  bool ok = true;
  std::string violated;  // "a", "b", or "schwartz"
  std::string detail;
  double remainder_constant = 0.0;           // sup |sigma - sum| zeta^{-remainder}
  std::vector<double> integrability_constants;  // C_j, j = 0..order
};

namespace detail {

inline double expansion_at(const SymbolProvider& s, double x, double zeta) {
  const double lg = std::log(zeta);
  double sum = 0.0;
  for (const auto& t : s.zeta_expansion) sum += t.coeff(x) * std::pow(zeta, t.alpha) * std::pow(lg, t.j);
  return sum;
}

// int_eps^1 int_eps^1 y^j |sigma^{(j)}(theta y t, y xi)| dy dt on log panels.
inline double integrability_integral(const SymbolProvider& s, int j, double theta, double xi,
                                     double eps, const SalOrders& o) {
  static const quad::Rule rule = quad::gauss_legendre(12);
  std::vector<std::pair<double, double>> nodes;  // (point, weight) on [eps, 1]
  for (double lo = eps; lo < 1.0; lo *= 10.0) {
    const double hi = std::min(1.0, 10.0 * lo);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      nodes.push_back({lo + 0.5 * (hi - lo) * (rule.nodes[i] + 1.0), 0.5 * (hi - lo) * rule.weights[i]});
    }
  }
  double total = 0.0;
  for (const auto& [y, wy] : nodes) {
    for (const auto& [t, wt] : nodes) {
      const double x = theta * y * t;
      const double d = (j == 0) ? s.eval(x, y * xi)
                                : fd_x_derivative(s.eval, j, x, y * xi, std::min(o.fd_step, 0.5 * y));
      total += wy * wt * std::pow(y, j) * std::abs(d);
    }
  }
  return total;
}

}  // namespace detail

// Numerical checks of the two hypotheses: (a) the zeta-expansion remainder is
// O(zeta^remainder) uniformly for 0 <= x <= zeta / c0, and (b) the double
// integrals of y^j |sigma^{(j)}(theta y t, y xi)| stay bounded as the lower
// limit goes to 0. Also checks that each sigma_{alpha j} decays by x_max.
inline HypothesisReport probe_hypotheses(const SymbolProvider& s, const SalOrders& o = {},
                                         double c0 = 1.0) {
  HypothesisReport rep;
  // Schwartz decay of the coefficients.
  for (const auto& t : s.zeta_expansion) {
    double peak = 0.0;
    for (double x = 0.0; x <= 1.0; x += 0.125) peak = std::max(peak, std::abs(t.coeff(x)));
    const double far = std::abs(t.coeff(s.x_max)) * std::pow(1.0 + s.x_max, 4.0);
    if (!std::isfinite(far) || far > 1e-6 * std::max(peak, 1e-300)) {
      rep.ok = false;
      rep.violated = "schwartz";
      rep.detail = "sigma_{" + std::to_string(t.alpha) + "," + std::to_string(t.j) +
                   "} does not decay by x_max";
      return rep;
    }
  }
  // (b) integrability.
  for (int j = 0; j <= std::max(o.order, 1); ++j) {
    double worst = 0.0;
    for (double theta : {0.25, 1.0}) {
      const double coarse = detail::integrability_integral(s, j, theta, c0, 1e-4, o);
      const double fine = detail::integrability_integral(s, j, theta, c0, 1e-8, o);
      if (!std::isfinite(fine) || fine > 1.5 * coarse + 1e-12) {
        rep.ok = false;
        rep.violated = "b";
        rep.detail = "integrability integral for j = " + std::to_string(j) +
                     " grows as the lower limit shrinks (" + std::to_string(coarse) + " -> " +
                     std::to_string(fine) + ")";
        return rep;
      }
      worst = std::max(worst, fine);
    }
    rep.integrability_constants.push_back(worst);
  }
  // (a) remainder bound.
  if (std::isfinite(s.remainder_exponent)) {
    std::vector<double> constants;
    for (double zeta = 2.0; zeta <= 256.0; zeta *= 2.0) {
      double sup = 0.0;
      bool resolved = false;
      const double x_top = std::min(zeta / c0, s.x_max);
      for (int i = 0; i <= 8; ++i) {
        const double x = x_top * i / 8.0;
        const double v = s.eval(x, zeta);
        const double r = std::abs(v - detail::expansion_at(s, x, zeta));
        if (r > 1e-11 * std::abs(v)) resolved = true;
        sup = std::max(sup, r * std::pow(zeta, -s.remainder_exponent));
      }
      if (resolved || constants.empty()) constants.push_back(sup);
    }
    const double first = *std::max_element(constants.begin(),
                                            constants.begin() + std::min<std::ptrdiff_t>(3, constants.size()));
    rep.remainder_constant = *std::max_element(constants.begin(), constants.end());
    if (!std::isfinite(rep.remainder_constant) || rep.remainder_constant > 4.0 * first + 1e-300) {
      rep.ok = false;
      rep.violated = "a";
      rep.detail = "expansion remainder is not O(zeta^" + std::to_string(s.remainder_exponent) + ")";
      return rep;
    }
  }
  return rep;
}

// ---- the expansion ----

inline ExpansionSeries sal_expand(const SymbolProvider& s, const SalOrders& o = {}) {
  const auto hyp = probe_hypotheses(s, o);
  if (!hyp.ok) throw HypothesisError("sal_expand: " + hyp.detail, hyp.violated);
  const double floor_power = -double(o.order);
  if (!(s.remainder_exponent < floor_power)) {
    throw CapabilityError("sal_expand: zeta expansion must be supplied below z^" +
                          std::to_string(int(floor_power)) + " (remainder exponent " +
                          std::to_string(s.remainder_exponent) + ")");
  }
  ExpansionSeries out;
  out.diagnostics["order"] = o.order;
  out.diagnostics["remainder_constant"] = hyp.remainder_constant;

  // Family 1: z^{-k-1} reg int zeta^k / k! sigma^{(k)}(0, zeta).
  double kfact = 1.0;
  for (int k = 0; -double(k) - 1.0 >= floor_power; ++k) {
    if (k > 0) kfact *= k;
    EndExpansion inf;
    inf.remainder = s.remainder_exponent + k;
    for (const auto& t : s.zeta_expansion) {
      inf.terms.push_back({t.alpha + k, t.j, t.taylor_at_0(k) / kfact});
    }
    auto f = [&](double zeta) { return std::pow(zeta, k) / kfact * x_derivative_at_0(s, k, zeta, o); };
    const auto r = regularized_integral_detailed(f, inf);
    out.add(-double(k) - 1.0, 0, r.value);
  }

  // Family 2: reg int sigma_{alpha j}(x) (xz)^alpha log^j(xz) dx
  //   = z^alpha sum_i binom(j, i) log^{j-i} z reg int sigma_{alpha j}(x) x^alpha log^i x dx.
  for (const auto& t : s.zeta_expansion) {
    if (t.alpha < floor_power) continue;
    const int singular = std::max(0, int(std::ceil(-t.alpha)));
    const int taylor = singular + o.taylor_terms;
    double binom = 1.0;
    for (int i = 0; i <= t.j; ++i) {
      EndExpansion zero;
      zero.remainder = t.alpha + taylor + 1;
      double fact = 1.0;
      for (int k = 0; k <= taylor; ++k) {
        if (k > 0) fact *= k;
        const double d = t.taylor_at_0(k);
        if (d != 0.0) zero.terms.push_back({t.alpha + k, i, d / fact});
      }
      auto f = [&](double x) { return t.coeff(x) * std::pow(x, t.alpha) * std::pow(std::log(x), i); };
      const double integral = regularized_integral(f, {}, zero);
      out.add(t.alpha, t.j - i, binom * integral);
      binom = binom * double(t.j - i) / double(i + 1);
    }
  }

  // Family 3: integer alpha <= -1.
  for (const auto& t : s.zeta_expansion) {
    if (t.alpha < floor_power || t.alpha > -1.0 || std::floor(t.alpha) != t.alpha) continue;
    const int n = int(-t.alpha) - 1;
    const double nfact = std::tgamma(double(n) + 1.0);
    out.add(t.alpha, t.j + 1, t.taylor_at_0(n) / (double(t.j + 1) * nfact));
  }
  return out;
}

// ---- verification against direct quadrature ----

// int_0^inf sigma(x, x z) dx by adaptive quadrature on geometric panels.
inline double direct_sal_integral(const SymbolProvider& s, double z) {
  auto f = [&](double x) { return s.eval(x, x * z); };
  const quad::Tolerance tol{1e-300, 1e-15, 4000};
  double a = 1.0 / z;
  double total = quad::integrate(f, 0.0, a, tol).value;
  while (a < s.x_max) {
    const double b = std::min(4.0 * a, s.x_max);
    total += quad::integrate(f, a, b, tol).value;
    a = b;
  }
  total += quad::integrate_to_infinity(f, s.x_max, tol).value;
  return total;
}

struct SalOrderCheck {
  double subtracted_through = 0.0;  // powers >= this are subtracted
  double expected_slope = 0.0;      // next power in the series
  double slope = 0.0;               // fitted d log|residual| / d log z
  bool pass = false;
  std::vector<double> residuals;
};

struct SalDiagnostics {
  HypothesisReport hypotheses;
  ExpansionSeries series;
  std::vector<double> z_grid;
  std::vector<double> direct;
  std::vector<SalOrderCheck> orders;
  double max_abs_residual = 0.0;  // after all terms
  bool pass = false;
};

inline double loglog_slope(const std::vector<double>& z, const std::vector<double>& r) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x = std::log(z[i]), y = std::log(std::abs(r[i]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Compares sal_expand partial sums with direct quadrature on z_grid. Never
// throws for a bad symbol: hypothesis failures are reported.
inline SalDiagnostics verify_sal(const SymbolProvider& s, const SalOrders& o,
                                 const std::vector<double>& z_grid, double slope_tolerance = 0.2) {
  SalDiagnostics d;
  d.z_grid = z_grid;
  d.hypotheses = probe_hypotheses(s, o);
  if (!d.hypotheses.ok) return d;
  d.series = sal_expand(s, o);
  for (double z : z_grid) d.direct.push_back(direct_sal_integral(s, z));
  const auto powers = d.series.powers();
  d.pass = true;
  for (std::size_t n = 0; n < powers.size(); ++n) {
    SalOrderCheck c;
    c.subtracted_through = powers[n];
    c.expected_slope = (n + 1 < powers.size()) ? powers[n + 1] : -double(o.order) - 1.0;
    bool zero = true;
    for (std::size_t i = 0; i < z_grid.size(); ++i) {
      c.residuals.push_back(d.direct[i] - d.series.evaluate(z_grid[i], powers[n]));
      zero = zero && c.residuals.back() == 0.0;
    }
    c.slope = zero ? -INFINITY : loglog_slope(z_grid, c.residuals);
    c.pass = zero || std::abs(c.slope - c.expected_slope) <= slope_tolerance;
    d.pass = d.pass && c.pass;
    d.orders.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < z_grid.size(); ++i) {
    d.max_abs_residual = std::max(d.max_abs_residual, std::abs(d.direct[i] - d.series.evaluate(z_grid[i])));
  }
  d.series.z_min = z_grid.empty() ? 0.0 : z_grid.front();
  d.series.z_max = z_grid.empty() ? INFINITY : z_grid.back();
  return d;
}

// Runs the hypothesis probes on a family of symbols indexed by a parameter
// sample; reports the worst constants.
inline HypothesisReport probe_uniformity(const std::function<SymbolProvider(double)>& family,
                                         const std::vector<double>& samples, const SalOrders& o = {}) {
  HypothesisReport worst;
  for (double sv : samples) {
    auto r = probe_hypotheses(family(sv), o);
    if (!r.ok) {
      r.detail += " (parameter " + std::to_string(sv) + ")";
      return r;
    }
    worst.remainder_constant = std::max(worst.remainder_constant, r.remainder_constant);
    worst.integrability_constants.resize(
        std::max(worst.integrability_constants.size(), r.integrability_constants.size()), 0.0);
    for (std::size_t j = 0; j < r.integrability_constants.size(); ++j) {
      worst.integrability_constants[j] =
          std::max(worst.integrability_constants[j], r.integrability_constants[j]);
    }
  }
  return worst;
}

}  // namespace conetrace
