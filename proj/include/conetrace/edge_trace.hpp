#pragma once

// tr (Delta + z^2)^{-m} on the flat model edge T^b x Cone(F), T^b the torus
// of side L. Fourier modes on the torus shift the spectral parameter:
//   edge(z) = sum_{sigma in (2 pi / L) Z^b} cone_m(sqrt(|sigma|^2 + z^2)).
//
// Two evaluations are provided.
//   continuum: Poisson summation over the lattice, eigenvalue by eigenvalue,
//     (L/2pi)^b pi^{b/2} Gamma(m - b/2) / Gamma(m) sum_lambda (lambda + z^2)^{-(m - b/2)}
//     times 1 + sum_{k != 0} phi(|k| L sqrt(lambda + z^2)). The phi terms
//     fall off like e^{-L z} and are added from the Bessel zeros they need.
//   lattice: the explicit sum for b = 1, with the far lattice replaced by
//     the continuum integral and its midpoint Euler-Maclaurin corrections.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "conetrace/bessel.hpp"
#include "conetrace/bessel_zeros.hpp"
#include "conetrace/cone_trace.hpp"
#include "conetrace/errors.hpp"
#include "conetrace/hash.hpp"
#include "conetrace/parallel.hpp"
#include "conetrace/quadrature.hpp"

namespace conetrace {

struct EdgeProblem {
  ConeProblem cone;
  int b = 1;
  double L = 2.0 * std::numbers::pi;
  int m() const { return cone.m; }
  int dim() const { return cone.dim() + b; }
};

enum class EdgeMethod { continuum, lattice };

struct EdgeOptions {
  ConeOptions cone;
  EdgeMethod method = EdgeMethod::continuum;
  // Poisson terms with argument above this are dropped (phi ~ e^{-t}).
  double poisson_cut = 45.0;
  // Lattice method: explicit points |k| <= max(lattice_min, lattice_slope (z + 2) L / 2pi).
  std::size_t lattice_min = 16;
  double lattice_slope = 4.0;
};

inline void validate(const EdgeProblem& p) {
  validate(p.cone.spectrum);
  if (p.b < 0) throw DomainError("EdgeProblem: b must be >= 0");
  if (!(p.L > 0.0) || !std::isfinite(p.L)) throw DomainError("EdgeProblem: L must be > 0");
  check_trace_class(p.m(), p.dim(), "edge_trace");
}

// (L/2pi)^b pi^{b/2} Gamma(m - b/2) / Gamma(m).
inline double edge_prefactor(int b, double L, int m) {
  const double s = m - 0.5 * b;
  return std::pow(L / (2.0 * std::numbers::pi), b) * std::pow(std::numbers::pi, 0.5 * b) *
         std::exp(std::lgamma(s) - std::lgamma(double(m)));
}

// Fourier transform of (a + |sigma|^2)^{-m} on R^b at |xi| = t / sqrt(a),
// relative to its value at 0: 2^{1-s} t^s K_s(t) / Gamma(s), s = m - b/2.
inline double poisson_ratio(double s, double t) {
  if (t > 700.0) return 0.0;
  return std::exp((1.0 - s) * std::numbers::ln2 + s * std::log(t) + log_bessel_k(s, t) -
                  std::lgamma(s));
}

namespace detail {

// Nonzero points of Z^b with |k| < radius, ordered by |k| then lexicographically.
inline std::vector<std::vector<int>> lattice_points(int b, double radius, bool with_origin) {
  std::vector<std::vector<int>> out;
  const int r = static_cast<int>(std::floor(radius));
  std::vector<int> k(static_cast<std::size_t>(b), -r);
  if (b == 0) {
    if (with_origin) out.push_back({});
    return out;
  }
  while (true) {
    double n2 = 0.0;
    bool origin = true;
    for (int v : k) {
      n2 += double(v) * double(v);
      origin = origin && v == 0;
    }
    if (n2 < radius * radius && (with_origin || !origin)) out.push_back(k);
    std::size_t i = 0;
    while (i < k.size() && k[i] == r) k[i++] = -r;
    if (i == k.size()) break;
    ++k[i];
  }
  auto norm2 = [](const std::vector<int>& v) {
    long long s = 0;
    for (int x : v) s += static_cast<long long>(x) * x;
    return s;
  };
  std::sort(out.begin(), out.end(), [&](const auto& a, const auto& c) {
    const auto na = norm2(a), nc = norm2(c);
    return na != nc ? na < nc : a < c;
  });
  return out;
}

// Listed modes plus the arithmetic extension up to `reach`.
inline std::vector<Mode> modes_below(const CrossSectionSpectrum& s, double reach) {
  std::vector<Mode> modes;
  for (const auto& e : s.entries) {
    if (e.nu < reach) modes.push_back({e.nu, double(e.mult)});
  }
  if (s.tail.kind == TailModel::Kind::arithmetic) {
    for (std::uint64_t n = s.tail.last_index + 1; double(n) * s.tail.spacing < reach; ++n) {
      modes.push_back({double(n) * s.tail.spacing, s.tail.mult});
    }
  }
  return modes;
}

// Sum of the Poisson terms (without the edge prefactor), and a bound on the
// part left out. `base` is the continuum sum they correct.
inline std::pair<double, double> poisson_terms(const EdgeProblem& p, double z, double base,
                                               const EdgeOptions& opt) {
  const double s = p.m() - 0.5 * p.b;
  const double w = z * z;
  if (p.L * z >= opt.poisson_cut) {
    double bound = 0.0;
    for (const auto& k : lattice_points(p.b, 2.0, false)) {
      double n2 = 0.0;
      for (int v : k) n2 += double(v) * double(v);
      bound += poisson_ratio(s, std::sqrt(n2) * p.L * z);
    }
    return {0.0, bound * base};
  }
  const double root_bound = opt.poisson_cut / p.L;  // sqrt(lambda + z^2) below this
  const double j_bound = std::sqrt(root_bound * root_bound - w);
  const auto& spec = p.cone.spectrum;
  const auto modes = modes_below(spec, j_bound);
  const auto points = lattice_points(p.b, opt.poisson_cut / (p.L * z), false);
  double total = 0.0;
  for (std::size_t i = modes.size(); i-- > 0;) {
    const auto zeros = bessel_zeros_below(modes[i].nu, j_bound, ZeroKind::j);
    for (std::size_t q = zeros.size(); q-- > 0;) {
      const double a = zeros[q] * zeros[q] + w;
      double c = 0.0;
      for (std::size_t r = points.size(); r-- > 0;) {
        double n2 = 0.0;
        for (int v : points[r]) n2 += double(v) * double(v);
        c += poisson_ratio(s, std::sqrt(n2 * a) * p.L);
      }
      total += modes[i].mult * std::pow(a, -s) * c;
    }
  }
  // Modes beyond the listed spectrum that a Weyl tail stands for.
  double bound = 0.0;
  if (spec.tail.kind != TailModel::Kind::arithmetic && spec.complete_below < j_bound) {
    const double a = spec.complete_below * spec.complete_below + w;
    bound = poisson_ratio(s, p.L * std::sqrt(a)) * double(points.size()) * base;
  }
  return {total, bound};
}

inline TraceValue edge_continuum(const EdgeProblem& p, double z, const EdgeOptions& opt) {
  const double s = p.m() - 0.5 * p.b;
  const double pref = edge_prefactor(p.b, p.L, p.m());
  auto out = mode_power_sum(p.cone.spectrum, z, s, opt.cone);
  const auto [poisson, poisson_bound] = poisson_terms(p, z, out.value, opt);
  out.value = pref * (out.value + poisson);
  out.tail *= pref;
  out.tail_bound = pref * (out.tail_bound + poisson_bound);
  out.error *= pref;
  return out;
}

inline TraceValue edge_lattice(const EdgeProblem& p, double z, const EdgeOptions& opt) {
  if (p.b != 1) throw CapabilityError("edge_trace: the lattice method needs b = 1");
  const double step = 2.0 * std::numbers::pi / p.L;
  const auto count = std::max<std::size_t>(
      opt.lattice_min, static_cast<std::size_t>(std::ceil(opt.lattice_slope * (z + 2.0) / step)));
  ConeOptions inner = opt.cone;
  inner.workers = 1;
  auto f = [&](double sigma) { return cone_trace(p.cone, std::hypot(sigma, z), inner); };

  const auto values = parallel_map(count + 1, opt.cone.workers,
                                   [&](std::size_t k) { return f(double(k) * step); });
  TraceValue out;
  // Ordered by |k|, then k: 0, -1, 1, -2, 2, ...
  double explicit_sum = values[0].value;
  out.error = values[0].error;
  for (std::size_t k = 1; k <= count; ++k) {
    explicit_sum += values[k].value;
    explicit_sum += values[k].value;
    out.error += 2.0 * values[k].error;
    out.tail_bound += 2.0 * values[k].tail_bound;
  }
  out.tail_bound += values[0].tail_bound;

  // sum_{k > K} g(k), g(k) = F(k step): int_{K+1/2}^inf g + g'/24 - 7 g'''/5760.
  const double radius = (double(count) + 0.5) * step;
  ConeOptions closed = inner;
  closed.quadrature_nu_max = -1.0;
  const auto whole = mode_power_sum(p.cone.spectrum, z, p.m() - 0.5, closed);
  const double whole_integral =
      whole.value * std::sqrt(std::numbers::pi) *
      std::exp(std::lgamma(p.m() - 0.5) - std::lgamma(double(p.m())));  // int_R F dsigma
  const double panel_width = std::max(z, 2.0);
  const auto panels = static_cast<std::size_t>(std::ceil(radius / panel_width));
  static const quad::Rule rule = quad::gauss_legendre(16);
  const double h = radius / double(panels);
  const auto inner_values = parallel_map(panels * rule.nodes.size(), opt.cone.workers,
                                         [&](std::size_t i) {
                                           const std::size_t panel = i / rule.nodes.size();
                                           const std::size_t node = i % rule.nodes.size();
                                           const double x = h * (double(panel) + 0.5 +
                                                                 0.5 * rule.nodes[node]);
                                           return rule.weights[node] * f(x).value;
                                         });
  double near_integral = 0.0;
  for (std::size_t i = inner_values.size(); i-- > 0;) near_integral += inner_values[i];
  near_integral *= 0.5 * h;
  const double far_integral = 0.5 * whole_integral - near_integral;  // int_radius^inf F

  auto g = [&](double k) { return f(k * step).value; };
  const double a = double(count) + 0.5;
  const double half = std::min(0.5 * a, 8.0);
  const double d1 = quad::chebyshev_derivative(g, a, half, 18, 1);
  const double d3 = quad::chebyshev_derivative(g, a, half, 18, 3);
  const double one_side = far_integral / step + d1 / 24.0 - 7.0 * d3 / 5760.0;
  out.tail = 2.0 * one_side;
  out.tail_bound += 2.0 * (std::abs(7.0 * d3 / 5760.0) + (whole.tail_bound + whole.error) *
                                                            whole_integral / whole.value / step);
  out.value = explicit_sum + out.tail;
  return out;
}

}  // namespace detail

inline TraceValue edge_trace(const EdgeProblem& p, double z, const EdgeOptions& opt = {}) {
  validate(p);
  if (!(z > 0.0) || !std::isfinite(z)) throw DomainError("edge_trace: z must be > 0");
  if (p.b == 0) return cone_trace(p.cone, z, opt.cone);
  if (opt.method == EdgeMethod::lattice) return detail::edge_lattice(p, z, opt);
  return detail::edge_continuum(p, z, opt);
}

// Sum of cone traces over the lattice box |k_i| <= radius, reduced by |k|
// then lexicographically. No far-lattice tail.
inline double edge_lattice_box(const EdgeProblem& p, double z, int radius,
                               const ConeOptions& opt = {}) {
  validate(p);
  const double step = 2.0 * std::numbers::pi / p.L;
  auto points = detail::lattice_points(p.b, std::sqrt(double(p.b)) * radius + 0.5, true);
  std::erase_if(points, [&](const auto& k) {
    return std::any_of(k.begin(), k.end(), [&](int v) { return std::abs(v) > radius; });
  });
  ConeOptions inner = opt;
  inner.workers = 1;
  const auto values = parallel_map(points.size(), opt.workers, [&](std::size_t i) {
    double n2 = 0.0;
    for (int v : points[i]) n2 += double(v) * double(v);
    return cone_trace(p.cone, std::sqrt(n2 * step * step + z * z), inner).value;
  });
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

// Direct double loop over the lattice box and the listed modes, closed-form
// mode traces. Only the listed entries enter.
inline double naive_edge_sum(const EdgeProblem& p, double z, int radius) {
  const double step = 2.0 * std::numbers::pi / p.L;
  double sum = 0.0;
  std::vector<int> k(static_cast<std::size_t>(p.b), -radius);
  while (true) {
    double n2 = 0.0;
    for (int v : k) n2 += double(v) * double(v);
    const double zeta = std::sqrt(n2 * step * step + z * z);
    for (const auto& e : p.cone.spectrum.entries) {
      sum += double(e.mult) * mode_trace_closed(e.nu, zeta, p.m());
    }
    std::size_t i = 0;
    while (i < k.size() && k[i] == radius) k[i++] = -radius;
    if (i == k.size()) break;
    ++k[i];
  }
  return sum;
}

inline std::string edge_model_hash(const EdgeProblem& p) {
  return sha256_hex(spectrum_hash(p.cone.spectrum) + "\nedge b=" + std::to_string(p.b) +
                    " L=" + format_double(p.L));
}

inline TraceSamples sample_edge_trace(const EdgeProblem& p, const std::vector<double>& z_grid,
                                      const EdgeOptions& opt = {}) {
  TraceSamples out;
  out.route = Route::lattice;
  out.m = p.m();
  out.z_grid = z_grid;
  out.model_hash = edge_model_hash(p);
  for (double z : z_grid) {
    const auto v = edge_trace(p, z, opt);
    out.values.push_back(v.value);
    out.tail_bound.push_back(v.tail_bound + v.error);
  }
  validate(out);
  return out;
}

}  // namespace conetrace
