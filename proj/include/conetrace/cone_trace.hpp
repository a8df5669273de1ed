#pragma once

// tr (Delta + z^2)^{-m} on the truncated model cone (0,1] x F with a
// Dirichlet condition at x = 1, as a sum of mode traces over the
// cross-section spectrum.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "conetrace/errors.hpp"
#include "conetrace/hash.hpp"
#include "conetrace/mode_trace.hpp"
#include "conetrace/parallel.hpp"
#include "conetrace/quadrature.hpp"
#include "conetrace/spectra.hpp"

namespace conetrace {

enum class Route { kernel, eigensum, lattice };

inline const char* to_string(Route r) {
  switch (r) {
    case Route::kernel: return "kernel";
    case Route::eigensum: return "eigensum";
    case Route::lattice: return "lattice";
  }
  return "?";
}

inline Route parse_route(const std::string& s) {
  if (s == "kernel") return Route::kernel;
  if (s == "eigensum") return Route::eigensum;
  if (s == "lattice") return Route::lattice;
  throw ConfigError("route", "unknown route '" + s + "'");
}

struct ConeProblem {
  CrossSectionSpectrum spectrum;
  int m = 2;
  int dim() const { return spectrum.f_dim + 1; }
};

inline void check_trace_class(int m, int dim, const char* who) {
  if (m < 1) throw DomainError(std::string(who) + ": m must be >= 1");
  if (2 * m <= dim) {
    throw TraceClassError(std::string(who) + ": 2m = " + std::to_string(2 * m) +
                          " must exceed the dimension " + std::to_string(dim));
  }
}

struct ConeOptions {
  Route route = Route::kernel;
  // Modes with nu <= explicit_slope * z + explicit_pad are summed one by one
  // (arithmetic tails are extended to reach this); the rest go to the tail.
  double explicit_slope = 2.0;
  double explicit_pad = 20.0;
  // Kernel route: quadrature (and Chebyshev differentiation in z^2) for
  // nu <= quadrature_nu_max, closed form above.
  double quadrature_nu_max = 40.0;
  std::size_t workers = 1;
  EigensumOptions eigensum;
};

struct TraceValue {
  double value = 0.0;
  double tail = 0.0;        // tail contribution included in value
  double tail_bound = 0.0;  // bound on the error of the tail model
  double error = 0.0;       // numerical error estimate of the explicit sum
};

namespace detail {

struct Mode {
  double nu;
  double mult;
};

inline bool is_integer_power(double s) { return std::floor(s) == s; }

// Per-mode h_s(nu, z^2). Integer s follows the route as described on
// ConeOptions; half-integer s (edge continuum) uses the closed form on the
// kernel route and Bessel zeros on the eigensum route.
inline double mode_value(double nu, double z, double s, const ConeOptions& opt, double* err) {
  const double w = z * z;
  const bool integer = is_integer_power(s);
  switch (opt.route) {
    case Route::kernel: {
      if (integer && nu <= opt.quadrature_nu_max) {
        const auto e = mode_trace_kernel(nu, z, static_cast<int>(s));
        *err = e.error;
        return e.value;
      }
      *err = 0.0;
      return mode_trace_closed_power(nu, z, s);
    }
    case Route::eigensum:
    case Route::lattice: {
      if (integer && rayleigh_region(nu, w)) {
        *err = 0.0;
        return rayleigh_resolvent_power(nu, w, static_cast<int>(s));
      }
      const auto e = mode_eigensum(nu, z, s, opt.eigensum);
      *err = e.error;
      return e.value;
    }
  }
  return 0.0;
}

// Tail of the arithmetic progression nu_n = n s, n > N: midpoint
// Euler-Maclaurin sum_{n>N} g(n) = int_{N+1/2}^inf g + g'(N+1/2)/24
// - 7 g'''(N+1/2)/5760 + ...
inline std::pair<double, double> arithmetic_tail(const TailModel& t, std::uint64_t last_index,
                                                 double z, double m) {
  auto g = [&](double n) { return t.mult * mode_trace_closed_power(n * t.spacing, z, m); };
  const double a = double(last_index) + 0.5;
  const auto integral = quad::integrate_to_infinity(g, a, quad::Tolerance{0.0, 1e-14, 4000});
  const double half = std::min(0.5 * a, 8.0);
  const double d1 = quad::chebyshev_derivative(g, a, half, 18, 1);
  const double d3 = quad::chebyshev_derivative(g, a, half, 18, 3);
  const double value = integral.value + d1 / 24.0 - 7.0 * d3 / 5760.0;
  const double bound = std::abs(7.0 * d3 / 5760.0) + integral.abs_error + 1e-13 * std::abs(value);
  return {value, bound};
}

// Tail above nu_c from the smoothed count N_s:
// sum_{nu > nu_c} h = int_{nu_c}^inf h dN_s + (N_s - N)(nu_c) h(nu_c) - int E h',
// |int E h'| <= sup|E| h(nu_c) with E = N - N_s.
inline std::pair<double, double> weyl_tail(const CrossSectionSpectrum& s, double z, double m) {
  const auto& t = s.tail;
  const double nu_c = s.complete_below;
  auto h = [&](double nu) { return mode_trace_closed_power(nu, z, m); };
  auto integrand = [&](double nu) { return h(nu) * t.weyl_density(nu); };
  const auto integral = quad::integrate_to_infinity(integrand, nu_c, quad::Tolerance{0.0, 1e-13, 4000});
  const double n_c = double(s.count_below(nu_c));
  const double h_c = h(nu_c);
  const double boundary = (t.weyl_count(nu_c) - n_c) * h_c;
  double sup_e = 0.0;
  for (const auto& e : s.entries) {
    if (e.nu < 0.5 * nu_c) continue;
    const double n = double(s.count_below(e.nu));
    sup_e = std::max({sup_e, std::abs(n - t.weyl_count(e.nu)),
                      std::abs(n - double(e.mult) - t.weyl_count(e.nu))});
  }
  return {integral.value + boundary, sup_e * h_c + integral.abs_error};
}

// sum over the spectrum of mult * h_power(nu, z^2), with tails.
inline TraceValue mode_power_sum(const CrossSectionSpectrum& s, double z, double power,
                                 const ConeOptions& opt) {

  std::vector<Mode> modes;
  modes.reserve(s.entries.size());
  for (const auto& e : s.entries) modes.push_back({e.nu, double(e.mult)});
  std::uint64_t last_index = s.tail.last_index;
  if (s.tail.kind == TailModel::Kind::arithmetic) {
    const double reach = opt.explicit_slope * z + opt.explicit_pad;
    while (double(last_index) * s.tail.spacing < reach) {
      ++last_index;
      modes.push_back({double(last_index) * s.tail.spacing, s.tail.mult});
    }
  }

  const auto parts = parallel_map(modes.size(), opt.workers, [&](std::size_t i) {
    double err = 0.0;
    const double v = mode_value(modes[i].nu, z, power, opt, &err);
    return std::pair<double, double>{modes[i].mult * v, modes[i].mult * err};
  });
  TraceValue out;
  // Ordered reduction, smallest terms (largest nu) first.
  for (std::size_t i = parts.size(); i-- > 0;) {
    out.value += parts[i].first;
    out.error += parts[i].second;
  }

  switch (s.tail.kind) {
    case TailModel::Kind::arithmetic: {
      const auto [t, b] = arithmetic_tail(s.tail, last_index, z, power);
      out.tail = t;
      out.tail_bound = b;
      break;
    }
    case TailModel::Kind::weyl: {
      const auto [t, b] = weyl_tail(s, z, power);
      out.tail = t;
      out.tail_bound = b;
      break;
    }
    case TailModel::Kind::none: {
      // No model for the missing modes: bound by the last mode's share
      // repeated over the listed count.
      const double h = mode_trace_closed_power(s.max_nu(), z, power);
      out.tail_bound = h * double(s.total_multiplicity());
      break;
    }
  }
  out.value += out.tail;
  return out;
}

}  // namespace detail

inline TraceValue cone_trace(const ConeProblem& p, double z, const ConeOptions& opt = {}) {
  validate(p.spectrum);
  check_trace_class(p.m, p.dim(), "cone_trace");
  if (!(z > 0.0) || !std::isfinite(z)) throw DomainError("cone_trace: z must be > 0");
  return detail::mode_power_sum(p.spectrum, z, double(p.m), opt);
}

// ---- sampled traces ----

struct TraceSamples {
  std::vector<double> z_grid;
  std::vector<double> values;
  std::vector<double> tail_bound;
  Route route = Route::kernel;
  int m = 1;
  std::string model_hash;
};

inline std::vector<double> log_grid(double z_min, double z_max, std::size_t count) {
  if (!(z_min > 0.0 && z_max > z_min) || count < 2) {
    throw DomainError("log_grid: need 0 < z_min < z_max and count >= 2");
  }
  std::vector<double> z(count);
  const double step = std::log(z_max / z_min) / double(count - 1);
  for (std::size_t i = 0; i < count; ++i) z[i] = z_min * std::exp(step * double(i));
  z.front() = z_min;
  z.back() = z_max;
  return z;
}

inline void validate(const TraceSamples& t) {
  if (t.z_grid.size() != t.values.size() || t.values.size() != t.tail_bound.size()) {
    throw Error("TraceSamples: length mismatch");
  }
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    if (!(t.values[i] > 0.0)) throw Error("TraceSamples: values must be positive");
    if (i > 0 && !(t.z_grid[i] > t.z_grid[i - 1])) throw Error("TraceSamples: z grid must increase");
    if (i > 0 && !(t.values[i] < t.values[i - 1])) throw Error("TraceSamples: values must decrease in z");
  }
}

inline TraceSamples sample_cone_trace(const ConeProblem& p, const std::vector<double>& z_grid,
                                      const ConeOptions& opt = {}) {
  TraceSamples out;
  out.route = opt.route;
  out.m = p.m;
  out.z_grid = z_grid;
  out.model_hash = spectrum_hash(p.spectrum);
  for (double z : z_grid) {
    const auto v = cone_trace(p, z, opt);
    out.values.push_back(v.value);
    out.tail_bound.push_back(v.tail_bound + v.error);
  }
  validate(out);
  return out;
}

inline std::string samples_to_csv(const TraceSamples& t) {
  std::ostringstream out;
  out << "# model " << t.model_hash << "\n";
  out << "# route " << to_string(t.route) << "\n";
  out << "# m " << t.m << "\n";
  out << "z,value,tail_bound\n";
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    out << format_double(t.z_grid[i]) << "," << format_double(t.values[i]) << ","
        << format_double(t.tail_bound[i]) << "\n";
  }
  return out.str();
}

inline TraceSamples samples_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  TraceSamples t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream h(line.substr(1));
      std::string key, value;
      h >> key >> value;
      if (key == "model") t.model_hash = value;
      if (key == "route") t.route = parse_route(value);
      if (key == "m") t.m = std::stoi(value);
      continue;
    }
    if (line.rfind("z,", 0) == 0) continue;
    std::istringstream row(line);
    std::string a, b, c;
    std::getline(row, a, ',');
    std::getline(row, b, ',');
    std::getline(row, c, ',');
    t.z_grid.push_back(std::strtod(a.c_str(), nullptr));
    t.values.push_back(std::strtod(b.c_str(), nullptr));
    t.tail_bound.push_back(std::strtod(c.c_str(), nullptr));
  }
  return t;
}

// ---- off-diagonal decay ----

struct Interval {
  double lo, hi;
};

struct DecayProbe {
  double slope = 0.0;
  std::vector<double> z;
  std::vector<double> log_sup;  // log sup |nu^2 G(x, y)|
};

inline std::vector<double> dyadic_grid(double z_min = 4.0, double z_max = 256.0) {
  std::vector<double> z;
  for (double v = z_min; v <= z_max * (1.0 + 1e-12); v *= 2.0) z.push_back(v);
  return z;
}

// Log-log slope of sup_{x in near, y in far} |nu^2 G_nu(x, y; z)| against z.
inline DecayProbe offdiag_decay_probe(double nu, const Interval& near, const Interval& far,
                                      const std::vector<double>& z_grid = dyadic_grid(),
                                      std::size_t points = 17) {
  auto inside = [](const Interval& i) { return 0.0 <= i.lo && i.lo < i.hi && i.hi <= 1.0; };
  if (!inside(near) || !inside(far)) {
    throw PreconditionError("offdiag_decay_probe: supports must be intervals in [0, 1]");
  }
  if (!(far.hi < near.lo)) {
    throw PreconditionError("offdiag_decay_probe: supports must be disjoint with far.hi < near.lo");
  }
  if (z_grid.size() < 2 || points < 2) throw PreconditionError("offdiag_decay_probe: grid too small");
  DecayProbe out;
  for (double z : z_grid) {
    double best = -INFINITY;
    for (std::size_t i = 0; i < points; ++i) {
      const double x = near.lo + (near.hi - near.lo) * double(i) / double(points - 1);
      if (x <= 0.0 || x >= 1.0) continue;  // G vanishes at x = 1
      for (std::size_t j = 0; j < points; ++j) {
        const double y = far.lo + (far.hi - far.lo) * double(j) / double(points - 1);
        if (y <= 0.0) continue;
        best = std::max(best, log_abs_mode_kernel(nu, z, x, y));
      }
    }
    out.z.push_back(z);
    out.log_sup.push_back(best + 2.0 * std::log(std::max(nu, 1e-300)));
  }
  double mx = 0.0, my = 0.0;
  const double n = double(out.z.size());
  for (std::size_t i = 0; i < out.z.size(); ++i) {
    mx += std::log(out.z[i]) / n;
    my += out.log_sup[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < out.z.size(); ++i) {
    const double dx = std::log(out.z[i]) - mx;
    sxy += dx * (out.log_sup[i] - my);
    sxx += dx * dx;
  }
  out.slope = sxy / sxx;
  return out;
}

}  // namespace conetrace
