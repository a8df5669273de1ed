#pragma once

// Cross-section spectra {nu} of the tangential operator A (A = nu^2) for the
// model geometries: the circle of circumference 2 pi beta and the metric
// double of the truncated cone over a given cross-section ("spindle").

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "conetrace/bessel_zeros.hpp"
#include "conetrace/errors.hpp"
#include "conetrace/hash.hpp"
#include "conetrace/parallel.hpp"

namespace conetrace {

struct SpectrumEntry {
  double nu = 0.0;
  std::uint64_t mult = 1;
  friend bool operator==(const SpectrumEntry&, const SpectrumEntry&) = default;
};

enum class SpectrumSource { analytic, computed, user_supplied };

inline const char* to_string(SpectrumSource s) {
  switch (s) {
    case SpectrumSource::analytic: return "analytic";
    case SpectrumSource::computed: return "computed";
    case SpectrumSource::user_supplied: return "user-supplied";
  }
  return "?";
}

inline SpectrumSource parse_source(const std::string& s) {
  if (s == "analytic") return SpectrumSource::analytic;
  if (s == "computed") return SpectrumSource::computed;
  if (s == "user-supplied") return SpectrumSource::user_supplied;
  throw ConfigError("source", "unknown spectrum source '" + s + "'");
}

enum class DoubleBc { dirichlet_double, neumann_double };

inline const char* to_string(DoubleBc bc) {
  return bc == DoubleBc::dirichlet_double ? "dirichlet-double" : "neumann-double";
}

inline DoubleBc parse_double_bc(const std::string& s) {
  if (s == "dirichlet-double") return DoubleBc::dirichlet_double;
  if (s == "neumann-double") return DoubleBc::neumann_double;
  throw ConfigError("bc", "expected dirichlet-double or neumann-double, got '" + s + "'");
}

// Model for the modes above the cutoff, used to bound and add the mode-sum
// tail.
struct TailModel {
  enum class Kind { none, arithmetic, weyl };
  Kind kind = Kind::none;
  // arithmetic: nu_n = n * spacing for n > last_index, each with `mult`.
  double spacing = 0.0;
  std::uint64_t last_index = 0;
  double mult = 0.0;
  // weyl: smoothed count N_s(nu) = a (nu^2 - shift) + b sqrt(nu^2 - shift),
  // valid for nu^2 > shift.
  double a = 0.0;
  double b = 0.0;
  double shift = 0.0;

  double weyl_count(double nu) const {
    const double lam = std::max(0.0, nu * nu - shift);
    return a * lam + b * std::sqrt(lam);
  }
  // dN_s / dnu
  double weyl_density(double nu) const {
    const double lam = nu * nu - shift;
    if (lam <= 0.0) return 0.0;
    return 2.0 * nu * (a + 0.5 * b / std::sqrt(lam));
  }
};

struct CrossSectionSpectrum {
  std::vector<SpectrumEntry> entries;  // ascending nu
  SpectrumSource source = SpectrumSource::analytic;
  int f_dim = 1;
  // Every mode with nu < complete_below is listed.
  double complete_below = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::string, std::string>> params;
  TailModel tail;

  std::uint64_t total_multiplicity() const {
    std::uint64_t n = 0;
    for (const auto& e : entries) n += e.mult;
    return n;
  }
  // N(nu) = number of modes (with multiplicity) with nu_k <= nu.
  std::uint64_t count_below(double nu) const {
    std::uint64_t n = 0;
    for (const auto& e : entries) {
      if (e.nu > nu) break;
      n += e.mult;
    }
    return n;
  }
  double min_nu() const { return entries.empty() ? INFINITY : entries.front().nu; }
  double max_nu() const { return entries.empty() ? 0.0 : entries.back().nu; }
};

// A-eigenvalue nu^2 and Q-eigenvalue nu - 1/2 (A = Q(Q+1) + 1/4).
inline double a_eigenvalue(double nu) { return nu * nu; }
inline double q_eigenvalue(double nu) { return nu - 0.5; }

inline void validate(const CrossSectionSpectrum& s) {
  if (s.entries.empty()) throw PreconditionError("spectrum is empty");
  for (std::size_t i = 0; i < s.entries.size(); ++i) {
    const auto& e = s.entries[i];
    if (!(e.nu >= 0.0) || !std::isfinite(e.nu)) throw DomainError("spectrum: nu must be finite and >= 0");
    if (e.mult < 1) throw DomainError("spectrum: multiplicity must be >= 1");
    if (i > 0 && !(s.entries[i - 1].nu < e.nu)) throw DomainError("spectrum: entries must be strictly ascending");
  }
  if (s.f_dim < 1) throw DomainError("spectrum: f_dim must be >= 1");
}

// Sort by nu and merge bit-identical nu values.
inline std::vector<SpectrumEntry> sort_and_merge(std::vector<SpectrumEntry> v) {
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.nu < b.nu; });
  std::vector<SpectrumEntry> out;
  for (const auto& e : v) {
    if (!out.empty() && out.back().nu == e.nu) {
      out.back().mult += e.mult;
    } else {
      out.push_back(e);
    }
  }
  return out;
}

// nu_n = |n| / beta, |n| <= cutoff.
inline CrossSectionSpectrum circle_scalar_spectrum(double beta, std::uint64_t cutoff) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("circle_scalar_spectrum: beta must be > 0");
  if (cutoff < 1) throw DomainError("circle_scalar_spectrum: cutoff must be >= 1");
  CrossSectionSpectrum s;
  s.source = SpectrumSource::analytic;
  s.f_dim = 1;
  s.entries.push_back({0.0, 1});
  for (std::uint64_t n = 1; n <= cutoff; ++n) s.entries.push_back({double(n) / beta, 2});
  s.complete_below = double(cutoff + 1) / beta;
  s.params = {{"builder", "circle"}, {"beta", format_double(beta)}, {"cutoff", std::to_string(cutoff)}};
  s.tail.kind = TailModel::Kind::arithmetic;
  s.tail.spacing = 1.0 / beta;
  s.tail.last_index = cutoff;
  s.tail.mult = 2.0;
  return s;
}

enum class FormBlock { omega, dx_omega };

// (l - (f+1)/2)^2 for the omega_l block, (l - (f+3)/2)^2 for the
// dx ^ omega_{l-1} block.
inline double scalar_a_shift(int ell, int f, FormBlock block = FormBlock::omega) {
  if (f < 0) throw DomainError("scalar_a_shift: f must be >= 0");
  if (block == FormBlock::omega) {
    if (ell < 0 || ell > f) throw DomainError("scalar_a_shift: need 0 <= ell <= f");
    const double d = ell - (f + 1) / 2.0;
    return d * d;
  }
  if (ell < 1 || ell > f + 1) throw DomainError("scalar_a_shift: need 1 <= ell <= f + 1 for the dx block");
  const double d = ell - (f + 3) / 2.0;
  return d * d;
}

inline std::string spectrum_hash(const CrossSectionSpectrum& s);

// Spectrum of the cone over the double of the truncated cone over `inner`.
// For each inner mode nu the gluing condition at x = 1 gives mu = y^2 with
// J_nu(y) = 0 (odd modes) or 1/2 J_nu(y) + y J_nu'(y) = 0 (even modes);
// dirichlet-double keeps the odd modes, neumann-double both. The outer
// order is nu' = sqrt(mu + scalar_a_shift(0, f_dim + 1)); entries with
// nu' <= cutoff are returned.
inline CrossSectionSpectrum iterated_cone_spectrum(const CrossSectionSpectrum& inner, DoubleBc bc,
                                                   double cutoff,
                                                   double scan_step = kDefaultScanStep,
                                                   std::size_t workers = 1) {
  validate(inner);
  if (!(cutoff >= 1.0)) throw DomainError("iterated_cone_spectrum: cutoff must be >= 1");
  if (!(inner.complete_below > cutoff)) {
    throw PreconditionError("iterated_cone_spectrum: inner spectrum must be complete below the cutoff (" +
                            format_double(inner.complete_below) + " <= " + format_double(cutoff) + ")");
  }
  const int f_out = inner.f_dim + 1;
  const double shift = scalar_a_shift(0, f_out);
  const double y_max = std::sqrt(std::max(0.0, cutoff * cutoff - shift));
  std::vector<ZeroKind> kinds{ZeroKind::j};
  if (bc == DoubleBc::neumann_double) kinds.push_back(ZeroKind::robin);

  auto per_mode = [&](std::size_t i) {
    std::vector<SpectrumEntry> out;
    const auto& e = inner.entries[i];
    for (auto kind : kinds) {
      std::vector<double> roots;
      try {
        roots = bessel_zeros_below(e.nu, y_max, kind, scan_step);
      } catch (const ConvergenceError& err) {
        throw ConvergenceError(std::string("iterated_cone_spectrum: root finder failed for nu=") +
                               format_double(e.nu) + ": " + err.what());
      }
      for (double y : roots) out.push_back({std::sqrt(y * y + shift), e.mult});
    }
    return out;
  };
  const auto parts = parallel_map(inner.entries.size(), workers, per_mode);
  std::vector<SpectrumEntry> all;
  for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  std::erase_if(all, [&](const SpectrumEntry& e) { return e.nu > cutoff; });

  CrossSectionSpectrum s;
  s.entries = sort_and_merge(std::move(all));
  s.source = SpectrumSource::computed;
  s.f_dim = f_out;
  s.complete_below = cutoff;
  s.params = {{"builder", "iterated-cone"},
              {"bc", to_string(bc)},
              {"cutoff", format_double(cutoff)},
              {"inner_hash", spectrum_hash(inner)}};
  // Two-term Weyl law for mu on the double of the truncated cone over a
  // circle of circumference 2 pi beta (area 2 pi beta): the odd modes see a
  // Dirichlet circle of length 2 pi beta, and adding the even modes cancels
  // the perimeter term. Other inner spectra get no tail model.
  std::string builder;
  double beta = 0.0;
  for (const auto& [k, v] : inner.params) {
    if (k == "builder") builder = v;
    if (k == "beta") beta = std::strtod(v.c_str(), nullptr);
  }
  if (builder == "circle" && beta > 0.0) {
    s.tail.kind = TailModel::Kind::weyl;
    s.tail.shift = shift;
    s.tail.a = bc == DoubleBc::dirichlet_double ? beta / 4.0 : beta / 2.0;
    s.tail.b = bc == DoubleBc::dirichlet_double ? -beta / 2.0 : 0.0;
  }
  return s;
}

struct WittReport {
  double margin = 0.0;  // min nu - 3/2
  bool satisfied = false;
  std::vector<SpectrumEntry> offending_modes;  // nu <= 3/2
};

inline WittReport witt_check(const CrossSectionSpectrum& s) {
  if (s.entries.empty()) throw PreconditionError("witt_check: spectrum is empty");
  WittReport r;
  r.margin = s.min_nu() - 1.5;
  for (const auto& e : s.entries) {
    if (e.nu <= 1.5) r.offending_modes.push_back(e);
  }
  r.satisfied = r.margin > 0.0;
  return r;
}

// Least-squares slope of N(nu) against nu^{f_dim} over the upper half of the
// listed range.
inline double weyl_slope(const CrossSectionSpectrum& s) {
  const double top = std::min(s.max_nu(), s.complete_below);
  double sxy = 0.0, sxx = 0.0;
  const int samples = 64;
  for (int i = 0; i < samples; ++i) {
    const double nu = top * (0.5 + 0.5 * (i + 0.5) / samples);
    const double x = std::pow(nu, s.f_dim);
    sxy += x * double(s.count_below(nu));
    sxx += x * x;
  }
  return sxy / sxx;
}

// ---- persistence ----
//
// # conetrace-spectrum 1
// # f_dim <int>
// # source <tag>
// # complete_below <double>
// # param <key> <value>        (repeated)
// # tail <kind> <fields...>
// # sha256 <hex of the body lines>
// <nu>,<mult>,<source>          (one per entry)

inline std::string spectrum_body(const CrossSectionSpectrum& s) {
  std::string body;
  for (const auto& e : s.entries) {
    body += format_double(e.nu) + "," + std::to_string(e.mult) + "," + to_string(s.source) + "\n";
  }
  return body;
}

inline std::string spectrum_hash(const CrossSectionSpectrum& s) {
  std::string key = "f_dim " + std::to_string(s.f_dim) + "\n";
  for (const auto& [k, v] : s.params) key += k + " " + v + "\n";
  return sha256_hex(key + spectrum_body(s));
}

inline std::string serialize_spectrum(const CrossSectionSpectrum& s) {
  std::ostringstream out;
  const std::string body = spectrum_body(s);
  out << "# conetrace-spectrum 1\n";
  out << "# f_dim " << s.f_dim << "\n";
  out << "# source " << to_string(s.source) << "\n";
  out << "# complete_below " << format_double(s.complete_below) << "\n";
  for (const auto& [k, v] : s.params) out << "# param " << k << " " << v << "\n";
  const auto& t = s.tail;
  switch (t.kind) {
    case TailModel::Kind::none: out << "# tail none\n"; break;
    case TailModel::Kind::arithmetic:
      out << "# tail arithmetic " << format_double(t.spacing) << " " << t.last_index << " "
          << format_double(t.mult) << "\n";
      break;
    case TailModel::Kind::weyl:
      out << "# tail weyl " << format_double(t.a) << " " << format_double(t.b) << " "
          << format_double(t.shift) << "\n";
      break;
  }
  out << "# sha256 " << sha256_hex(body) << "\n";
  out << body;
  return out.str();
}

// Throws Error on a malformed file or a body that does not match its hash.
inline CrossSectionSpectrum parse_spectrum(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CrossSectionSpectrum s;
  std::string expected_hash;
  std::string body;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream h(line.substr(1));
      std::string key;
      h >> key;
      if (key == "conetrace-spectrum") {
        header_seen = true;
      } else if (key == "f_dim") {
        h >> s.f_dim;
      } else if (key == "source") {
        std::string v;
        h >> v;
        s.source = parse_source(v);
      } else if (key == "complete_below") {
        std::string v;
        h >> v;
        s.complete_below = std::strtod(v.c_str(), nullptr);
      } else if (key == "param") {
        std::string k, v;
        h >> k;
        std::getline(h >> std::ws, v);
        s.params.emplace_back(k, v);
      } else if (key == "tail") {
        std::string kind;
        h >> kind;
        if (kind == "arithmetic") {
          std::string sp, mu;
          s.tail.kind = TailModel::Kind::arithmetic;
          h >> sp >> s.tail.last_index >> mu;
          s.tail.spacing = std::strtod(sp.c_str(), nullptr);
          s.tail.mult = std::strtod(mu.c_str(), nullptr);
        } else if (kind == "weyl") {
          std::string a, b, c;
          s.tail.kind = TailModel::Kind::weyl;
          h >> a >> b >> c;
          s.tail.a = std::strtod(a.c_str(), nullptr);
          s.tail.b = std::strtod(b.c_str(), nullptr);
          s.tail.shift = std::strtod(c.c_str(), nullptr);
        }
      } else if (key == "sha256") {
        h >> expected_hash;
      }
      continue;
    }
    body += line + "\n";
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw Error("spectrum file: malformed record '" + line + "'");
    }
    SpectrumEntry e;
    e.nu = std::strtod(line.substr(0, c1).c_str(), nullptr);
    e.mult = std::stoull(line.substr(c1 + 1, c2 - c1 - 1));
    s.entries.push_back(e);
  }
  if (!header_seen) throw Error("spectrum file: missing header");
  if (sha256_hex(body) != expected_hash) throw Error("spectrum file: content hash mismatch");
  validate(s);
  return s;
}

inline void write_spectrum_file(const std::string& path, const CrossSectionSpectrum& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize_spectrum(s);
}

inline CrossSectionSpectrum read_spectrum_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_spectrum(ss.str());
}

}  // namespace conetrace
