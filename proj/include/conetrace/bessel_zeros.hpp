#pragma once

// Positive zeros of J_nu and of the Robin combination 1/2 J_nu(y) + y J_nu'(y)
// (critical points of sqrt(y) J_nu(y)).
//
// Every root is bracketed before it is refined: the first root by a scan
// from the turning point sqrt(nu^2 - 1/4), later roots either by the
// monotone-spacing brackets of J_nu zeros or by a scan from the previous
// root. Refinement is bisection with a Newton step whenever the step stays
// inside the bracket.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/bessel_prime.hpp>

#include "conetrace/errors.hpp"
#include "conetrace/olver.hpp"

namespace conetrace {

namespace detail {

// Debye expansion in the oscillatory region, x = nu sec(b):
//   J_nu(x) ~ (2 / (pi t))^{1/2} (cos xi P + sin xi Q),  t = nu tan(b),
//   xi = t - nu b - pi/4,  P = sum_{k even} U_k(i c) / nu^k,
//   Q = -i sum_{k odd} U_k(i c) / nu^k,  c = cot(b).
// Returns false when the series has not settled to double precision.
inline bool bessel_j_debye(double nu, double x, double& out) {
  if (nu < 20.0 || x <= nu) return false;
  const double t = std::sqrt((x - nu) * (x + nu));
  const double c = nu / t;
  if (c * c * c > 0.05 * nu) return false;
  const auto& table = u_table().coeffs;
  double p_sum = 0.0, q_sum = 0.0, scale = 1.0;
  bool settled = false;
  for (std::size_t k = 0; k < table.size(); ++k) {
    const auto& a = table[k];
    double v = 0.0;
    for (std::size_t j = a.size(); j-- > 0;) {
      if (a[j] == 0.0) {
        v *= c;
        continue;
      }
      const double sign = ((j / 2) % 2 == 0) ? 1.0 : -1.0;
      v = v * c + sign * a[j];
    }
    // Horner above multiplied every coefficient by c^j; v = sum s_j a_j c^j.
    const double term = v * scale;
    (k % 2 == 0 ? p_sum : q_sum) += term;
    if (k >= 2 && std::abs(term) < 1e-17) {
      settled = true;
      break;
    }
    scale /= nu;
  }
  if (!settled) return false;
  const double xi = t - nu * std::atan2(t, nu) - 0.25 * std::numbers::pi;
  out = std::sqrt(2.0 / (std::numbers::pi * t)) * (std::cos(xi) * p_sum + std::sin(xi) * q_sum);
  return true;
}

}  // namespace detail

// J_nu(x): Debye expansion where it settles, Boost.Math elsewhere (Boost
// costs O(x) per call at large non-integer order).
inline double bessel_j(double nu, double x) {
  double v;
  if (detail::bessel_j_debye(nu, x, v)) return v;
  return boost::math::cyl_bessel_j(nu, x);
}

inline double bessel_j_prime(double nu, double x) {
  double a, b;
  if (detail::bessel_j_debye(nu, x, a) && detail::bessel_j_debye(nu + 1.0, x, b)) {
    return nu / x * a - b;
  }
  return boost::math::cyl_bessel_j_prime(nu, x);
}

enum class ZeroKind { j, robin };

// McMahon's large-k expansion of j_{nu,k}.
inline double mcmahon_zero(double nu, double k) {
  const double b = (k + 0.5 * nu - 0.25) * std::numbers::pi;
  const double mu = 4.0 * nu * nu;
  const double m1 = mu - 1.0;
  const double inv = 1.0 / (8.0 * b);
  const double inv2 = inv * inv;
  const double t3 = 4.0 * m1 * (7.0 * mu - 31.0) / 3.0;
  const double t5 = 32.0 * m1 * ((83.0 * mu - 982.0) * mu + 3779.0) / 15.0;
  const double t7 =
      64.0 * m1 * (((6949.0 * mu - 153855.0) * mu + 1585743.0) * mu - 6277237.0) / 105.0;
  return b - inv * (m1 + inv2 * (t3 + inv2 * (t5 + inv2 * t7)));
}

// Scan step used to bracket roots; smaller than any gap between consecutive
// zeros of either kind.
inline constexpr double kDefaultScanStep = std::numbers::pi / 8.0;

namespace detail {

struct ZeroFunction {
  double nu;
  ZeroKind kind;

  double value(double y) const {
    if (kind == ZeroKind::j) return bessel_j(nu, y);
    return 0.5 * bessel_j(nu, y) + y * bessel_j_prime(nu, y);
  }

  // (value, derivative)
  std::pair<double, double> both(double y) const {
    const double j = bessel_j(nu, y);
    const double jp = bessel_j_prime(nu, y);
    if (kind == ZeroKind::j) return {j, jp};
    const double g = 0.5 * j + y * jp;
    const double gp = 0.5 * jp - (y - nu * nu / y) * j;
    return {g, gp};
  }
};

inline std::string zero_context(double nu, std::size_t k) {
  return "(nu=" + std::to_string(nu) + ", k=" + std::to_string(k) + ")";
}

// Root of f in [a, b] given f(a) * f(b) < 0.
inline double refine_root(const ZeroFunction& f, double a, double b, double fa,
                          std::size_t k) {
  double x = 0.5 * (a + b);
  for (int iter = 0; iter < 200; ++iter) {
    const auto [fx, dfx] = f.both(x);
    if (fx == 0.0) return x;
    if ((fx < 0.0) == (fa < 0.0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
    }
    const double newton = (dfx != 0.0) ? fx / dfx : 0.0;
    if (dfx != 0.0 && std::abs(newton) <= 1e-15 * x) return x - newton;
    double next = x - newton;
    if (dfx == 0.0 || !(next > a && next < b)) next = 0.5 * (a + b);
    x = next;
    if (b - a <= 4e-16 * x) return x;
  }
  throw ConvergenceError("bessel zero refinement failed " + zero_context(f.nu, k));
}

// First sign change of f on [start, start + step, ...], then refine.
inline double scan_root(const ZeroFunction& f, double start, double step, std::size_t k) {
  double a = start;
  double fa = f.value(a);
  for (int i = 0; i < 1000000; ++i) {
    const double b = a + step;
    const double fb = f.value(b);
    if (fa == 0.0) return a;
    if ((fa < 0.0) != (fb < 0.0)) return refine_root(f, a, b, fa, k);
    a = b;
    fa = fb;
  }
  throw ConvergenceError("bessel zero scan failed " + zero_context(f.nu, k));
}

// Continue `zeros` (the first zeros.size() roots, in order) up to `count`.
inline void extend_zeros(double nu, ZeroKind kind, std::vector<double>& zeros,
                         std::size_t count, double step = kDefaultScanStep) {
  const ZeroFunction f{nu, kind};
  const double turning = std::sqrt(std::max(0.0, nu * nu - 0.25));
  while (zeros.size() < count) {
    const std::size_t k = zeros.size() + 1;
    double root = 0.0;
    if (zeros.empty()) {
      root = scan_root(f, std::max(turning, 1e-3), step, k);
    } else if (kind == ZeroKind::j && zeros.size() >= 2) {
      // Spacing j_{k+1} - j_k is monotone in k and tends to pi: decreasing
      // for nu > 1/2, increasing for nu < 1/2.
      const double last = zeros.back();
      const double gap = last - zeros[zeros.size() - 2];
      const double slack = 1e-9 * last;
      double lo = last + std::min(gap, std::numbers::pi) - slack;
      double hi = last + std::max(gap, std::numbers::pi) + slack;
      const double flo = f.value(lo);
      const double fhi = f.value(hi);
      if ((flo < 0.0) != (fhi < 0.0)) {
        root = refine_root(f, lo, hi, flo, k);
      } else {
        root = scan_root(f, last + step, step, k);
      }
    } else {
      root = scan_root(f, zeros.back() + step, step, k);
    }
    if (!zeros.empty() && !(root > zeros.back())) {
      throw ConvergenceError("bessel zeros out of order " + zero_context(nu, k));
    }
    zeros.push_back(root);
  }
}

}  // namespace detail

// First `count` positive zeros of J_nu (kind j) or of 1/2 J_nu + y J_nu' (kind robin).
inline std::vector<double> bessel_zeros(double nu, std::size_t count,
                                        ZeroKind kind = ZeroKind::j) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw DomainError("bessel_zeros: nu must be >= 0");
  std::vector<double> zeros;
  zeros.reserve(count);
  detail::extend_zeros(nu, kind, zeros, count);
  return zeros;
}

// All zeros of the given kind that are <= bound, in increasing order.
inline std::vector<double> bessel_zeros_below(double nu, double bound, ZeroKind kind,
                                              double scan_step = kDefaultScanStep) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) {
    throw DomainError("bessel_zeros_below: nu must be >= 0");
  }
  if (!(scan_step > 0.0 && scan_step <= kDefaultScanStep)) {
    throw DomainError("bessel_zeros_below: scan step must lie in (0, pi/8]");
  }
  std::vector<double> zeros;
  while (true) {
    detail::extend_zeros(nu, kind, zeros, zeros.size() + 1, scan_step);
    if (zeros.back() > bound) {
      zeros.pop_back();
      return zeros;
    }
  }
}

// k-th positive zero j_{nu,k} of J_nu, k >= 1.
inline double bessel_j_zero(double nu, std::size_t k) {
  if (k == 0) throw DomainError("bessel_j_zero: k must be >= 1");
  return bessel_zeros(nu, k).back();
}

// Append-only cache of zero sequences keyed by (nu, kind). A longer request
// extends the stored prefix and publishes a new immutable vector.
class ZeroCache {
 public:
  using Sequence = std::shared_ptr<const std::vector<double>>;

  Sequence get(double nu, std::size_t count, ZeroKind kind = ZeroKind::j) {
    const Key key{bits(nu), kind};
    {
      std::shared_lock lock(mutex_);
      auto it = table_.find(key);
      if (it != table_.end() && it->second->size() >= count) return it->second;
    }
    std::unique_lock lock(mutex_);
    auto& slot = table_[key];
    if (slot && slot->size() >= count) return slot;
    auto grown = slot ? std::make_shared<std::vector<double>>(*slot)
                      : std::make_shared<std::vector<double>>();
    detail::extend_zeros(nu, kind, *grown, count);
    slot = grown;
    return slot;
  }

  // Publish a precomputed prefix (e.g. read from disk) unless a longer one
  // is already stored.
  void seed(double nu, ZeroKind kind, std::vector<double> zeros) {
    std::unique_lock lock(mutex_);
    auto& slot = table_[Key{bits(nu), kind}];
    if (!slot || slot->size() < zeros.size()) {
      slot = std::make_shared<const std::vector<double>>(std::move(zeros));
    }
  }

  // Snapshot of every stored sequence.
  std::vector<std::tuple<double, ZeroKind, Sequence>> entries() const {
    std::shared_lock lock(mutex_);
    std::vector<std::tuple<double, ZeroKind, Sequence>> out;
    for (const auto& [key, seq] : table_) {
      double nu;
      std::memcpy(&nu, &key.first, sizeof nu);
      out.emplace_back(nu, key.second, seq);
    }
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return table_.size();
  }

  static ZeroCache& global() {
    static ZeroCache cache;
    return cache;
  }

 private:
  using Key = std::pair<std::uint64_t, ZeroKind>;

  static std::uint64_t bits(double nu) {
    std::uint64_t b;
    std::memcpy(&b, &nu, sizeof b);
    return b;
  }

  mutable std::shared_mutex mutex_;
  std::map<Key, Sequence> table_;
};

}  // namespace conetrace
