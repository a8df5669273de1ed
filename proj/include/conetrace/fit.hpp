#pragma once

// Least-squares extraction of power/log coefficients from sampled traces.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "conetrace/cone_trace.hpp"
#include "conetrace/errors.hpp"
#include "conetrace/sal.hpp"

namespace conetrace {

struct BasisTerm {
  double power = 0.0;
  int logpow = 0;
  bool operator==(const BasisTerm&) const = default;
};

struct FitBasis {
  std::vector<BasisTerm> terms;
  double z_min = 8.0;
  double z_max = 512.0;
  int samples_per_coeff = 12;

  int max_logpow() const {
    int l = 0;
    for (const auto& t : terms) l = std::max(l, t.logpow);
    return l;
  }
};

inline void validate(const FitBasis& b) {
  if (b.terms.empty()) throw PreconditionError("FitBasis: no terms");
  if (!(b.z_min > 0.0 && b.z_max > b.z_min)) throw PreconditionError("FitBasis: need 0 < z_min < z_max");
  if (b.samples_per_coeff < 3) throw PreconditionError("FitBasis: samples_per_coeff must be >= 3");
  for (std::size_t i = 0; i < b.terms.size(); ++i) {
    if (b.terms[i].logpow < 0) throw PreconditionError("FitBasis: negative log power");
    for (std::size_t k = 0; k < i; ++k) {
      if (b.terms[k] == b.terms[i]) throw PreconditionError("FitBasis: duplicate term");
    }
  }
}

// Log powers may not exceed the stratification depth.
inline void check_depth(const FitBasis& b, int depth) {
  if (b.max_logpow() > depth) {
    throw ConfigError("fit.max_log", "log power " + std::to_string(b.max_logpow()) +
                                         " exceeds the stratification depth " + std::to_string(depth));
  }
}

struct Stratum {
  int dim = 0;
  int depth = 1;
};

// Lattice z^{-2m} (sum_j a_j z^{dim M - j} + sum_Y sum_j sum_{l <= d(Y)} c z^{dim Y - j} log^l z),
// truncated to powers >= -2m + dim M - orders. `max_log` (if >= 0) caps
// the log power below the depth.
inline FitBasis structure_basis(int dim_m, int m, const std::vector<Stratum>& strata, int orders,
                                int max_log = -1) {
  FitBasis b;
  const double lowest = double(dim_m - 2 * m - orders);
  auto add = [&](double p, int l) {
    if (p < lowest - 1e-12) return;
    const BasisTerm t{p, l};
    if (std::find(b.terms.begin(), b.terms.end(), t) == b.terms.end()) b.terms.push_back(t);
  };
  for (int j = 0; j <= orders; ++j) add(double(dim_m - 2 * m - j), 0);
  for (const auto& y : strata) {
    const int top = max_log >= 0 ? std::min(max_log, y.depth) : y.depth;
    for (int j = 0; j <= orders; ++j) {
      for (int l = 0; l <= top; ++l) add(double(y.dim - 2 * m - j), l);
    }
  }
  std::sort(b.terms.begin(), b.terms.end(), [](const BasisTerm& a, const BasisTerm& c) {
    return a.power != c.power ? a.power > c.power : a.logpow < c.logpow;
  });
  return b;
}

enum class Weighting { relative, uniform };

struct FitOptions {
  Weighting weighting = Weighting::relative;
  double max_condition = 1e12;
};

namespace detail {

struct LinearFit {
  Eigen::VectorXd coeff;
  double residual = 0.0;   // weighted 2-norm
  double condition = 0.0;  // of the column-normalized design matrix
  std::size_t used = 0;
};

inline LinearFit solve_fit(const std::vector<double>& z, const std::vector<double>& y,
                           const std::vector<BasisTerm>& terms, const FitOptions& opt) {
  const auto n = Eigen::Index(z.size());
  const auto k = Eigen::Index(terms.size());
  Eigen::MatrixXd a(n, k);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = (opt.weighting == Weighting::relative && y[i] != 0.0) ? 1.0 / std::abs(y[i]) : 1.0;
    const double lg = std::log(z[i]);
    for (Eigen::Index c = 0; c < k; ++c) {
      a(i, c) = w * std::pow(z[i], terms[c].power) * std::pow(lg, terms[c].logpow);
    }
    rhs(i) = w * y[i];
  }
  Eigen::VectorXd scale = a.colwise().norm().transpose();
  for (Eigen::Index c = 0; c < k; ++c) {
    if (scale(c) == 0.0) throw IllConditionedError("fit_expansion: zero basis column", INFINITY);
    a.col(c) /= scale(c);
  }
  LinearFit out;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  out.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
  if (!(out.condition <= opt.max_condition)) {
    throw IllConditionedError("fit_expansion: condition estimate " + format_double(out.condition) +
                                  " above " + format_double(opt.max_condition) +
                                  "; shrink the basis or widen the window",
                              out.condition);
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::VectorXd x = qr.solve(rhs);
  out.residual = (a * x - rhs).norm();
  out.coeff = x.cwiseQuotient(scale);
  out.used = std::size_t(n);
  return out;
}

inline std::pair<std::vector<double>, std::vector<double>> window_samples(const TraceSamples& s,
                                                                          double lo, double hi) {
  std::vector<double> z, y;
  for (std::size_t i = 0; i < s.z_grid.size(); ++i) {
    if (s.z_grid[i] >= lo * (1.0 - 1e-12) && s.z_grid[i] <= hi * (1.0 + 1e-12)) {
      z.push_back(s.z_grid[i]);
      y.push_back(s.values[i]);
    }
  }
  return {z, y};
}

}  // namespace detail

// Weighted least squares on {z^power log^logpow z} over the samples inside
// the basis window. Diagnostics: residual_norm, condition, samples.
inline ExpansionSeries fit_expansion(const TraceSamples& samples, const FitBasis& basis,
                                     const FitOptions& opt = {}) {
  validate(basis);
  const auto [z, y] = detail::window_samples(samples, basis.z_min, basis.z_max);
  const std::size_t need = std::size_t(basis.samples_per_coeff) * basis.terms.size();
  if (z.size() < need) {
    throw PreconditionError("fit_expansion: " + std::to_string(z.size()) + " samples in window, need " +
                            std::to_string(need));
  }
  const auto fit = detail::solve_fit(z, y, basis.terms, opt);
  ExpansionSeries out;
  for (std::size_t c = 0; c < basis.terms.size(); ++c) {
    out.terms.push_back({basis.terms[c].power, basis.terms[c].logpow, fit.coeff(Eigen::Index(c))});
  }
  out.normalize();
  out.z_min = basis.z_min;
  out.z_max = basis.z_max;
  out.diagnostics["residual_norm"] = fit.residual;
  out.diagnostics["condition"] = fit.condition;
  out.diagnostics["samples"] = double(fit.used);
  return out;
}

// Samples of an expansion on a grid, for synthetic tests.
inline TraceSamples evaluate_series(const ExpansionSeries& s, const std::vector<double>& z_grid) {
  TraceSamples t;
  t.z_grid = z_grid;
  for (double z : z_grid) {
    t.values.push_back(s.evaluate(z));
    t.tail_bound.push_back(0.0);
  }
  t.model_hash = "synthetic";
  return t;
}

// The same function written in z' = c z: coefficients pick up c^{-power} and
// log^l(z) = (log z' - log c)^l mixes lower log powers.
inline ExpansionSeries rescale_series(const ExpansionSeries& s, double c) {
  ExpansionSeries out;
  const double lc = std::log(c);
  for (const auto& t : s.terms) {
    double binom = 1.0;
    for (int i = 0; i <= t.logpow; ++i) {
      // C(l, i) (-log c)^{l-i} log^i z'
      const double coeff = t.coeff * std::pow(c, -t.power) * binom * std::pow(-lc, t.logpow - i);
      binom = binom * double(t.logpow - i) / double(i + 1);
      out.add(t.power, i, coeff);
    }
  }
  return out;
}

// ---- stability ----

struct CoefficientDrift {
  double power = 0.0;
  int logpow = 0;
  double value = 0.0;   // full-window fit
  double spread = 0.0;  // max - min over subwindow fits
  double drift = 0.0;   // spread / |mean|
  bool detected = false;
};

struct DriftReport {
  std::vector<std::pair<double, double>> windows;
  std::vector<CoefficientDrift> coefficients;
  std::vector<std::string> notes;

  const CoefficientDrift* find(double power, int logpow) const {
    for (const auto& c : coefficients) {
      if (std::abs(c.power - power) < 1e-12 && c.logpow == logpow) return &c;
    }
    return nullptr;
  }
};

// Refits on `subwindows` overlapping log-z windows, each spanning
// 2/(subwindows+1) of the basis window. A coefficient is detected when its
// drift is below `threshold` and its magnitude exceeds its spread.
inline DriftReport stability_probe(const TraceSamples& samples, const FitBasis& basis, int subwindows,
                                   double threshold = 0.05, const FitOptions& opt = {}) {
  if (subwindows < 2) throw PreconditionError("stability_probe: need >= 2 subwindows");
  validate(basis);
  DriftReport rep;
  const auto [z_all, y_all] = detail::window_samples(samples, basis.z_min, basis.z_max);
  detail::LinearFit full;
  bool full_ok = true;
  try {
    full = detail::solve_fit(z_all, y_all, basis.terms, opt);
  } catch (const IllConditionedError& e) {
    full_ok = false;
    rep.notes.push_back(std::string("full window: ") + e.what());
  }
  const double l0 = std::log(basis.z_min);
  const double span = std::log(basis.z_max) - l0;
  const double width = 2.0 * span / double(subwindows + 1);
  std::vector<Eigen::VectorXd> fits;
  for (int w = 0; w < subwindows; ++w) {
    const double lo = std::exp(l0 + span * double(w) / double(subwindows + 1));
    const double hi = std::exp(std::log(lo) + width);
    rep.windows.emplace_back(lo, hi);
    const auto [z, y] = detail::window_samples(samples, lo, hi);
    if (z.size() < basis.terms.size() + 1) {
      rep.notes.push_back("window " + std::to_string(w) + ": too few samples");
      continue;
    }
    try {
      fits.push_back(detail::solve_fit(z, y, basis.terms, opt).coeff);
    } catch (const IllConditionedError& e) {
      rep.notes.push_back("window " + std::to_string(w) + ": " + e.what());
    }
  }
  for (std::size_t c = 0; c < basis.terms.size(); ++c) {
    CoefficientDrift d;
    d.power = basis.terms[c].power;
    d.logpow = basis.terms[c].logpow;
    d.value = full_ok ? full.coeff(Eigen::Index(c)) : std::numeric_limits<double>::quiet_NaN();
    if (fits.size() == std::size_t(subwindows) && full_ok) {
      double lo = INFINITY, hi = -INFINITY, mean = 0.0;
      for (const auto& f : fits) {
        lo = std::min(lo, f(Eigen::Index(c)));
        hi = std::max(hi, f(Eigen::Index(c)));
        mean += f(Eigen::Index(c)) / double(fits.size());
      }
      d.spread = hi - lo;
      d.drift = mean != 0.0 ? d.spread / std::abs(mean) : (d.spread == 0.0 ? 0.0 : INFINITY);
      d.detected = d.drift < threshold && std::abs(d.value) > d.spread;
    } else {
      d.spread = d.drift = INFINITY;
    }
    rep.coefficients.push_back(d);
  }
  return rep;
}

// ---- predicted vs fitted ----

struct KeyComparison {
  double power = 0.0;
  int logpow = 0;
  double predicted = 0.0;
  double fitted = 0.0;
  double rel_diff = 0.0;
  bool within = false;
};

struct ComparisonReport {
  std::vector<KeyComparison> shared;
  std::vector<SeriesTerm> only_predicted;
  std::vector<SeriesTerm> only_fitted;
  bool all_within = true;
};

inline ComparisonReport sal_vs_fit(const ExpansionSeries& predicted, const ExpansionSeries& fitted,
                                   double tolerance) {
  ExpansionSeries p = predicted, f = fitted;
  p.normalize();
  f.normalize();
  auto key_match = [](const SeriesTerm& a, const SeriesTerm& b) {
    return std::abs(a.power - b.power) < 1e-12 && a.logpow == b.logpow;
  };
  ComparisonReport rep;
  for (const auto& a : p.terms) {
    auto it = std::find_if(f.terms.begin(), f.terms.end(), [&](const SeriesTerm& b) { return key_match(a, b); });
    if (it == f.terms.end()) {
      rep.only_predicted.push_back(a);
      continue;
    }
    KeyComparison k{a.power, a.logpow, a.coeff, it->coeff, 0.0, false};
    const double den = std::max(std::abs(a.coeff), std::abs(it->coeff));
    k.rel_diff = den > 0.0 ? std::abs(a.coeff - it->coeff) / den : 0.0;
    k.within = k.rel_diff <= tolerance;
    rep.all_within = rep.all_within && k.within;
    rep.shared.push_back(k);
  }
  for (const auto& b : f.terms) {
    if (std::none_of(p.terms.begin(), p.terms.end(), [&](const SeriesTerm& a) { return key_match(a, b); })) {
      rep.only_fitted.push_back(b);
    }
  }
  return rep;
}

// ---- sequential peeling ----

// Leading two coefficients of y = c0 z^p0 + c1 z^p1 + O(z^p2) by Richardson
// elimination on the two largest samples, one term at a time.
inline std::pair<double, double> peel_leading(const TraceSamples& s, double p0, double p1, double p2) {
  if (s.z_grid.size() < 2) throw PreconditionError("peel_leading: need two samples");
  if (!(p0 > p1 && p1 > p2)) throw PreconditionError("peel_leading: need p0 > p1 > p2");
  const std::size_t n = s.z_grid.size();
  const double za = s.z_grid[n - 2], zb = s.z_grid[n - 1];
  const double ya = s.values[n - 2], yb = s.values[n - 1];
  // u(z) = y z^{-p0} = c0 + c1 z^{p1-p0}: eliminate the z^{p1-p0} term.
  auto eliminate = [](double ua, double ub, double za, double zb, double gap) {
    const double ra = std::pow(za, gap), rb = std::pow(zb, gap);
    return (ub * ra - ua * rb) / (ra - rb);
  };
  const double c0 = eliminate(ya * std::pow(za, -p0), yb * std::pow(zb, -p0), za, zb, p1 - p0);
  const double ra = (ya - c0 * std::pow(za, p0)) * std::pow(za, -p1);
  const double rb = (yb - c0 * std::pow(zb, p0)) * std::pow(zb, -p1);
  const double c1 = eliminate(ra, rb, za, zb, p2 - p1);
  return {c0, c1};
}

// ---- serialization ----

inline nlohmann::json to_json(const DriftReport& r) {
  nlohmann::json j;
  j["windows"] = nlohmann::json::array();
  for (const auto& [lo, hi] : r.windows) j["windows"].push_back({lo, hi});
  j["coefficients"] = nlohmann::json::array();
  for (const auto& c : r.coefficients) {
    j["coefficients"].push_back({{"power", c.power},
                                 {"logpow", c.logpow},
                                 {"value", c.value},
                                 {"spread", std::isfinite(c.spread) ? nlohmann::json(c.spread) : nlohmann::json(nullptr)},
                                 {"drift", std::isfinite(c.drift) ? nlohmann::json(c.drift) : nlohmann::json(nullptr)},
                                 {"status", c.detected ? "detected" : "not detected"}});
  }
  j["notes"] = r.notes;
  return j;
}

inline nlohmann::json to_json(const ComparisonReport& r) {
  nlohmann::json j;
  j["shared"] = nlohmann::json::array();
  for (const auto& k : r.shared) {
    j["shared"].push_back({{"power", k.power},
                           {"logpow", k.logpow},
                           {"predicted", k.predicted},
                           {"fitted", k.fitted},
                           {"rel_diff", k.rel_diff},
                           {"within", k.within}});
  }
  auto keys = [](const std::vector<SeriesTerm>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& t : v) a.push_back({{"power", t.power}, {"logpow", t.logpow}, {"coeff", t.coeff}});
    return a;
  };
  j["only_predicted"] = keys(r.only_predicted);
  j["only_fitted"] = keys(r.only_fitted);
  j["all_within"] = r.all_within;
  return j;
}

}  // namespace conetrace
