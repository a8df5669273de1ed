#pragma once

// Batch experiments: a JSON config describes the model, the z grid and the
// fit; run_experiment builds the spectrum, samples the trace, fits the
// expansion and writes a report bundle whose files are content-hashed.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "conetrace/bessel.hpp"
#include "conetrace/bessel_zeros.hpp"
#include "conetrace/cache.hpp"
#include "conetrace/cone_trace.hpp"
#include "conetrace/edge_trace.hpp"
#include "conetrace/fit.hpp"
#include "conetrace/parallel.hpp"
#include "conetrace/sal.hpp"
#include "conetrace/spectra.hpp"

namespace conetrace {

enum class ModelKind { cone, edge, iterated_cone };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::cone: return "cone";
    case ModelKind::edge: return "edge";
    case ModelKind::iterated_cone: return "iterated-cone";
  }
  return "?";
}

struct ModelSpec {
  ModelKind kind = ModelKind::cone;
  double beta = 0.0;
  int m = 0;
  int b = 0;
  double L = 0.0;                   // edge only
  DoubleBc bc = DoubleBc::dirichlet_double;  // iterated-cone only
  double cutoff = 0.0;              // iterated-cone: bound on nu'
  std::uint64_t circle_cutoff = 10; // Fourier index of the circle spectrum

  int dim() const { return kind == ModelKind::iterated_cone ? 3 : 2 + b; }
  int depth() const { return kind == ModelKind::iterated_cone ? 2 : 1; }
  std::vector<Stratum> strata() const {
    if (kind == ModelKind::iterated_cone) return {{1, 1}, {0, 2}};
    return {{b, 1}};
  }
  // Volume of the region the spectrum lives on (radius 1, torus side L).
  // Dirichlet-double keeps the odd modes of the doubled cone, which are the
  // Dirichlet modes of one half; Neumann-double keeps both halves.
  double volume() const {
    const double pi = std::numbers::pi;
    switch (kind) {
      case ModelKind::cone: return pi * beta;
      case ModelKind::edge: return std::pow(L, b) * pi * beta;
      case ModelKind::iterated_cone: return (bc == DoubleBc::dirichlet_double ? 1.0 : 2.0) * pi * beta / 3.0;
    }
    return 0.0;
  }
};

struct GridSpec {
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  std::string spacing = "log";
};

struct FitSpec {
  double z_min = 8.0;
  double z_max = 512.0;
  int orders = 2;
  int max_log = 1;
  int samples_per_coeff = 12;
  int subwindows = 2;
  double drift_threshold = 0.05;
  double max_condition = 1e12;
};

struct OracleSpec {
  bool enabled = false;
  Route route = Route::eigensum;
  std::size_t points = 3;
  double tolerance = 1e-6;
};

struct ExperimentConfig {
  ModelSpec model;
  GridSpec grid;
  FitSpec fit;
  Route route = Route::kernel;
  OracleSpec oracle;
  std::optional<double> weyl_tolerance;
  std::size_t workers = default_workers();
  std::string cache_dir;
  std::string output_dir;
};

// Leading Weyl coefficient of z^{dim - 2m}: (4 pi)^{-n/2} Gamma(m - n/2) / Gamma(m) vol.
inline double weyl_coefficient(const ModelSpec& m) {
  const double n = m.dim();
  return std::pow(4.0 * std::numbers::pi, -0.5 * n) * std::tgamma(m.m - 0.5 * n) / std::tgamma(double(m.m)) *
         m.volume();
}

// ---- config parsing ----

namespace detail {

inline const nlohmann::json* find_path(const nlohmann::json& j, const std::string& path) {
  const nlohmann::json* cur = &j;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return cur;
}

inline double need_number(const nlohmann::json& j, const std::string& path) {
  const auto* v = find_path(j, path);
  if (!v) throw ConfigError(path, "required field missing");
  if (!v->is_number()) throw ConfigError(path, "must be a number");
  return v->get<double>();
}

inline double opt_number(const nlohmann::json& j, const std::string& path, double fallback) {
  const auto* v = find_path(j, path);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(path, "must be a number");
  return v->get<double>();
}

inline int need_int(const nlohmann::json& j, const std::string& path) {
  const double v = need_number(j, path);
  if (v != std::floor(v)) throw ConfigError(path, "must be an integer");
  return int(v);
}

inline int opt_int(const nlohmann::json& j, const std::string& path, int fallback) {
  const double v = opt_number(j, path, fallback);
  if (v != std::floor(v)) throw ConfigError(path, "must be an integer");
  return int(v);
}

inline std::string need_string(const nlohmann::json& j, const std::string& path) {
  const auto* v = find_path(j, path);
  if (!v) throw ConfigError(path, "required field missing");
  if (!v->is_string()) throw ConfigError(path, "must be a string");
  return v->get<std::string>();
}

inline std::string opt_string(const nlohmann::json& j, const std::string& path, const std::string& fallback) {
  const auto* v = find_path(j, path);
  if (!v) return fallback;
  if (!v->is_string()) throw ConfigError(path, "must be a string");
  return v->get<std::string>();
}

inline void reject_unknown(const nlohmann::json& j, const std::string& where, const std::set<std::string>& known) {
  if (!j.is_object()) throw ConfigError(where.empty() ? "config" : where, "must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(where.empty() ? k : where + "." + k, "unknown field");
  }
}

inline std::size_t count_in_window(const std::vector<double>& z, double lo, double hi) {
  std::size_t n = 0;
  for (double v : z) n += (v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12)) ? 1 : 0;
  return n;
}

}  // namespace detail

// Structural and physical validation; throws ConfigError (field-level) or
// TraceClassError.
inline void validate(const ExperimentConfig& c) {
  const auto& m = c.model;
  if (!(m.beta > 0.0)) throw ConfigError("model.beta", "must be > 0");
  if (m.m < 1) throw ConfigError("model.m", "must be >= 1");
  if (m.kind == ModelKind::edge) {
    if (m.b < 1) throw ConfigError("model.b", "an edge needs b >= 1");
    if (!(m.L > 0.0)) throw ConfigError("model.L", "must be > 0");
  } else if (m.b != 0) {
    throw ConfigError("model.b", std::string("must be 0 for a ") + to_string(m.kind));
  }
  if (m.kind == ModelKind::iterated_cone && !(m.cutoff >= 1.0)) throw ConfigError("model.cutoff", "must be >= 1");
  if (m.circle_cutoff < 1) throw ConfigError("model.circle_cutoff", "must be >= 1");
  check_trace_class(m.m, m.dim(), "model");
  if (c.grid.spacing != "log") throw ConfigError("z_grid.spacing", "only 'log' is supported");
  if (!(c.grid.min > 0.0 && c.grid.max > c.grid.min)) throw ConfigError("z_grid", "need 0 < min < max");
  if (c.grid.count < 2) throw ConfigError("z_grid.count", "must be >= 2");
  const auto& f = c.fit;
  if (!(f.z_min >= c.grid.min * (1 - 1e-12) && f.z_max <= c.grid.max * (1 + 1e-12) && f.z_min < f.z_max)) {
    throw ConfigError("fit.window", "must lie inside the z grid");
  }
  if (f.orders < 0) throw ConfigError("fit.orders", "must be >= 0");
  if (f.max_log < 0) throw ConfigError("fit.max_log", "must be >= 0");
  if (f.max_log > m.depth()) {
    throw ConfigError("fit.max_log", "log power " + std::to_string(f.max_log) + " exceeds the depth " +
                                         std::to_string(m.depth()) + " of a " + to_string(m.kind));
  }
  if (f.samples_per_coeff < 3) throw ConfigError("fit.samples_per_coeff", "must be >= 3");
  if (f.subwindows < 2) throw ConfigError("fit.subwindows", "must be >= 2");
  const auto basis = structure_basis(m.dim(), m.m, m.strata(), f.orders, f.max_log);
  const auto z = log_grid(c.grid.min, c.grid.max, c.grid.count);
  const std::size_t have = detail::count_in_window(z, f.z_min, f.z_max);
  const std::size_t need = std::size_t(f.samples_per_coeff) * basis.terms.size();
  if (have < need) {
    throw ConfigError("z_grid.count", std::to_string(have) + " grid points in the fit window, the basis needs " +
                                          std::to_string(need));
  }
  if (c.oracle.enabled) {
    if (c.oracle.route == c.route) throw ConfigError("oracle.route", "must differ from the primary route");
    if (c.oracle.route == Route::lattice) throw ConfigError("oracle.route", "must be kernel or eigensum");
    if (c.oracle.points < 1) throw ConfigError("oracle.points", "must be >= 1");
  }
  if (c.route == Route::lattice) throw ConfigError("route", "must be kernel or eigensum");
  if (c.workers < 1) throw ConfigError("workers", "must be >= 1");
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  using namespace detail;
  reject_unknown(j, "", {"model", "z_grid", "fit", "route", "oracle", "weyl_tolerance", "workers", "cache_dir", "output_dir"});
  ExperimentConfig c;
  if (!j.contains("model")) throw ConfigError("model", "required field missing");
  reject_unknown(j["model"], "model", {"kind", "beta", "m", "b", "L", "bc", "cutoff", "circle_cutoff"});
  const std::string kind = need_string(j, "model.kind");
  if (kind == "cone") c.model.kind = ModelKind::cone;
  else if (kind == "edge") c.model.kind = ModelKind::edge;
  else if (kind == "iterated-cone") c.model.kind = ModelKind::iterated_cone;
  else throw ConfigError("model.kind", "must be cone, edge or iterated-cone");
  c.model.beta = need_number(j, "model.beta");
  c.model.m = need_int(j, "model.m");
  c.model.b = need_int(j, "model.b");
  if (c.model.kind == ModelKind::edge) c.model.L = need_number(j, "model.L");
  if (c.model.kind == ModelKind::iterated_cone) {
    try {
      c.model.bc = parse_double_bc(need_string(j, "model.bc"));
    } catch (const ConfigError& e) {
      if (e.field() == "model.bc") throw;
      throw ConfigError("model.bc", "must be dirichlet-double or neumann-double");
    }
    c.model.cutoff = need_number(j, "model.cutoff");
  }
  const int cc = opt_int(j, "model.circle_cutoff", 10);
  if (cc < 1) throw ConfigError("model.circle_cutoff", "must be >= 1");
  c.model.circle_cutoff = std::uint64_t(cc);

  if (!j.contains("z_grid")) throw ConfigError("z_grid", "required field missing");
  reject_unknown(j["z_grid"], "z_grid", {"min", "max", "count", "spacing"});
  c.grid.min = need_number(j, "z_grid.min");
  c.grid.max = need_number(j, "z_grid.max");
  const int count = need_int(j, "z_grid.count");
  if (count < 2) throw ConfigError("z_grid.count", "must be >= 2");
  c.grid.count = std::size_t(count);
  c.grid.spacing = opt_string(j, "z_grid.spacing", "log");

  if (!j.contains("fit")) throw ConfigError("fit", "required field missing");
  reject_unknown(j["fit"], "fit", {"z_min", "z_max", "orders", "max_log", "samples_per_coeff", "subwindows",
                                   "drift_threshold", "max_condition"});
  c.fit.z_min = opt_number(j, "fit.z_min", c.grid.min);
  c.fit.z_max = opt_number(j, "fit.z_max", c.grid.max);
  c.fit.orders = need_int(j, "fit.orders");
  c.fit.max_log = need_int(j, "fit.max_log");
  c.fit.samples_per_coeff = opt_int(j, "fit.samples_per_coeff", 12);
  c.fit.subwindows = opt_int(j, "fit.subwindows", 2);
  c.fit.drift_threshold = opt_number(j, "fit.drift_threshold", 0.05);
  c.fit.max_condition = opt_number(j, "fit.max_condition", 1e12);

  try {
    c.route = parse_route(opt_string(j, "route", "kernel"));
  } catch (const ConfigError&) {
    throw ConfigError("route", "must be kernel or eigensum");
  }
  if (j.contains("oracle")) {
    reject_unknown(j["oracle"], "oracle", {"route", "points", "tolerance"});
    c.oracle.enabled = true;
    try {
      c.oracle.route = parse_route(opt_string(j, "oracle.route", "eigensum"));
    } catch (const ConfigError&) {
      throw ConfigError("oracle.route", "must be kernel or eigensum");
    }
    const int pts = opt_int(j, "oracle.points", 3);
    if (pts < 1) throw ConfigError("oracle.points", "must be >= 1");
    c.oracle.points = std::size_t(pts);
    c.oracle.tolerance = opt_number(j, "oracle.tolerance", 1e-6);
  }
  if (j.contains("weyl_tolerance")) c.weyl_tolerance = need_number(j, "weyl_tolerance");
  if (j.contains("workers")) {
    const int w = need_int(j, "workers");
    if (w < 1) throw ConfigError("workers", "must be >= 1");
    c.workers = std::size_t(w);
  }
  c.cache_dir = opt_string(j, "cache_dir", "");
  c.output_dir = opt_string(j, "output_dir", "");
  validate(c);
  return c;
}

// Config fields that determine the results (workers, cache and output
// locations excluded).
inline nlohmann::json canonical_config(const ExperimentConfig& c) {
  nlohmann::json model{{"kind", to_string(c.model.kind)},
                       {"beta", c.model.beta},
                       {"m", c.model.m},
                       {"b", c.model.b},
                       {"circle_cutoff", c.model.circle_cutoff}};
  if (c.model.kind == ModelKind::edge) model["L"] = c.model.L;
  if (c.model.kind == ModelKind::iterated_cone) {
    model["bc"] = to_string(c.model.bc);
    model["cutoff"] = c.model.cutoff;
  }
  nlohmann::json j{{"model", model},
                   {"z_grid", {{"min", c.grid.min}, {"max", c.grid.max}, {"count", c.grid.count}, {"spacing", c.grid.spacing}}},
                   {"fit",
                    {{"z_min", c.fit.z_min},
                     {"z_max", c.fit.z_max},
                     {"orders", c.fit.orders},
                     {"max_log", c.fit.max_log},
                     {"samples_per_coeff", c.fit.samples_per_coeff},
                     {"subwindows", c.fit.subwindows},
                     {"drift_threshold", c.fit.drift_threshold},
                     {"max_condition", c.fit.max_condition}}},
                   {"route", to_string(c.route)}};
  if (c.oracle.enabled) {
    j["oracle"] = {{"route", to_string(c.oracle.route)}, {"points", c.oracle.points}, {"tolerance", c.oracle.tolerance}};
  }
  if (c.weyl_tolerance) j["weyl_tolerance"] = *c.weyl_tolerance;
  return j;
}

// ---- running ----

struct ExperimentResult {
  nlohmann::json report;
  bool pass = true;
  std::map<std::string, std::string> files;  // name -> content, report.json included
  CacheStats cache;
};

namespace detail {

// Orders the eigensum route will visit up to z_max, with their exact-zero counts.
inline std::vector<std::pair<double, std::size_t>> eigensum_orders(const CrossSectionSpectrum& s, double z_max,
                                                                   const ConeOptions& opt) {
  std::vector<std::pair<double, std::size_t>> out;
  for (const auto& e : s.entries) out.emplace_back(e.nu, eigensum_exact_count(e.nu, opt.eigensum));
  if (s.tail.kind == TailModel::Kind::arithmetic) {
    const double reach = opt.explicit_slope * z_max + opt.explicit_pad;
    for (std::uint64_t n = s.tail.last_index; double(n) * s.tail.spacing < reach;) {
      ++n;
      const double nu = double(n) * s.tail.spacing;
      out.emplace_back(nu, eigensum_exact_count(nu, opt.eigensum));
    }
  }
  return out;
}

inline TraceSamples sample_model(const ModelSpec& m, const CrossSectionSpectrum& s, const std::vector<double>& z,
                                 Route route, std::size_t workers) {
  ConeOptions opt;
  opt.route = route;
  opt.workers = workers;
  if (m.kind == ModelKind::edge) {
    EdgeOptions eo;
    eo.cone = opt;
    auto out = sample_edge_trace(EdgeProblem{{s, m.m}, m.b, m.L}, z, eo);
    out.route = route;
    return out;
  }
  return sample_cone_trace(ConeProblem{s, m.m}, z, opt);
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

inline CrossSectionSpectrum build_model_spectrum(const ModelSpec& m, DiskCache& cache, std::size_t workers = 1) {
  if (m.kind != ModelKind::iterated_cone) return circle_scalar_spectrum(m.beta, m.circle_cutoff);
  // The inner circle must be complete beyond the outer cutoff.
  const auto inner_n = std::max<std::uint64_t>(m.circle_cutoff, std::uint64_t(std::ceil(m.cutoff * m.beta)) + 1);
  return cached_iterated_cone_spectrum(cache, circle_scalar_spectrum(m.beta, inner_n), m.bc, m.cutoff, workers);
}

inline ExperimentResult run_experiment(const ExperimentConfig& c, std::ostream* log = nullptr) {
  validate(c);
  ExperimentResult res;
  DiskCache cache(resolve_cache_root(c.cache_dir), log);
  const auto& m = c.model;
  auto note = [&](const std::string& s) {
    if (log) *log << s << "\n";
  };

  // spectrum
  const auto spectrum = build_model_spectrum(m, cache, c.workers);
  res.files["spectrum.txt"] = serialize_spectrum(spectrum);
  const auto witt = witt_check(spectrum);
  note("spectrum: " + std::to_string(spectrum.entries.size()) + " distinct modes");

  // samples
  const auto z = log_grid(c.grid.min, c.grid.max, c.grid.count);
  std::vector<Route> routes{c.route};
  if (c.oracle.enabled) routes.push_back(c.oracle.route);
  if (std::find(routes.begin(), routes.end(), Route::eigensum) != routes.end()) {
    ConeOptions opt;
    preload_zero_cache(cache, ZeroCache::global(), detail::eigensum_orders(spectrum, c.grid.max, opt));
  }
  const auto primary = detail::sample_model(m, spectrum, z, c.route, c.workers);
  const std::string primary_file = std::string("samples_") + to_string(c.route) + ".csv";
  res.files[primary_file] = samples_to_csv(primary);
  note("sampled " + std::to_string(z.size()) + " points on the " + to_string(c.route) + " route");

  nlohmann::json verdicts;
  // oracle agreement
  if (c.oracle.enabled) {
    std::vector<double> oz;
    const std::size_t k = std::min(c.oracle.points, z.size());
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t idx = k == 1 ? z.size() - 1 : i * (z.size() - 1) / (k - 1);
      oz.push_back(z[idx]);
    }
    const auto oracle = detail::sample_model(m, spectrum, oz, c.oracle.route, c.workers);
    res.files[std::string("samples_") + to_string(c.oracle.route) + ".csv"] = samples_to_csv(oracle);
    nlohmann::json rows = nlohmann::json::array();
    bool ok = true;
    double worst = 0.0;
    for (std::size_t i = 0; i < oz.size(); ++i) {
      const auto it = std::lower_bound(z.begin(), z.end(), oz[i]);
      const std::size_t idx = std::size_t(it - z.begin());
      const double rel = std::abs(primary.values[idx] - oracle.values[i]) / std::abs(oracle.values[i]);
      worst = std::max(worst, rel);
      ok = ok && rel <= c.oracle.tolerance;
      rows.push_back({{"z", oz[i]},
                      {"primary", {{"route", to_string(c.route)}, {"value", primary.values[idx]}, {"error_bound", primary.tail_bound[idx]}}},
                      {"oracle", {{"route", to_string(c.oracle.route)}, {"value", oracle.values[i]}, {"error_bound", oracle.tail_bound[i]}}},
                      {"rel_diff", rel}});
    }
    verdicts["oracle"] = {{"hard", true}, {"pass", ok}, {"tolerance", c.oracle.tolerance}, {"max_rel_diff", worst}, {"points", rows}};
    res.pass = res.pass && ok;
  }

  // fit
  auto basis = structure_basis(m.dim(), m.m, m.strata(), c.fit.orders, c.fit.max_log);
  basis.z_min = c.fit.z_min;
  basis.z_max = c.fit.z_max;
  basis.samples_per_coeff = c.fit.samples_per_coeff;
  const FitOptions fopt{Weighting::relative, c.fit.max_condition};
  nlohmann::json fit_json;
  ExpansionSeries fitted;
  try {
    fitted = fit_expansion(primary, basis, fopt);
  } catch (const IllConditionedError& e) {
    verdicts["fit"] = {{"hard", true}, {"pass", false}, {"error", e.what()}, {"condition", detail::finite_or_null(e.condition())}};
    res.pass = false;
  }
  if (!fitted.terms.empty()) {
    const auto drift = stability_probe(primary, basis, c.fit.subwindows, c.fit.drift_threshold, fopt);
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& t : fitted.terms) {
      const auto* d = drift.find(t.power, t.logpow);
      coeffs.push_back({{"power", t.power},
                        {"logpow", t.logpow},
                        {"coeff", t.coeff},
                        {"route", to_string(c.route)},
                        {"spread", detail::finite_or_null(d ? d->spread : INFINITY)},
                        {"drift", detail::finite_or_null(d ? d->drift : INFINITY)},
                        {"status", d && d->detected ? "detected" : "not detected"}});
    }
    fit_json = fitted;
    res.files["fit.json"] = fit_json.dump(2) + "\n";
    verdicts["stability"] = {{"hard", false}, {"coefficients", coeffs}, {"windows", to_json(drift)["windows"]}, {"notes", drift.notes}};

    const double lead_power = double(m.dim() - 2 * m.m);
    const double expected = weyl_coefficient(m);
    const double got = fitted.coefficient(lead_power, 0);
    const double rel = std::abs(got - expected) / std::abs(expected);
    nlohmann::json w{{"power", lead_power}, {"expected", expected}, {"fitted", got}, {"rel_diff", rel}, {"route", to_string(c.route)}};
    if (c.weyl_tolerance) {
      w["hard"] = true;
      w["tolerance"] = *c.weyl_tolerance;
      w["pass"] = rel <= *c.weyl_tolerance;
      res.pass = res.pass && rel <= *c.weyl_tolerance;
    } else {
      w["hard"] = false;
    }
    verdicts["weyl"] = w;

    std::string resid = "z,value,fitted,rel_residual\n";
    for (std::size_t i = 0; i < primary.z_grid.size(); ++i) {
      const double zi = primary.z_grid[i];
      if (zi < basis.z_min * (1 - 1e-12) || zi > basis.z_max * (1 + 1e-12)) continue;
      const double f = fitted.evaluate(zi);
      resid += format_double(zi) + "," + format_double(primary.values[i]) + "," + format_double(f) + "," +
               format_double((primary.values[i] - f) / primary.values[i]) + "\n";
    }
    res.files["residuals.csv"] = resid;
  }

  nlohmann::json witt_json{{"hard", false},
                           {"margin", witt.margin},
                           {"satisfied", witt.satisfied},
                           {"offending_modes", witt.offending_modes.size()}};
  if (!witt.satisfied) witt_json["note"] = "modes with nu <= 3/2 use the Friedrichs extension";
  verdicts["witt"] = witt_json;

  nlohmann::json outputs = nlohmann::json::object();
  for (const auto& [name, content] : res.files) outputs[name] = sha256_hex(content);
  const auto canon = canonical_config(c);
  res.report = {{"format", "conetrace-report 1"},
                {"config", canon},
                {"config_hash", sha256_hex(canon.dump())},
                {"model",
                 {{"dim", m.dim()},
                  {"depth", m.depth()},
                  {"spectrum_hash", spectrum_hash(spectrum)},
                  {"modes", spectrum.total_multiplicity()},
                  {"complete_below", detail::finite_or_null(spectrum.complete_below)}}},
                {"outputs", outputs},
                {"verdicts", verdicts},
                {"pass", res.pass}};
  res.files["report.json"] = res.report.dump(2) + "\n";
  res.cache = cache.stats();

  if (!c.output_dir.empty()) {
    std::filesystem::create_directories(c.output_dir);
    for (const auto& [name, content] : res.files) {
      const auto path = std::filesystem::path(c.output_dir) / name;
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!(out << content)) throw Error("cannot write " + path.string());
    }
  }
  return res;
}

// ---- verify-sal configs ----

// phi(x): {"kind": "exp", "rate": a} = e^{-a x}, or
// {"kind": "compact-poly", "coeffs": [c0, c1, ...]} = sum c_k x^k on [0, 1].
// g(zeta) = (1 + zeta^q)^{-p}: {"q": 1 | 2, "p": p}.
inline SymbolProvider parse_symbol_config(const nlohmann::json& j) {
  using namespace detail;
  if (!j.contains("symbol")) throw ConfigError("symbol", "required field missing");
  reject_unknown(j["symbol"], "symbol", {"phi", "g", "terms"});
  const std::string kind = need_string(j, "symbol.phi.kind");
  std::function<double(double)> phi;
  std::function<double(int)> taylor;
  double x_max = 40.0;
  if (kind == "exp") {
    const double a = need_number(j, "symbol.phi.rate");
    if (!(a > 0.0)) throw ConfigError("symbol.phi.rate", "must be > 0");
    phi = [a](double x) { return std::exp(-a * x); };
    taylor = [a](int k) { return std::pow(-a, k); };
    x_max = 40.0 / a;
  } else if (kind == "compact-poly") {
    const auto* cj = find_path(j, "symbol.phi.coeffs");
    if (!cj || !cj->is_array() || cj->empty()) throw ConfigError("symbol.phi.coeffs", "must be a non-empty array");
    std::vector<double> c;
    for (const auto& v : *cj) {
      if (!v.is_number()) throw ConfigError("symbol.phi.coeffs", "must contain numbers");
      c.push_back(v.get<double>());
    }
    phi = [c](double x) {
      if (x >= 1.0) return 0.0;
      double s = 0.0;
      for (std::size_t k = c.size(); k-- > 0;) s = s * x + c[k];
      return s;
    };
    taylor = [c](int k) { return k < int(c.size()) ? c[std::size_t(k)] * std::tgamma(k + 1.0) : 0.0; };
    x_max = 2.0;
  } else {
    throw ConfigError("symbol.phi.kind", "must be exp or compact-poly");
  }
  const int q = need_int(j, "symbol.g.q");
  if (q != 1 && q != 2) throw ConfigError("symbol.g.q", "must be 1 or 2");
  const double p = need_number(j, "symbol.g.p");
  if (!(p > 0.0)) throw ConfigError("symbol.g.p", "must be > 0");
  const int nterms = opt_int(j, "symbol.terms", 10);
  if (nterms < 1) throw ConfigError("symbol.terms", "must be >= 1");
  // (1 + zeta^q)^{-p} = sum_n C(-p, n) zeta^{-q p - q n}
  std::vector<PowerLogTerm> g;
  double binom = 1.0;
  for (int n = 0; n < nterms; ++n) {
    g.push_back({-q * p - q * n, 0, binom});
    binom *= (-p - n) / double(n + 1);
  }
  const double remainder = -q * p - q * nterms;
  return separable_symbol(phi, taylor, [q, p](double zeta) { return std::pow(1.0 + std::pow(zeta, q), -p); }, g,
                          remainder, x_max);
}

struct SalRunConfig {
  SymbolProvider symbol;
  SalOrders orders;
  std::vector<double> z_grid;
  double tolerance = 0.2;
};

inline SalRunConfig parse_sal_run_config(const nlohmann::json& j) {
  using namespace detail;
  reject_unknown(j, "", {"symbol", "order", "z_grid", "tolerance"});
  SalRunConfig c;
  c.symbol = parse_symbol_config(j);
  c.orders.order = need_int(j, "order");
  if (c.orders.order < 1) throw ConfigError("order", "must be >= 1");
  reject_unknown(j.at("z_grid"), "z_grid", {"min", "max", "count", "spacing"});
  const double lo = need_number(j, "z_grid.min"), hi = need_number(j, "z_grid.max");
  const int n = need_int(j, "z_grid.count");
  if (!(lo > 0.0 && hi > lo) || n < 3) throw ConfigError("z_grid", "need 0 < min < max and count >= 3");
  if (opt_string(j, "z_grid.spacing", "log") != "log") throw ConfigError("z_grid.spacing", "only 'log' is supported");
  c.z_grid = log_grid(lo, hi, std::size_t(n));
  c.tolerance = opt_number(j, "tolerance", 0.2);
  return c;
}

inline nlohmann::json to_json(const SalDiagnostics& d) {
  nlohmann::json orders = nlohmann::json::array();
  for (const auto& o : d.orders) {
    orders.push_back({{"subtracted_through", o.subtracted_through},
                      {"slope", detail::finite_or_null(o.slope)},
                      {"expected_slope", o.expected_slope},
                      {"pass", o.pass}});
  }
  nlohmann::json hyp{{"ok", d.hypotheses.ok}, {"violated", d.hypotheses.violated}, {"detail", d.hypotheses.detail}};
  return {{"series", nlohmann::json(d.series)},
          {"orders", orders},
          {"hypotheses", hyp},
          {"max_abs_residual", detail::finite_or_null(d.max_abs_residual)},
          {"pass", d.pass}};
}

// ---- dump-special ----

// {"function": "bessel_i" | "bessel_k" | "bessel_j" | "log_bessel_i" | "log_bessel_k",
//  "scaled": bool, "nu": [..], "x": {"min", "max", "count", "spacing": "log" | "linear"}}
inline std::string dump_special_table(const nlohmann::json& j) {
  using namespace detail;
  reject_unknown(j, "", {"function", "scaled", "nu", "x"});
  const std::string fn = need_string(j, "function");
  const bool scaled = j.contains("scaled") ? j["scaled"].get<bool>() : false;
  const auto* nus = find_path(j, "nu");
  if (!nus || !nus->is_array() || nus->empty()) throw ConfigError("nu", "must be a non-empty array");
  reject_unknown(j.at("x"), "x", {"min", "max", "count", "spacing"});
  const double lo = need_number(j, "x.min"), hi = need_number(j, "x.max");
  const int n = need_int(j, "x.count");
  const std::string spacing = opt_string(j, "x.spacing", "log");
  if (!(lo > 0.0 && hi > lo) || n < 2) throw ConfigError("x", "need 0 < min < max and count >= 2");
  std::vector<double> xs;
  if (spacing == "log") {
    xs = log_grid(lo, hi, std::size_t(n));
  } else if (spacing == "linear") {
    for (int i = 0; i < n; ++i) xs.push_back(lo + (hi - lo) * double(i) / double(n - 1));
  } else {
    throw ConfigError("x.spacing", "must be log or linear");
  }
  std::function<double(double, double)> f;
  if (fn == "bessel_i") f = scaled ? bessel_i_scaled : bessel_i;
  else if (fn == "bessel_k") f = scaled ? bessel_k_scaled : bessel_k;
  else if (fn == "bessel_j") f = bessel_j;
  else if (fn == "log_bessel_i") f = log_bessel_i;
  else if (fn == "log_bessel_k") f = log_bessel_k;
  else throw ConfigError("function", "unknown function '" + fn + "'");
  std::string out = "nu,x,value\n";
  for (const auto& v : *nus) {
    if (!v.is_number() || !(v.get<double>() >= 0.0)) throw ConfigError("nu", "orders must be numbers >= 0");
    const double nu = v.get<double>();
    for (double x : xs) out += format_double(nu) + "," + format_double(x) + "," + format_double(f(nu, x)) + "\n";
  }
  return out;
}

}  // namespace conetrace
