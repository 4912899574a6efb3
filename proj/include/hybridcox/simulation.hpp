#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hybridcox/cox.hpp"
#include "hybridcox/dataset.hpp"
#include "hybridcox/error.hpp"
#include "hybridcox/methods.hpp"
#include "hybridcox/missingness.hpp"
#include "hybridcox/rng.hpp"

namespace hybridcox {

// ---------------------------------------------------------------------------
// Data sources

/// Three-level categorical `z`, a continuous `x1` whose mean shifts with the
/// level of `z`, an independent standard normal `x2`; exponential event
/// times with hazard h0 * exp(beta' x) and independent exponential censoring.
struct SyntheticDesign {
  std::vector<std::string> levels{"a", "b", "c"};
  std::vector<double> level_probs{0.4, 0.35, 0.25};
  /// Mean of x1 for each level of z.
  std::vector<double> x1_means{-0.6, 0.0, 0.6};
  double x1_sd = 1.0;
  /// Coefficients for z[b], z[c], ..., x1, x2.
  std::vector<double> beta{0.5, 1.0, 0.5, -0.5};
  double baseline_hazard = 0.1;
  double censoring = 0.33;

  [[nodiscard]] std::vector<std::string> coefficient_names() const {
    std::vector<std::string> out;
    for (std::size_t k = 1; k < levels.size(); ++k) out.push_back(dummy_name("z", levels[k]));
    out.emplace_back("x1");
    out.emplace_back("x2");
    return out;
  }

  void validate() const {
    detail::require(levels.size() >= 2, "design: need at least two levels");
    detail::require(level_probs.size() == levels.size() && x1_means.size() == levels.size(),
                    "design: level_probs and x1_means need one entry per level");
    detail::require(beta.size() == levels.size() + 1, "design: beta needs K-1 dummy coefficients plus x1 and x2");
    detail::require(censoring > 0.0 && censoring < 1.0, "design: censoring target must lie in (0, 1)");
    detail::require(baseline_hazard > 0.0 && x1_sd > 0.0, "design: baseline hazard and x1 sd must be positive");
    for (double p : level_probs) detail::require(p > 0.0, "design: level probabilities must be positive");
  }
};

/// Censoring rate c with mean_i c / (c + h_i) equal to the target fraction.
inline double solve_censoring_rate(const std::vector<double>& hazards, double target) {
  auto frac = [&](double logc) {
    const double c = std::exp(logc);
    double s = 0.0;
    for (double h : hazards) s += c / (c + h);
    return s / static_cast<double>(hazards.size());
  };
  double lo = -60.0, hi = 60.0;
  if (!(frac(lo) < target && frac(hi) > target)) throw NumericalError("generate_synthetic: censoring bisection failed");
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (frac(mid) < target ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

inline Dataset generate_synthetic(const SyntheticDesign& design, std::size_t n, Rng& rng) {
  design.validate();
  detail::require(n >= 1, "generate_synthetic: n must be >= 1");
  const std::size_t k = design.levels.size();
  std::discrete_distribution<int> pick(design.level_probs.begin(), design.level_probs.end());
  std::vector<int> z(n);
  std::vector<double> x1(n), x2(n), h(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = pick(rng);
    x1[i] = design.x1_means[static_cast<std::size_t>(z[i])] + design.x1_sd * standard_normal(rng);
    x2[i] = standard_normal(rng);
    double eta = design.beta[k - 1] * x1[i] + design.beta[k] * x2[i];
    if (z[i] > 0) eta += design.beta[static_cast<std::size_t>(z[i] - 1)];
    h[i] = design.baseline_hazard * std::exp(eta);
  }
  const double c = solve_censoring_rate(h, design.censoring);
  std::vector<double> time(n), event(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = -std::log1p(-uniform01(rng)) / h[i];
    const double cens = -std::log1p(-uniform01(rng)) / c;
    time[i] = std::min(t, cens);
    event[i] = t <= cens ? 1.0 : 0.0;
  }
  std::vector<Column> cols;
  cols.push_back(Column::numeric("time", ColumnKind::time, std::move(time)));
  cols.push_back(Column::numeric("event", ColumnKind::event, std::move(event)));
  cols.push_back(Column::categorical("z", design.levels, z));
  cols.push_back(Column::numeric("x1", ColumnKind::continuous, std::move(x1)));
  cols.push_back(Column::numeric("x2", ColumnKind::continuous, std::move(x2)));
  return Dataset(std::move(cols));
}

/// Synthetic data with default covariate structure and the given
/// coefficients and censoring target.
inline Dataset generate_synthetic(std::size_t n, const std::vector<double>& true_beta, double censoring, Rng& rng) {
  SyntheticDesign design;
  design.beta = true_beta;
  design.censoring = censoring;
  return generate_synthetic(design, n, rng);
}

/// Uniform sample of n rows without replacement (partial Fisher-Yates).
inline Dataset subsample(const Dataset& reference, std::size_t n, Rng& rng) {
  const std::size_t total = reference.n_rows();
  detail::require(n <= total, "subsample: n exceeds the reference size");
  detail::require(n >= 1, "subsample: n must be >= 1");
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, total - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  return reference.subset(idx);
}

inline std::vector<Dataset> subsample_replicates(const Dataset& reference, std::size_t n, std::size_t count, Rng& rng) {
  std::vector<Dataset> out;
  out.reserve(count);
  for (std::size_t r = 0; r < count; ++r) out.push_back(subsample(reference, n, rng));
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

enum class DataSource { synthetic, reference };

struct MethodEntry {
  MethodKind kind = MethodKind::cc;
  /// Only for H2-H4; one run per value.
  std::vector<double> kappas;
};

struct SimConfig {
  DataSource source = DataSource::synthetic;
  std::size_t n = 500;
  int replicates = 300;
  SyntheticDesign design;
  /// Reference mode: the complete data to subsample from.
  std::optional<Dataset> reference;
  std::string reference_path;
  /// The seed field is ignored; each replicate derives its own.
  AmputationPlan amputation{"z", {"x1", "event"}, 0.3, {}, 0, AmputationSampling::systematic};
  std::vector<MethodEntry> methods;
  int m = 10;
  std::optional<int> m1;
  Ties ties = Ties::efron;
  PropensityBounds bounds;
  TreeParams trees;
  double level = 0.95;
  std::uint64_t seed = 20240601;
  /// Abort when a method fails in more than this fraction of replicates.
  double max_failure_fraction = 0.05;

  void validate() const {
    detail::require(replicates >= 1, "simulate: replicate count must be >= 1");
    detail::require(n >= 20, "simulate: n must be >= 20");
    detail::require(!methods.empty(), "simulate: no methods listed");
    detail::require(amputation.rate >= 0.0 && amputation.rate <= 1.0, "simulate: amputation rate must lie in [0, 1]");
    if (source == DataSource::synthetic) design.validate();
    else detail::require(reference.has_value(), "simulate: reference mode needs a reference dataset");
    for (const auto& e : methods) {
      if (is_hybrid_weighted(e.kind)) detail::require(!e.kappas.empty(), "simulate: kappa grid required for hybrids");
      else detail::require(e.kappas.empty(), "kappa not applicable to " + std::string(to_string(e.kind)));
      for (double k : e.kappas) detail::require(k >= 0.0 && k <= 1.0, "simulate: kappa values must lie in [0, 1]");
    }
    bounds.validate();
  }

  /// Every (method, kappa) run, in configuration order.
  [[nodiscard]] std::vector<MethodSpec> specs() const {
    std::vector<MethodSpec> out;
    for (const auto& e : methods) {
      MethodSpec s;
      s.kind = e.kind;
      s.m = m;
      if (e.kind == MethodKind::h1) s.m1 = m1;
      s.ties = ties;
      s.bounds = bounds;
      s.trees = trees;
      s.level = level;
      if (e.kappas.empty()) {
        out.push_back(s);
      } else {
        for (double k : e.kappas) {
          s.kappa = k;
          out.push_back(s);
        }
      }
    }
    return out;
  }

  static SimConfig from_json(const nlohmann::json& j) {
    SimConfig c;
    auto get = [&](const char* key, auto& dst) {
      if (j.contains(key)) dst = j.at(key).get<std::decay_t<decltype(dst)>>();
    };
    if (j.contains("source")) {
      const auto s = j.at("source").get<std::string>();
      if (s == "synthetic") c.source = DataSource::synthetic;
      else if (s == "reference") c.source = DataSource::reference;
      else throw InputError("simulate: unknown source '" + s + "'");
    }
    get("n", c.n);
    get("replicates", c.replicates);
    get("reference", c.reference_path);
    get("m", c.m);
    if (j.contains("m1")) c.m1 = j.at("m1").get<int>();
    if (j.contains("ties")) c.ties = parse_ties(j.at("ties").get<std::string>());
    get("level", c.level);
    get("seed", c.seed);
    get("max_failure_fraction", c.max_failure_fraction);
    if (j.contains("truncation")) {
      const auto t = j.at("truncation").get<std::vector<double>>();
      detail::require(t.size() == 2, "simulate: truncation needs [lower, upper]");
      c.bounds = {t[0], t[1]};
    }
    if (j.contains("design")) {
      const auto& d = j.at("design");
      auto dget = [&](const char* key, auto& dst) {
        if (d.contains(key)) dst = d.at(key).get<std::decay_t<decltype(dst)>>();
      };
      dget("levels", c.design.levels);
      dget("level_probs", c.design.level_probs);
      dget("x1_means", c.design.x1_means);
      dget("x1_sd", c.design.x1_sd);
      dget("beta", c.design.beta);
      dget("baseline_hazard", c.design.baseline_hazard);
      dget("censoring", c.design.censoring);
    }
    if (j.contains("amputation")) {
      const auto& a = j.at("amputation");
      if (a.contains("target")) c.amputation.target = a.at("target").get<std::string>();
      if (a.contains("predictors")) c.amputation.predictors = a.at("predictors").get<std::vector<std::string>>();
      if (a.contains("weights")) c.amputation.weights = a.at("weights").get<std::vector<double>>();
      if (a.contains("rate")) c.amputation.rate = a.at("rate").get<double>();
      if (a.contains("sampling")) {
        const auto s = a.at("sampling").get<std::string>();
        if (s == "systematic") c.amputation.sampling = AmputationSampling::systematic;
        else if (s == "bernoulli") c.amputation.sampling = AmputationSampling::bernoulli;
        else throw InputError("simulate: unknown sampling '" + s + "'");
      }
    }
    if (j.contains("trees")) {
      const auto& t = j.at("trees");
      if (t.contains("n_trees")) c.trees.n_trees = t.at("n_trees").get<int>();
      if (t.contains("min_leaf")) c.trees.min_leaf = t.at("min_leaf").get<int>();
      if (t.contains("max_depth")) c.trees.max_depth = t.at("max_depth").get<int>();
      if (t.contains("features_per_split")) c.trees.features_per_split = t.at("features_per_split").get<int>();
      if (t.contains("bootstrap")) c.trees.bootstrap = t.at("bootstrap").get<bool>();
    }
    if (j.contains("methods")) {
      for (const auto& e : j.at("methods")) {
        MethodEntry me;
        if (e.is_string()) {
          me.kind = parse_method(e.get<std::string>());
        } else {
          me.kind = parse_method(e.at("method").get<std::string>());
          if (e.contains("kappa")) {
            const auto& k = e.at("kappa");
            me.kappas = k.is_array() ? k.get<std::vector<double>>() : std::vector<double>{k.get<double>()};
          }
        }
        if (is_hybrid_weighted(me.kind) && me.kappas.empty()) me.kappas = {0.0, 0.3, 0.5, 1.0};
        c.methods.push_back(me);
      }
    }
    return c;
  }

  [[nodiscard]] nlohmann::json to_json() const {
    nlohmann::json j;
    j["source"] = source == DataSource::synthetic ? "synthetic" : "reference";
    j["n"] = n;
    j["replicates"] = replicates;
    if (source == DataSource::reference) j["reference"] = reference_path;
    j["m"] = m;
    if (m1) j["m1"] = *m1;
    j["ties"] = std::string(to_string(ties));
    j["level"] = level;
    j["seed"] = seed;
    j["max_failure_fraction"] = max_failure_fraction;
    j["truncation"] = {bounds.lower, bounds.upper};
    if (source == DataSource::synthetic)
      j["design"] = {{"levels", design.levels},         {"level_probs", design.level_probs},
                     {"x1_means", design.x1_means},     {"x1_sd", design.x1_sd},
                     {"beta", design.beta},             {"baseline_hazard", design.baseline_hazard},
                     {"censoring", design.censoring}};
    j["amputation"] = {{"target", amputation.target},
                       {"predictors", amputation.predictors},
                       {"weights", amputation.weights},
                       {"rate", amputation.rate},
                       {"sampling", amputation.sampling == AmputationSampling::systematic ? "systematic" : "bernoulli"}};
    j["trees"] = {{"n_trees", trees.n_trees},
                  {"min_leaf", trees.min_leaf},
                  {"max_depth", trees.max_depth},
                  {"features_per_split", trees.features_per_split},
                  {"bootstrap", trees.bootstrap}};
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& e : methods) {
      nlohmann::json me = {{"method", std::string(to_string(e.kind))}};
      if (!e.kappas.empty()) me["kappa"] = e.kappas;
      ms.push_back(me);
    }
    j["methods"] = ms;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Replicates and aggregation

struct MethodOutcome {
  std::string method;
  std::optional<double> kappa;
  bool ok = false;
  std::string error;
  std::vector<std::string> names;
  std::vector<double> estimate, se, lower, upper;
};

struct ReplicateOutcome {
  int index = 0;
  std::uint64_t seed = 0;
  std::size_t n_missing = 0;
  std::vector<MethodOutcome> methods;
};

struct MetricsRow {
  std::string method;
  std::optional<double> kappa;
  std::string coefficient;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double absolute_bias = 0.0;
  /// Unset when the truth is 0.
  std::optional<double> relative_bias;
  double mean_ci_width = 0.0;
  double coverage = 0.0;  // percent
  int n_ok = 0;
  int n_covered = 0;
  int n_failed = 0;
};

struct SimulationResult {
  std::vector<std::string> coefficients;
  std::vector<double> truth;
  std::vector<MetricsRow> rows;
  std::vector<ReplicateOutcome> replicates;
};

inline std::uint64_t replicate_seed(std::uint64_t master, int index) {
  return derive_seed(master, static_cast<std::uint64_t>(index));
}

/// Generates (or subsamples), amputes, and runs every configured method on
/// one replicate. Method failures are recorded, not thrown.
inline ReplicateOutcome run_replicate(const SimConfig& cfg, const std::vector<MethodSpec>& specs, int index) {
  ReplicateOutcome out;
  out.index = index;
  out.seed = replicate_seed(cfg.seed, index);
  Rng data_rng(derive_seed(out.seed, "data"));
  Dataset data = cfg.source == DataSource::synthetic ? generate_synthetic(cfg.design, cfg.n, data_rng)
                                                     : subsample(*cfg.reference, cfg.n, data_rng);
  AmputationPlan plan = cfg.amputation;
  plan.seed = derive_seed(out.seed, "ampute");
  const AmputationResult amp = ampute_mar(data, plan);
  out.n_missing = static_cast<std::size_t>(std::count(amp.observed.begin(), amp.observed.end(), std::uint8_t{0}));

  ImputationCache cache;
  const std::uint64_t method_seed = derive_seed(out.seed, "methods");
  for (const auto& spec : specs) {
    MethodOutcome mo;
    mo.method = std::string(to_string(spec.kind));
    mo.kappa = spec.kappa;
    try {
      const MethodResult r = run_method(amp.data, spec, method_seed, &cache);
      mo.ok = true;
      mo.names = r.names;
      mo.estimate.assign(r.estimate.data(), r.estimate.data() + r.estimate.size());
      mo.se.assign(r.se.data(), r.se.data() + r.se.size());
      mo.lower.assign(r.lower.data(), r.lower.data() + r.lower.size());
      mo.upper.assign(r.upper.data(), r.upper.data() + r.upper.size());
    } catch (const Error& e) {
      mo.ok = false;
      mo.error = e.what();
    }
    out.methods.push_back(std::move(mo));
  }
  return out;
}

/// Coefficient names and true values: the design's beta (synthetic) or the
/// fit on the full reference data.
inline std::pair<std::vector<std::string>, std::vector<double>> simulation_truth(const SimConfig& cfg) {
  if (cfg.source == DataSource::synthetic) return {cfg.design.coefficient_names(), cfg.design.beta};
  const Dataset& ref = *cfg.reference;
  const DesignMatrix dm = encode(ref, ref.covariate_names());
  CoxOptions opt;
  opt.ties = cfg.ties;
  const CoxFit fit = fit_cox(dm, ref, {}, opt);
  return {dm.names, std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size())};
}

/// Per-(method, kappa, coefficient) bias, CI width and coverage over the
/// successful replicates, in configuration order.
inline std::vector<MetricsRow> aggregate(const std::vector<MethodSpec>& specs, const std::vector<ReplicateOutcome>& reps,
                                         const std::vector<std::string>& names, const std::vector<double>& truth) {
  std::vector<MetricsRow> rows;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      MetricsRow row;
      row.method = std::string(to_string(specs[s].kind));
      row.kappa = specs[s].kappa;
      row.coefficient = names[j];
      row.truth = truth[j];
      double sum_est = 0.0, sum_width = 0.0;
      for (const auto& rep : reps) {
        const MethodOutcome& mo = rep.methods[s];
        if (!mo.ok) {
          ++row.n_failed;
          continue;
        }
        auto it = std::find(mo.names.begin(), mo.names.end(), names[j]);
        if (it == mo.names.end()) throw InputError("simulate: coefficient '" + names[j] + "' missing from method output");
        const auto k = static_cast<std::size_t>(it - mo.names.begin());
        ++row.n_ok;
        sum_est += mo.estimate[k];
        sum_width += mo.upper[k] - mo.lower[k];
        if (mo.lower[k] <= truth[j] && truth[j] <= mo.upper[k]) ++row.n_covered;
      }
      if (row.n_ok > 0) {
        row.mean_estimate = sum_est / row.n_ok;
        row.absolute_bias = row.mean_estimate - row.truth;
        if (row.truth != 0.0) row.relative_bias = 100.0 * row.absolute_bias / row.truth;
        row.mean_ci_width = sum_width / row.n_ok;
        row.coverage = 100.0 * row.n_covered / row.n_ok;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

/// Runs all replicates on `workers` threads. Each replicate depends only on
/// its index, so results are identical for any worker count.
inline SimulationResult run_simulation(const SimConfig& cfg, int workers = 1) {
  cfg.validate();
  detail::require(workers >= 1, "simulate: workers must be >= 1");
  const auto specs = cfg.specs();
  SimulationResult res;
  std::tie(res.coefficients, res.truth) = simulation_truth(cfg);

  const int total = cfg.replicates;
  res.replicates.resize(static_cast<std::size_t>(total));
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= total) return;
      try {
        res.replicates[static_cast<std::size_t>(r)] = run_replicate(cfg, specs, r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(total);
        return;
      }
    }
  };
  const int n_threads = std::min(workers, total);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (std::size_t s = 0; s < specs.size(); ++s) {
    int failed = 0;
    for (const auto& rep : res.replicates) failed += rep.methods[s].ok ? 0 : 1;
    if (failed > cfg.max_failure_fraction * total) {
      std::string label(to_string(specs[s].kind));
      if (specs[s].kappa) label += " (kappa " + std::to_string(*specs[s].kappa) + ")";
      throw NumericalError("simulate: " + label + " failed in " + std::to_string(failed) + " of " +
                           std::to_string(total) + " replicates");
    }
  }
  res.rows = aggregate(specs, res.replicates, res.coefficients, res.truth);
  return res;
}

// ---------------------------------------------------------------------------
// Output

/// Fixed 6-decimal formatting; negative zero prints as zero.
inline std::string fixed6(double v) {
  if (v == 0.0) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string kappa_cell(const std::optional<double>& k) { return k ? fixed6(*k) : std::string(); }

inline void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "method,kappa,coefficient,truth,mean_estimate,absolute_bias,relative_bias_pct,mean_ci_width,coverage_pct,"
         "n_ok,n_covered,n_failed\n";
  for (const auto& r : rows) {
    out << r.method << ',' << kappa_cell(r.kappa) << ',' << r.coefficient << ',' << fixed6(r.truth) << ','
        << fixed6(r.mean_estimate) << ',' << fixed6(r.absolute_bias) << ','
        << (r.relative_bias ? fixed6(*r.relative_bias) : std::string()) << ',' << fixed6(r.mean_ci_width) << ','
        << fixed6(r.coverage) << ',' << r.n_ok << ',' << r.n_covered << ',' << r.n_failed << '\n';
  }
}

enum class TableMetric { relative_bias, ci_width, coverage };

/// Wide layout: one row per (method, kappa), one column per coefficient.
inline void write_table_csv(std::ostream& out, const std::vector<MetricsRow>& rows,
                            const std::vector<std::string>& coefficients, TableMetric metric) {
  out << "Method";
  for (const auto& c : coefficients) out << ',' << c;
  out << ",kappa\n";
  for (std::size_t start = 0; start < rows.size(); start += coefficients.size()) {
    out << rows[start].method;
    for (std::size_t j = 0; j < coefficients.size(); ++j) {
      const MetricsRow& r = rows[start + j];
      out << ',';
      switch (metric) {
        case TableMetric::relative_bias:
          if (r.relative_bias) out << fixed6(*r.relative_bias);
          break;
        case TableMetric::ci_width: out << fixed6(r.mean_ci_width); break;
        case TableMetric::coverage: out << fixed6(r.coverage); break;
      }
    }
    out << ',' << kappa_cell(rows[start].kappa) << '\n';
  }
}

/// One JSON object per (replicate, method) line.
inline void write_trace_jsonl(std::ostream& out, const std::vector<ReplicateOutcome>& reps) {
  for (const auto& rep : reps) {
    for (const auto& mo : rep.methods) {
      nlohmann::json j;
      j["replicate"] = rep.index;
      j["seed"] = rep.seed;
      j["n_missing"] = rep.n_missing;
      j["method"] = mo.method;
      j["kappa"] = mo.kappa ? nlohmann::json(*mo.kappa) : nlohmann::json(nullptr);
      j["status"] = mo.ok ? "ok" : "failed";
      if (mo.ok) {
        j["coefficients"] = mo.names;
        j["estimate"] = mo.estimate;
        j["se"] = mo.se;
        j["lower"] = mo.lower;
        j["upper"] = mo.upper;
      } else {
        j["error"] = mo.error;
      }
      out << j.dump() << '\n';
    }
  }
}

}  // namespace hybridcox
