#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "hybridcox/cox.hpp"
#include "hybridcox/dataset.hpp"
#include "hybridcox/error.hpp"
#include "hybridcox/imputation.hpp"
#include "hybridcox/missingness.hpp"
#include "hybridcox/rng.hpp"
#include "hybridcox/stats.hpp"
#include "hybridcox/trees.hpp"

namespace hybridcox {

enum class MethodKind { cc, ipw, mi_p, mi_np, h1, h2, h3, h4 };

inline constexpr MethodKind kAllMethods[] = {MethodKind::cc,   MethodKind::ipw, MethodKind::mi_p, MethodKind::mi_np,
                                             MethodKind::h1,   MethodKind::h2,  MethodKind::h3,   MethodKind::h4};

inline std::string_view to_string(MethodKind k) {
  switch (k) {
    case MethodKind::cc: return "CC";
    case MethodKind::ipw: return "IPW";
    case MethodKind::mi_p: return "MI_P";
    case MethodKind::mi_np: return "MI_NP";
    case MethodKind::h1: return "H1";
    case MethodKind::h2: return "H2";
    case MethodKind::h3: return "H3";
    case MethodKind::h4: return "H4";
  }
  return "?";
}

inline MethodKind parse_method(std::string_view s) {
  std::string u(s);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  std::replace(u.begin(), u.end(), '-', '_');
  for (auto k : kAllMethods)
    if (to_string(k) == u) return k;
  throw InputError("unknown method: " + std::string(s));
}

inline bool is_hybrid_weighted(MethodKind k) { return k == MethodKind::h2 || k == MethodKind::h3 || k == MethodKind::h4; }
inline bool uses_imputation(MethodKind k) { return k != MethodKind::cc && k != MethodKind::ipw; }

struct MethodSpec {
  MethodKind kind = MethodKind::cc;
  int m = 10;
  /// Parametric share for H1; H4 always uses ceil(M/2).
  std::optional<int> m1;
  std::optional<double> kappa;
  /// Analysis covariates; empty means every covariate in column order.
  std::vector<std::string> covariates;
  /// Propensity predictors; empty means fully observed covariates + event + cumhaz.
  std::vector<std::string> propensity_predictors;
  Ties ties = Ties::efron;
  /// Robust (sandwich) variance; unset means robust iff some weight differs from 1.
  std::optional<bool> robust;
  PropensityBounds bounds;
  TreeParams trees;
  double level = 0.95;

  void validate() const {
    const auto name = std::string(to_string(kind));
    if (kappa && !is_hybrid_weighted(kind)) throw InputError("kappa not applicable to " + name);
    if (!kappa && is_hybrid_weighted(kind)) throw InputError("kappa required for " + name);
    if (kappa) detail::require(*kappa >= 0.0 && *kappa <= 1.0, "kappa must lie in [0, 1]");
    if (uses_imputation(kind)) detail::require(m >= 2, "M must be >= 2 for " + name);
    if (m1) {
      detail::require(kind == MethodKind::h1 || kind == MethodKind::h4, "M1 applies only to H1 and H4");
      detail::require(*m1 >= 0 && *m1 <= m, "M1 must lie in [0, M]");
      if (kind == MethodKind::h4)
        detail::require(*m1 == (m + 1) / 2, "H4 splits M into ceil(M/2) parametric and floor(M/2) nonparametric");
    }
    detail::require(level > 0.0 && level < 1.0, "confidence level must lie in (0, 1)");
    bounds.validate();
  }

  /// Number of parametric imputations; the rest are nonparametric.
  [[nodiscard]] int parametric_count() const {
    switch (kind) {
      case MethodKind::mi_p:
      case MethodKind::h2: return m;
      case MethodKind::mi_np:
      case MethodKind::h3: return 0;
      case MethodKind::h1: return m1.value_or((m + 1) / 2);
      case MethodKind::h4: return (m + 1) / 2;
      default: return 0;
    }
  }
};

struct MethodResult {
  MethodKind kind = MethodKind::cc;
  std::optional<double> kappa;
  int m = 0;
  std::string target;
  std::vector<std::string> names;
  Eigen::VectorXd estimate, se, lower, upper;
  /// Infinite for CC/IPW and when the between-imputation variance is 0.
  Eigen::VectorXd df;
  bool robust_variance = false;
  std::size_t n_used = 0;
  std::vector<Provenance> provenance;
  /// One row per imputation.
  Eigen::MatrixXd trace_estimates, trace_variances;
  std::optional<PooledResult> pooled;
  std::optional<WeightVector> weights;

  [[nodiscard]] std::string label() const { return std::string(to_string(kind)); }
};

/// Imputation sets keyed by engine and size. Bound to one dataset and seed:
/// methods sharing a cache reuse the same draws.
class ImputationCache {
 public:
  const ImputationSet& get(const Dataset& d, Engine engine, int m, std::uint64_t seed, const TreeParams& trees) {
    const auto key = std::make_tuple(engine, m, seed);
    auto it = sets_.find(key);
    if (it != sets_.end()) return it->second;
    // A larger cached stream already holds the first m draws.
    for (auto& [k, set] : sets_)
      if (std::get<0>(k) == engine && std::get<2>(k) == seed && std::get<1>(k) >= m) {
        ImputationSet sub;
        sub.target = set.target;
        sub.predictor_names = set.predictor_names;
        sub.datasets.assign(set.datasets.begin(), set.datasets.begin() + m);
        sub.provenance.assign(set.provenance.begin(), set.provenance.begin() + m);
        return sets_.emplace(key, std::move(sub)).first->second;
      }
    ImputationSet set = engine == Engine::parametric ? impute_parametric(d, m, seed) : impute_nonparametric(d, m, seed, trees);
    return sets_.emplace(key, std::move(set)).first->second;
  }

  void clear() { sets_.clear(); }

 private:
  std::map<std::tuple<Engine, int, std::uint64_t>, ImputationSet> sets_;
};

namespace detail {

[[noreturn]] inline void rethrow_with_context(const std::string& prefix) {
  try {
    throw;
  } catch (const SeparationError& e) {
    throw SeparationError(prefix + e.what());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(prefix + e.what());
  } catch (const RankDeficiencyError& e) {
    throw RankDeficiencyError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const InputError& e) {
    throw InputError(prefix + e.what());
  } catch (...) {
    throw;
  }
}

inline std::uint64_t engine_seed(std::uint64_t seed, Engine e) {
  return derive_seed(seed, e == Engine::parametric ? std::string_view("imputation/parametric")
                                                   : std::string_view("imputation/nonparametric"));
}

inline void normal_interval(MethodResult& r, double level) {
  const double z = stats::normal_quantile(0.5 + level / 2.0);
  r.lower = r.estimate - z * r.se;
  r.upper = r.estimate + z * r.se;
  r.df = Eigen::VectorXd::Constant(r.estimate.size(), std::numeric_limits<double>::infinity());
}

inline CoxFit fit_design(const Dataset& d, const std::vector<std::string>& covariates, std::span<const double> w,
                         const MethodSpec& spec, bool robust, std::vector<std::string>& names) {
  const DesignMatrix dm = encode(d, covariates);
  CoxOptions opt;
  opt.ties = spec.ties;
  opt.robust = robust;
  CoxFit fit = fit_cox(dm, d, w, opt);
  names = dm.names;
  return fit;
}

}  // namespace detail

/// Runs one analysis strategy on a dataset whose single partially observed
/// covariate is categorical. Imputation m of engine e draws from
/// derive_seed(derive_seed(seed, e), m), so methods sharing a seed share
/// imputations; pass a cache to avoid recomputing them.
inline MethodResult run_method(const Dataset& d, const MethodSpec& spec, std::uint64_t seed,
                               ImputationCache* cache = nullptr) {
  spec.validate();
  const std::vector<std::string> covariates = spec.covariates.empty() ? d.covariate_names() : spec.covariates;
  detail::require(!covariates.empty(), "run_method: no analysis covariates");
  const auto target = detail::imputation_target(d);

  MethodResult res;
  res.kind = spec.kind;
  res.kappa = spec.kappa;
  res.target = target.value_or("");

  // Propensity model, shared by every fit of the method.
  std::optional<WeightVector> propensity;
  if (target && (spec.kind == MethodKind::ipw || is_hybrid_weighted(spec.kind))) {
    try {
      propensity = estimate_propensity(d, *target, spec.propensity_predictors, spec.bounds);
    } catch (...) {
      detail::rethrow_with_context("propensity model: ");
    }
  }

  if (!uses_imputation(spec.kind)) {
    const bool weighted = spec.kind == MethodKind::ipw && propensity.has_value();
    const bool robust = spec.robust.value_or(weighted);
    const Dataset used = target ? d.subset(d.observed_rows(*target)) : d;
    std::vector<double> w;
    if (weighted) {
      for (std::size_t i = 0; i < d.n_rows(); ++i)
        if (propensity->observed[i]) w.push_back(propensity->w[i]);
      res.weights = propensity;
    }
    CoxFit fit;
    try {
      fit = detail::fit_design(used, covariates, w, spec, robust, res.names);
    } catch (...) {
      detail::rethrow_with_context(std::string(to_string(spec.kind)) + " fit: ");
    }
    res.n_used = used.n_rows();
    res.robust_variance = robust;
    res.estimate = fit.beta;
    res.se = robust ? fit.robust_se() : fit.model_se();
    res.m = 0;
    detail::normal_interval(res, spec.level);
    return res;
  }

  ImputationCache local;
  ImputationCache& c = cache ? *cache : local;
  const int mp = spec.parametric_count();
  const int mn = spec.m - mp;
  ImputationSet imps;
  try {
    if (mp > 0) imps.append(c.get(d, Engine::parametric, mp, detail::engine_seed(seed, Engine::parametric), spec.trees));
    if (mn > 0)
      imps.append(c.get(d, Engine::nonparametric, mn, detail::engine_seed(seed, Engine::nonparametric), spec.trees));
  } catch (...) {
    detail::rethrow_with_context("imputation: ");
  }

  std::vector<double> w;
  if (is_hybrid_weighted(spec.kind) && propensity) {
    res.weights = hybrid_weights(propensity->pi, propensity->observed, *spec.kappa, spec.bounds);
    w = res.weights->w;
  }
  const bool any_weight = std::any_of(w.begin(), w.end(), [](double v) { return v != 1.0; });
  const bool robust = spec.robust.value_or(any_weight);

  const auto m = static_cast<Eigen::Index>(imps.size());
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& prov = imps.provenance[static_cast<std::size_t>(k)];
    CoxFit fit;
    try {
      fit = detail::fit_design(imps.datasets[static_cast<std::size_t>(k)], covariates, w, spec, robust, res.names);
    } catch (...) {
      detail::rethrow_with_context("imputation m=" + std::to_string(k + 1) + " (" + std::string(to_string(prov.engine)) +
                                   "): ");
    }
    if (k == 0) {
      res.trace_estimates.resize(m, fit.beta.size());
      res.trace_variances.resize(m, fit.beta.size());
    }
    res.trace_estimates.row(k) = fit.beta.transpose();
    res.trace_variances.row(k) = (robust ? *fit.robust_covariance : fit.model_covariance).diagonal().transpose();
  }
  res.provenance = imps.provenance;
  res.pooled = rubin_pool(res.trace_estimates, res.trace_variances, spec.level);
  res.m = spec.m;
  res.n_used = d.n_rows();
  res.robust_variance = robust;
  res.estimate = res.pooled->qbar;
  res.se = res.pooled->se();
  res.lower = res.pooled->lower;
  res.upper = res.pooled->upper;
  res.df = res.pooled->df;
  return res;
}

struct HazardRatio {
  std::string name;
  double hr = 1.0;
  double lower = 1.0;
  double upper = 1.0;
};

inline std::vector<HazardRatio> hazard_ratios(const MethodResult& r) {
  std::vector<HazardRatio> out;
  for (Eigen::Index j = 0; j < r.estimate.size(); ++j)
    out.push_back({r.names.at(static_cast<std::size_t>(j)), std::exp(r.estimate(j)), std::exp(r.lower(j)),
                   std::exp(r.upper(j))});
  return out;
}

}  // namespace hybridcox
