#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hybridcox/dataset.hpp"
#include "hybridcox/error.hpp"
#include "hybridcox/glm.hpp"
#include "hybridcox/predictors.hpp"
#include "hybridcox/rng.hpp"
#include "hybridcox/stats.hpp"
#include "hybridcox/trees.hpp"

namespace hybridcox {

enum class Engine { parametric, nonparametric };

inline std::string_view to_string(Engine e) { return e == Engine::parametric ? "parametric" : "nonparametric"; }

inline Engine parse_engine(std::string_view s) {
  if (s == "parametric") return Engine::parametric;
  if (s == "nonparametric" || s == "trees") return Engine::nonparametric;
  throw InputError("unknown imputation engine: " + std::string(s));
}

struct Provenance {
  Engine engine = Engine::parametric;
  int index = 0;  // position m within the imputation stream
  std::uint64_t seed = 0;
};

struct ImputationSet {
  std::string target;  // empty when nothing was missing
  std::vector<Dataset> datasets;
  std::vector<Provenance> provenance;
  std::vector<std::string> predictor_names;
  /// The parametric model was refitted with pseudo-observations after
  /// separation on the observed rows.
  bool augmented = false;

  [[nodiscard]] std::size_t size() const { return datasets.size(); }

  void append(ImputationSet other) {
    if (target.empty()) target = other.target;
    if (predictor_names.empty()) predictor_names = other.predictor_names;
    augmented = augmented || other.augmented;
    for (auto& d : other.datasets) datasets.push_back(std::move(d));
    for (auto& p : other.provenance) provenance.push_back(p);
  }
};

namespace detail {

/// The single partially observed column, which must be categorical.
/// Returns nullopt when nothing is missing.
inline std::optional<std::string> imputation_target(const Dataset& d) {
  const auto partial = d.partially_observed();
  if (partial.empty()) return std::nullopt;
  if (partial.size() > 1) throw InputError("imputation: more than one partially observed column");
  const Column& c = d.column(partial.front());
  if (c.kind != ColumnKind::categorical)
    throw InputError("imputation: target '" + c.name + "' must be categorical");
  return partial.front();
}

/// Observed level codes remapped to 0..K'-1 over the levels actually seen.
struct ObservedLevels {
  std::vector<int> to_original;  // compact code -> original level index
  std::vector<int> compact;      // per observed row
  std::vector<std::size_t> observed_rows;
  std::vector<std::size_t> missing_rows;
};

inline ObservedLevels observed_levels(const Column& c) {
  ObservedLevels ol;
  std::vector<int> map(c.levels.size(), -1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c.is_missing(i)) {
      ol.missing_rows.push_back(i);
      continue;
    }
    ol.observed_rows.push_back(i);
    map[static_cast<std::size_t>(c.code(i))] = 0;
  }
  for (std::size_t k = 0; k < map.size(); ++k)
    if (map[k] == 0) {
      map[k] = static_cast<int>(ol.to_original.size());
      ol.to_original.push_back(static_cast<int>(k));
    }
  for (auto i : ol.observed_rows) ol.compact.push_back(map[static_cast<std::size_t>(c.code(i))]);
  return ol;
}

inline Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
  return out;
}

inline Dataset fill(const Dataset& d, const std::string& target, const std::vector<std::size_t>& rows,
                    const std::vector<int>& codes) {
  Column c = d.column(target);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    c.values[rows[k]] = static_cast<double>(codes[k]);
    c.missing[rows[k]] = 0;
  }
  return d.with_column(std::move(c));
}

inline ImputationSet copies(const Dataset& d, int m, Engine engine, std::uint64_t seed, int first_index) {
  ImputationSet set;
  for (int k = 0; k < m; ++k) {
    set.datasets.push_back(d);
    set.provenance.push_back({engine, first_index + k, derive_seed(seed, static_cast<std::uint64_t>(first_index + k))});
  }
  return set;
}

/// Pseudo-observations for perfect prediction (White, Daniel and Royston,
/// 2010): for each predictor and level, two rows at mean +/- sd/2 of that
/// predictor (clipped to its range), others at their means, total weight p + 1.
struct Augmented {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::vector<double> w;
};

inline Augmented augment(const Eigen::MatrixXd& x, const std::vector<int>& y, int n_levels) {
  const Eigen::Index n = x.rows(), p = x.cols();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd lo = x.colwise().minCoeff(), hi = x.colwise().maxCoeff();
  Eigen::RowVectorXd sd(p);
  for (Eigen::Index j = 0; j < p; ++j)
    sd(j) = n > 1 ? std::sqrt((x.col(j).array() - mean(j)).square().sum() / static_cast<double>(n - 1)) : 0.0;
  const Eigen::Index extra = 2 * p * n_levels;
  Augmented a;
  a.x.resize(n + extra, p);
  a.x.topRows(n) = x;
  a.y = y;
  a.w.assign(static_cast<std::size_t>(n), 1.0);
  const double wa = static_cast<double>(p + 1) / static_cast<double>(extra);
  Eigen::Index r = n;
  for (Eigen::Index j = 0; j < p; ++j)
    for (int k = 0; k < n_levels; ++k)
      for (double s : {0.5, -0.5}) {
        a.x.row(r) = mean;
        a.x(r, j) = std::clamp(mean(j) + s * sd(j), lo(j), hi(j));
        a.y.push_back(k);
        a.w.push_back(wa);
        ++r;
      }
  return a;
}

inline int sample_index(const Eigen::Ref<const Eigen::RowVectorXd>& probs, Rng& rng) {
  double u = uniform01(rng) * probs.sum();
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    u -= probs(k);
    if (u < 0.0) return static_cast<int>(k);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace detail

/// Parametric engine: multinomial logistic model of the target on the
/// imputation predictors; each imputation draws coefficients from their
/// asymptotic posterior and then one level per missing row. Imputation m
/// uses seed derive_seed(seed, first_index + m).
inline ImputationSet impute_parametric(const Dataset& d, int m, std::uint64_t seed, int first_index = 0) {
  detail::require(m >= 1, "impute: M must be >= 1");
  const auto target = detail::imputation_target(d);
  if (!target) return detail::copies(d, m, Engine::parametric, seed, first_index);
  const Column& col = d.column(*target);
  const auto ol = detail::observed_levels(col);
  if (ol.observed_rows.empty()) throw InputError("impute: target '" + *target + "' is never observed");
  const DesignMatrix pred = build_predictors(d, {*target});

  ImputationSet set;
  set.target = *target;
  set.predictor_names = pred.names;
  const int k_obs = static_cast<int>(ol.to_original.size());
  std::optional<GlmFit> fit;
  if (k_obs > 1) {
    const Eigen::MatrixXd xobs = detail::rows_of(pred.x, ol.observed_rows);
    try {
      try {
        fit = fit_multinomial(xobs, ol.compact, k_obs, 0);
      } catch (const SeparationError&) {
        const auto a = detail::augment(xobs, ol.compact, k_obs);
        fit = fit_multinomial(a.x, a.y, k_obs, 0, a.w);
        set.augmented = true;
      }
    } catch (const NumericalError& e) {
      throw NumericalError(std::string("impute (parametric): ") + e.what());
    }
  }
  const Eigen::MatrixXd xmiss = detail::rows_of(pred.x, ol.missing_rows);
  for (int k = 0; k < m; ++k) {
    const int idx = first_index + k;
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(idx));
    Rng rng(s);
    std::vector<int> codes(ol.missing_rows.size(), ol.to_original.front());
    if (fit) {
      const Eigen::MatrixXd coef = draw_coefficients(*fit, rng);
      const Eigen::MatrixXd probs = predict_probabilities(*fit, coef, xmiss);
      for (std::size_t r = 0; r < codes.size(); ++r)
        codes[r] = ol.to_original[static_cast<std::size_t>(detail::sample_index(probs.row(static_cast<Eigen::Index>(r)), rng))];
    }
    set.datasets.push_back(detail::fill(d, *target, ol.missing_rows, codes));
    set.provenance.push_back({Engine::parametric, idx, s});
  }
  return set;
}

/// Nonparametric engine: a fresh bagged tree ensemble per imputation, each
/// missing row imputed by a draw from a random tree's leaf.
inline ImputationSet impute_nonparametric(const Dataset& d, int m, std::uint64_t seed, const TreeParams& params = {},
                                          int first_index = 0) {
  detail::require(m >= 1, "impute: M must be >= 1");
  const auto target = detail::imputation_target(d);
  if (!target) return detail::copies(d, m, Engine::nonparametric, seed, first_index);
  const Column& col = d.column(*target);
  const auto ol = detail::observed_levels(col);
  if (ol.observed_rows.empty()) throw InputError("impute: target '" + *target + "' is never observed");
  const DesignMatrix pred = build_predictors(d, {*target});
  const Eigen::MatrixXd xobs = detail::rows_of(pred.x, ol.observed_rows);
  const int k_obs = static_cast<int>(ol.to_original.size());

  ImputationSet set;
  set.target = *target;
  set.predictor_names = pred.names;
  for (int k = 0; k < m; ++k) {
    const int idx = first_index + k;
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(idx));
    Rng rng(s);
    const TreeEnsemble ens = fit_trees(xobs, ol.compact, k_obs, params, rng);
    std::vector<int> codes(ol.missing_rows.size());
    for (std::size_t r = 0; r < codes.size(); ++r)
      codes[r] = ol.to_original[static_cast<std::size_t>(
          draw_class(ens, pred.x.row(static_cast<Eigen::Index>(ol.missing_rows[r])), rng))];
    set.datasets.push_back(detail::fill(d, *target, ol.missing_rows, codes));
    set.provenance.push_back({Engine::nonparametric, idx, s});
  }
  return set;
}

// ---------------------------------------------------------------------------
// Rubin's rules

template <class Scalar>
struct RubinCombination {
  Scalar qbar{};
  Scalar wbar{};
  Scalar b{};
  Scalar t{};
};

/// Pooled estimate, mean within-variance, between-variance (divisor M-1)
/// and total variance W + (1 + 1/M) B for one coefficient.
template <class Scalar>
RubinCombination<Scalar> rubin_combine(const std::vector<Scalar>& estimates, const std::vector<Scalar>& variances) {
  const std::size_t m = estimates.size();
  detail::require(m >= 2, "rubin: need M >= 2");
  detail::require(variances.size() == m, "rubin: estimates and variances differ in length");
  const Scalar mm(static_cast<long long>(m));
  RubinCombination<Scalar> r;
  Scalar sq(0), sw(0);
  for (std::size_t k = 0; k < m; ++k) {
    detail::require(!(variances[k] < Scalar(0)), "rubin: negative variance");
    sq = sq + estimates[k];
    sw = sw + variances[k];
  }
  // Identical estimates pool to that value without summation rounding.
  const bool constant = std::all_of(estimates.begin(), estimates.end(), [&](const Scalar& e) { return e == estimates.front(); });
  r.qbar = constant ? estimates.front() : sq / mm;
  const bool constant_var = std::all_of(variances.begin(), variances.end(), [&](const Scalar& v) { return v == variances.front(); });
  r.wbar = constant_var ? variances.front() : sw / mm;
  Scalar ss(0);
  for (std::size_t k = 0; k < m; ++k) ss = ss + (estimates[k] - r.qbar) * (estimates[k] - r.qbar);
  r.b = ss / (mm - Scalar(1));
  r.t = r.wbar + (Scalar(1) + Scalar(1) / mm) * r.b;
  return r;
}

struct PooledResult {
  Eigen::VectorXd qbar, wbar, b, t, df, lower, upper;
  int m = 0;

  [[nodiscard]] Eigen::VectorXd se() const { return t.cwiseSqrt(); }
};

/// Rubin's rules for p coefficients over M imputations (rows). The 1987
/// degrees of freedom; B = 0 gives infinite df and a normal quantile.
inline PooledResult rubin_pool(const Eigen::MatrixXd& estimates, const Eigen::MatrixXd& variances, double level = 0.95) {
  detail::require(estimates.rows() >= 2, "rubin_pool: need M >= 2");
  detail::require(estimates.rows() == variances.rows() && estimates.cols() == variances.cols(),
                  "rubin_pool: estimates and variances differ in shape");
  detail::require(level > 0.0 && level < 1.0, "rubin_pool: level must lie in (0, 1)");
  const Eigen::Index m = estimates.rows(), p = estimates.cols();
  PooledResult r;
  r.m = static_cast<int>(m);
  for (auto* v : {&r.qbar, &r.wbar, &r.b, &r.t, &r.df, &r.lower, &r.upper}) v->resize(p);
  const double md = static_cast<double>(m);
  for (Eigen::Index j = 0; j < p; ++j) {
    std::vector<double> q(static_cast<std::size_t>(m)), u(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
      q[static_cast<std::size_t>(k)] = estimates(k, j);
      u[static_cast<std::size_t>(k)] = variances(k, j);
    }
    const auto c = rubin_combine(q, u);
    r.qbar(j) = c.qbar;
    r.wbar(j) = c.wbar;
    r.b(j) = c.b;
    r.t(j) = c.t;
    if (c.b > 0.0) {
      const double ratio = c.wbar / ((1.0 + 1.0 / md) * c.b);
      r.df(j) = (md - 1.0) * (1.0 + ratio) * (1.0 + ratio);
    } else {
      r.df(j) = std::numeric_limits<double>::infinity();
    }
    const double half = stats::t_quantile(0.5 + level / 2.0, r.df(j)) * std::sqrt(c.t);
    r.lower(j) = c.qbar - half;
    r.upper(j) = c.qbar + half;
  }
  return r;
}

}  // namespace hybridcox
