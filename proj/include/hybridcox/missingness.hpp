#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridcox/dataset.hpp"
#include "hybridcox/error.hpp"
#include "hybridcox/glm.hpp"
#include "hybridcox/predictors.hpp"
#include "hybridcox/rng.hpp"
#include "hybridcox/stats.hpp"

namespace hybridcox {

/// How the missing cells are chosen once the per-subject probabilities are
/// known. `systematic` draws a fixed-size unequal-probability sample whose
/// inclusion probabilities equal the logistic probabilities; `bernoulli`
/// draws every subject independently.
enum class AmputationSampling { systematic, bernoulli };

struct AmputationPlan {
  std::string target;
  /// Fully observed columns; the event column and "cumhaz" are allowed.
  std::vector<std::string> predictors;
  double rate = 0.3;
  /// Weight per predictor on the standardized scale; empty means all 1.
  /// A categorical predictor's weight applies to each of its dummies.
  std::vector<double> weights;
  std::uint64_t seed = 0;
  AmputationSampling sampling = AmputationSampling::systematic;

  void validate(const Dataset& d) const {
    detail::require(rate >= 0.0 && rate <= 1.0, "ampute: rate must lie in [0, 1]");
    detail::require(d.find(target).has_value(), "ampute: unknown target column '" + target + "'");
    detail::require(weights.empty() || weights.size() == predictors.size(),
                    "ampute: one weight per predictor expected");
    for (const auto& p : predictors) {
      detail::require(p != target, "ampute: predictors must exclude the target");
      if (d.find(p)) detail::require(!d.column(p).any_missing(), "ampute: predictor '" + p + "' has missing cells");
    }
  }
};

struct AmputationResult {
  Dataset data;
  /// R: 1 where the target stays observed.
  std::vector<std::uint8_t> observed;
  /// Missingness probability per subject.
  std::vector<double> probability;
  double intercept = 0.0;
};

namespace detail {

/// Standardized score sum_j a_j z_ij over the plan's predictors.
inline Eigen::VectorXd mar_score(const Dataset& d, const AmputationPlan& plan) {
  const auto n = static_cast<Eigen::Index>(d.n_rows());
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < plan.predictors.size(); ++k) {
    const double a = plan.weights.empty() ? 1.0 : plan.weights[k];
    const DesignMatrix dm = select_predictors(d, {plan.predictors[k]});
    for (Eigen::Index j = 0; j < dm.cols(); ++j) {
      const Eigen::VectorXd col = dm.x.col(j);
      const double mean = col.mean();
      const double sd = n > 1 ? std::sqrt((col.array() - mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
      if (sd > 0.0) s += a * (col.array() - mean).matrix() / sd;
    }
  }
  return s;
}

/// Intercept b with mean_i logistic(b + s_i) = rate.
inline double solve_intercept(const Eigen::VectorXd& s, double rate) {
  auto mean_p = [&](double b) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) m += stats::logistic(b + s(i));
    return m / static_cast<double>(s.size());
  };
  double lo = -1.0, hi = 1.0;
  while (mean_p(lo) > rate) lo *= 2.0;
  while (mean_p(hi) < rate) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_p(mid) < rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// MAR amputation of a categorical or continuous target: P(missing_i) =
/// logistic(b + score_i) with b solved by bisection so the mean probability
/// equals the rate.
inline AmputationResult ampute_mar(const Dataset& d, const AmputationPlan& plan) {
  plan.validate(d);
  const Column& target = d.column(plan.target);
  detail::require(target.kind == ColumnKind::categorical || target.kind == ColumnKind::continuous,
                  "ampute: target must be a covariate");
  if (target.any_missing()) throw InputError("ampute: target '" + plan.target + "' already has missing cells");
  const std::size_t n = d.n_rows();
  AmputationResult res;
  res.probability.assign(n, plan.rate);
  std::vector<std::uint8_t> miss(n, 0);
  Rng rng(plan.seed);

  if (plan.rate >= 1.0) {
    std::fill(miss.begin(), miss.end(), 1);
  } else if (plan.rate > 0.0) {
    const Eigen::VectorXd s = detail::mar_score(d, plan);
    res.intercept = detail::solve_intercept(s, plan.rate);
    for (std::size_t i = 0; i < n; ++i)
      res.probability[i] = stats::logistic(res.intercept + s(static_cast<Eigen::Index>(i)));
    if (plan.sampling == AmputationSampling::bernoulli) {
      for (std::size_t i = 0; i < n; ++i) miss[i] = uniform01(rng) < res.probability[i] ? 1 : 0;
    } else {
      // Systematic sampling over a random order: unit i is drawn iff a point
      // of the grid u, u+1, u+2, ... falls in its cumulative interval.
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      const double u = uniform01(rng);
      double cum = 0.0;
      for (std::size_t i : order) {
        const double next = cum + res.probability[i];
        miss[i] = std::floor(next - u) > std::floor(cum - u) ? 1 : 0;
        cum = next;
      }
    }
  }

  Column amputed = target;
  for (std::size_t i = 0; i < n; ++i) {
    if (!miss[i]) continue;
    amputed.missing[i] = 1;
    amputed.values[i] = std::nan("");
  }
  res.data = d.with_column(std::move(amputed));
  res.observed.resize(n);
  for (std::size_t i = 0; i < n; ++i) res.observed[i] = miss[i] ? 0 : 1;
  return res;
}

// ---------------------------------------------------------------------------
// Weights

struct PropensityBounds {
  double lower = 0.01;
  double upper = 0.99;

  void validate() const {
    detail::require(lower > 0.0 && upper < 1.0 && lower < upper, "propensity bounds must satisfy 0 < lower < upper < 1");
  }
};

struct WeightVector {
  /// Observation probability after truncation.
  std::vector<double> pi;
  /// Analysis weight; 0 marks rows excluded from a pure IPW analysis.
  std::vector<double> w;
  std::vector<std::uint8_t> observed;
  std::optional<double> kappa;
  std::size_t truncation_count = 0;
};

/// Clamps each probability into the bounds; returns the number clipped.
inline std::size_t truncate_propensity(std::vector<double>& pi, const PropensityBounds& bounds = {}) {
  bounds.validate();
  std::size_t clipped = 0;
  for (double& p : pi) {
    if (p < bounds.lower) {
      p = bounds.lower;
      ++clipped;
    } else if (p > bounds.upper) {
      p = bounds.upper;
      ++clipped;
    }
  }
  return clipped;
}

/// Logistic model for R (1 = target observed) on the given predictor design.
/// Returns the pure IPW form: w = 1/pi on observed rows, 0 elsewhere.
inline WeightVector estimate_propensity(const Eigen::MatrixXd& predictors, std::span<const std::uint8_t> observed,
                                        const PropensityBounds& bounds = {}) {
  bounds.validate();
  detail::require(static_cast<Eigen::Index>(observed.size()) == predictors.rows(),
                  "estimate_propensity: indicator length mismatch");
  const auto n_obs = static_cast<std::size_t>(std::count(observed.begin(), observed.end(), std::uint8_t{1}));
  if (n_obs == observed.size()) throw InputError("estimate_propensity: no missingness to model");
  if (n_obs == 0) throw InputError("estimate_propensity: target never observed");
  std::vector<double> r(observed.begin(), observed.end());
  const GlmFit fit = fit_logistic(predictors, r);
  const Eigen::VectorXd eta = with_intercept(predictors) * fit.coefficients.row(0).transpose();

  WeightVector wv;
  wv.observed.assign(observed.begin(), observed.end());
  wv.pi.resize(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) wv.pi[i] = stats::logistic(eta(static_cast<Eigen::Index>(i)));
  wv.truncation_count = truncate_propensity(wv.pi, bounds);
  wv.w.resize(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) wv.w[i] = observed[i] ? 1.0 / wv.pi[i] : 0.0;
  return wv;
}

/// Propensity for `target` on a dataset; predictor names default to every
/// fully observed covariate plus the event indicator and Nelson-Aalen hazard.
inline WeightVector estimate_propensity(const Dataset& d, const std::string& target,
                                        const std::vector<std::string>& predictors = {},
                                        const PropensityBounds& bounds = {}) {
  const DesignMatrix dm = predictors.empty() ? build_predictors(d, {target}) : select_predictors(d, predictors);
  if (!predictors.empty())
    detail::require(std::find(predictors.begin(), predictors.end(), target) == predictors.end(),
                    "estimate_propensity: target cannot predict its own missingness");
  const auto r = d.observed_indicator(target);
  return estimate_propensity(dm.x, r, bounds);
}

/// kappa-hybrid weights: 1/pi on observed rows; kappa + (1 - kappa)/(1 - pi)
/// on rows whose target was imputed.
inline WeightVector hybrid_weights(std::span<const double> pi, std::span<const std::uint8_t> observed, double kappa,
                                   const PropensityBounds& bounds = {}) {
  bounds.validate();
  detail::require(kappa >= 0.0 && kappa <= 1.0, "hybrid_weights: kappa must lie in [0, 1]");
  detail::require(pi.size() == observed.size(), "hybrid_weights: length mismatch");
  WeightVector wv;
  wv.kappa = kappa;
  wv.pi.assign(pi.begin(), pi.end());
  wv.observed.assign(observed.begin(), observed.end());
  wv.w.resize(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    const double p = pi[i];
    if (!(p >= bounds.lower && p <= bounds.upper))
      throw InputError("hybrid_weights: pi outside the truncation bounds at row " + std::to_string(i));
    wv.w[i] = observed[i] ? 1.0 / p : kappa * 1.0 + (1.0 - kappa) * (1.0 / (1.0 - p));
  }
  return wv;
}

}  // namespace hybridcox
