#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hybridcox/error.hpp"
#include "hybridcox/stats.hpp"

namespace hybridcox {

/// Right-continuous step function. `values[k]` holds on [knots[k], knots[k+1]);
/// before the first knot the function equals `value_at_zero`.
template <class Scalar = double>
struct StepFunction {
  std::vector<double> knots;
  std::vector<Scalar> values;
  Scalar value_at_zero{};

  [[nodiscard]] Scalar operator()(double t) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return value_at_zero;
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
  }

  /// Value just before t (left limit).
  [[nodiscard]] Scalar left_limit(double t) const {
    auto it = std::lower_bound(knots.begin(), knots.end(), t);
    if (it == knots.begin()) return value_at_zero;
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
  }

  [[nodiscard]] std::size_t size() const { return knots.size(); }
};

namespace detail {

struct RiskTable {
  std::vector<double> times;          // distinct observed times, ascending
  std::vector<std::int64_t> at_risk;  // subjects with time >= t
  std::vector<std::int64_t> events;   // events at exactly t
};

inline void check_survival_input(std::span<const double> times, std::span<const double> events) {
  require(times.size() == events.size(), "times and events differ in length");
  require(!times.empty(), "empty input");
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(std::isfinite(times[i]) && times[i] >= 0.0, "times must be finite and >= 0");
    require(events[i] == 0.0 || events[i] == 1.0, "events must be 0 or 1");
  }
}

/// Events and censorings at the same time share the risk set; censored
/// subjects leave after the events are counted.
inline RiskTable risk_table(std::span<const double> times, std::span<const double> events) {
  check_survival_input(times, events);
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  RiskTable rt;
  auto remaining = static_cast<std::int64_t>(times.size());
  for (std::size_t k = 0; k < order.size();) {
    const double t = times[order[k]];
    std::int64_t d = 0, c = 0;
    while (k < order.size() && times[order[k]] == t) {
      if (events[order[k]] == 1.0) ++d;
      else ++c;
      ++k;
    }
    rt.times.push_back(t);
    rt.at_risk.push_back(remaining);
    rt.events.push_back(d);
    remaining -= d + c;
  }
  return rt;
}

}  // namespace detail

/// Product-limit survival estimate with knots at distinct event times.
template <class Scalar = double>
StepFunction<Scalar> kaplan_meier(std::span<const double> times, std::span<const double> events) {
  const auto rt = detail::risk_table(times, events);
  StepFunction<Scalar> s;
  s.value_at_zero = Scalar(1);
  Scalar surv(1);
  for (std::size_t k = 0; k < rt.times.size(); ++k) {
    if (rt.events[k] == 0) continue;
    surv = surv * (Scalar(static_cast<long long>(rt.at_risk[k] - rt.events[k])) /
                   Scalar(static_cast<long long>(rt.at_risk[k])));
    s.knots.push_back(rt.times[k]);
    s.values.push_back(surv);
  }
  return s;
}

/// Cumulative hazard as the running sum of d/n over distinct event times.
template <class Scalar = double>
StepFunction<Scalar> nelson_aalen(std::span<const double> times, std::span<const double> events) {
  const auto rt = detail::risk_table(times, events);
  StepFunction<Scalar> h;
  h.value_at_zero = Scalar(0);
  Scalar cum(0);
  for (std::size_t k = 0; k < rt.times.size(); ++k) {
    if (rt.events[k] == 0) continue;
    cum = cum + Scalar(static_cast<long long>(rt.events[k])) / Scalar(static_cast<long long>(rt.at_risk[k]));
    h.knots.push_back(rt.times[k]);
    h.values.push_back(cum);
  }
  return h;
}

struct LogRankResult {
  double chi_square = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::vector<double> observed;
  std::vector<double> expected;
};

/// k-sample log-rank test, hypergeometric variance, no continuity correction.
/// `groups[i]` is a code in [0, n_groups); every group must be non-empty.
inline LogRankResult logrank_test(std::span<const double> times, std::span<const double> events,
                                  std::span<const int> groups, int n_groups) {
  detail::check_survival_input(times, events);
  detail::require(groups.size() == times.size(), "groups and times differ in length");
  detail::require(n_groups >= 2, "log-rank test needs at least two groups");
  std::vector<std::int64_t> size(static_cast<std::size_t>(n_groups), 0);
  for (int g : groups) {
    detail::require(g >= 0 && g < n_groups, "group code out of range");
    ++size[static_cast<std::size_t>(g)];
  }
  for (int g = 0; g < n_groups; ++g)
    detail::require(size[static_cast<std::size_t>(g)] > 0, "empty group " + std::to_string(g));

  const auto G = static_cast<Eigen::Index>(n_groups);
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  Eigen::VectorXd at_risk(G);
  for (Eigen::Index g = 0; g < G; ++g) at_risk(g) = static_cast<double>(size[static_cast<std::size_t>(g)]);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(G), expct = Eigen::VectorXd::Zero(G);
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(G, G);

  for (std::size_t k = 0; k < order.size();) {
    const double t = times[order[k]];
    Eigen::VectorXd d_g = Eigen::VectorXd::Zero(G), leave = Eigen::VectorXd::Zero(G);
    while (k < order.size() && times[order[k]] == t) {
      const auto g = static_cast<Eigen::Index>(groups[order[k]]);
      if (events[order[k]] == 1.0) d_g(g) += 1.0;
      leave(g) += 1.0;
      ++k;
    }
    const double d = d_g.sum();
    const double n = at_risk.sum();
    if (d > 0.0) {
      obs += d_g;
      expct += d * at_risk / n;
      if (n > 1.0) {
        const double f = d * (n - d) / (n - 1.0);
        for (Eigen::Index a = 0; a < G; ++a)
          for (Eigen::Index b = 0; b < G; ++b)
            var(a, b) += f * at_risk(a) / n * ((a == b ? 1.0 : 0.0) - at_risk(b) / n);
      }
    }
    at_risk -= leave;
  }

  // Drop the last group; the remaining block is invertible unless a group
  // never contributes to a risk set, in which case a pseudo-inverse is used.
  const Eigen::VectorXd u = (obs - expct).head(G - 1);
  const Eigen::MatrixXd v = var.topLeftCorner(G - 1, G - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double cutoff = 1e-10 * std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv_lam(lam.size());
  for (Eigen::Index j = 0; j < lam.size(); ++j) inv_lam(j) = lam(j) > cutoff ? 1.0 / lam(j) : 0.0;
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * u;

  LogRankResult r;
  r.chi_square = proj.dot(inv_lam.asDiagonal() * proj);
  r.df = n_groups - 1;
  r.p_value = stats::chi_square_sf(r.chi_square, r.df);
  r.observed.assign(obs.data(), obs.data() + G);
  r.expected.assign(expct.data(), expct.data() + G);
  return r;
}

struct LogLogPoint {
  double time = 0.0;
  double log_time = 0.0;
  double log_minus_log_survival = 0.0;
};

/// (log t, log(-log S(t))) at every knot with t > 0 and S strictly inside (0,1).
inline std::vector<LogLogPoint> loglog_curve(const StepFunction<double>& km) {
  std::vector<LogLogPoint> out;
  for (std::size_t k = 0; k < km.knots.size(); ++k) {
    const double t = km.knots[k];
    const double s = km.values[k];
    if (t <= 0.0 || !(s > 0.0 && s < 1.0)) continue;
    out.push_back({t, std::log(t), std::log(-std::log(s))});
  }
  return out;
}

}  // namespace hybridcox
