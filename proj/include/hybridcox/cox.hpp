#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hybridcox/dataset.hpp"
#include "hybridcox/error.hpp"
#include "hybridcox/linalg.hpp"
#include "hybridcox/stats.hpp"
#include "hybridcox/survival.hpp"

namespace hybridcox {

enum class Ties { breslow, efron };

inline std::string_view to_string(Ties t) { return t == Ties::efron ? "efron" : "breslow"; }

inline Ties parse_ties(std::string_view s) {
  if (s == "efron") return Ties::efron;
  if (s == "breslow") return Ties::breslow;
  throw InputError("unknown ties method: " + std::string(s));
}

struct CoxOptions {
  Ties ties = Ties::efron;
  int max_iterations = 50;
  int max_halvings = 20;
  /// Converged when max |score| < score_tolerance * max(1, mean weight)
  /// and the relative log-likelihood change < relative_tolerance.
  double score_tolerance = 1e-8;
  double relative_tolerance = 1e-10;
  bool robust = false;
  double separation_norm = 1e3;
  double separation_gain = 1e-10;
  double curvature_collapse = 1e-6;
};

struct CoxFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd model_covariance;
  std::optional<Eigen::MatrixXd> robust_covariance;
  double log_partial_likelihood = 0.0;
  double null_log_partial_likelihood = 0.0;
  Ties ties = Ties::efron;
  bool converged = false;
  int iterations = 0;
  std::vector<double> weights;  // empty when unweighted
  std::vector<std::string> names;

  [[nodiscard]] Eigen::VectorXd model_se() const { return model_covariance.diagonal().cwiseSqrt(); }
  [[nodiscard]] Eigen::VectorXd robust_se() const {
    if (!robust_covariance) throw InputError("robust covariance was not computed");
    return robust_covariance->diagonal().cwiseSqrt();
  }
  /// Robust covariance when present, otherwise model-based.
  [[nodiscard]] const Eigen::MatrixXd& covariance() const {
    return robust_covariance ? *robust_covariance : model_covariance;
  }
};

namespace detail {

/// Subjects sorted by time with tie groups; shared by every Cox routine.
class CoxData {
 public:
  CoxData(const Eigen::MatrixXd& x, std::span<const double> times, std::span<const double> events,
          std::span<const double> weights)
      : x_(x), times_(times), events_(events) {
    const auto n = static_cast<std::size_t>(x.rows());
    require(times.size() == n && events.size() == n, "cox: dimensions of X, times and events disagree");
    require(weights.empty() || weights.size() == n, "cox: weights length mismatch");
    require(x.allFinite(), "cox: design matrix has non-finite entries");
    w_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      require(std::isfinite(times[i]) && times[i] >= 0.0, "cox: times must be finite and >= 0");
      require(events[i] == 0.0 || events[i] == 1.0, "cox: events must be 0/1");
      if (!weights.empty()) {
        require(std::isfinite(weights[i]) && weights[i] > 0.0, "cox: weights must be positive and finite");
        w_(static_cast<Eigen::Index>(i)) = weights[i];
      }
    }
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    for (std::size_t k = 0; k < n;) {
      std::size_t e = k;
      int d = 0;
      while (e < n && times[order_[e]] == times[order_[k]]) {
        d += events[order_[e]] == 1.0 ? 1 : 0;
        ++e;
      }
      groups_.push_back({k, e, d});
      n_events_ += d;
      k = e;
    }
  }

  struct Group {
    std::size_t begin, end;  // into order()
    int deaths;
  };

  [[nodiscard]] const Eigen::MatrixXd& x() const { return x_; }
  [[nodiscard]] const Eigen::VectorXd& w() const { return w_; }
  [[nodiscard]] std::span<const double> times() const { return times_; }
  [[nodiscard]] bool event(std::size_t i) const { return events_[i] == 1.0; }
  [[nodiscard]] const std::vector<std::size_t>& order() const { return order_; }
  [[nodiscard]] const std::vector<Group>& groups() const { return groups_; }
  [[nodiscard]] int n_events() const { return n_events_; }
  [[nodiscard]] Eigen::Index p() const { return x_.cols(); }
  [[nodiscard]] Eigen::Index n() const { return x_.rows(); }

 private:
  const Eigen::MatrixXd& x_;
  std::span<const double> times_;
  std::span<const double> events_;
  Eigen::VectorXd w_;
  std::vector<std::size_t> order_;
  std::vector<Group> groups_;
  int n_events_ = 0;
};

/// Risk-set quantities at one tied event time. For Efron there is one
/// sub-step per death; Breslow has a single sub-step.
struct EventStep {
  double hazard;          // meanw / s0_k on the shifted scale
  Eigen::VectorXd xbar;   // s1_k / s0_k
  double event_fraction;  // share of the step still at risk for the tied deaths: 1 - k/d
};

struct EventTime {
  std::size_t group;
  double sum_weight;              // weighted deaths
  std::vector<EventStep> steps;
  Eigen::MatrixXd information;    // contribution to the information matrix (if requested)
  Eigen::VectorXd mean_xbar;      // average of xbar over steps
};

struct CoxPass {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
  Eigen::VectorXd eta;
  double shift = 0.0;
  std::vector<EventTime> event_times;  // in descending time order
};

/// One backward sweep over the risk sets. level 0: log-likelihood only;
/// 1: add score; 2: add information.
inline CoxPass cox_pass(const CoxData& data, const Eigen::VectorXd& beta, Ties ties, int level,
                        bool keep_steps = false) {
  const Eigen::Index p = data.p();
  const auto& x = data.x();
  const auto& w = data.w();
  CoxPass out;
  out.eta = x * beta;
  out.shift = out.eta.size() ? out.eta.maxCoeff() : 0.0;
  if (level >= 1) out.score = Eigen::VectorXd::Zero(p);
  if (level >= 2) out.information = Eigen::MatrixXd::Zero(p, p);

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  const bool need_s2 = level >= 2;
  const auto& groups = data.groups();
  const auto& order = data.order();

  for (std::size_t gi = groups.size(); gi-- > 0;) {
    const auto& g = groups[gi];
    double d0 = 0.0, sumw = 0.0, sum_w_eta = 0.0;
    Eigen::VectorXd d1 = Eigen::VectorXd::Zero(p), sum_wx = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd d2;
    if (need_s2 && g.deaths > 1 && ties == Ties::efron) d2 = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t k = g.begin; k < g.end; ++k) {
      const std::size_t i = order[k];
      const auto ii = static_cast<Eigen::Index>(i);
      const double r = w(ii) * std::exp(out.eta(ii) - out.shift);
      s0 += r;
      if (level >= 1) s1.noalias() += r * x.row(ii).transpose();
      if (need_s2) s2.noalias() += r * x.row(ii).transpose() * x.row(ii);
      if (data.event(i)) {
        d0 += r;
        sumw += w(ii);
        sum_w_eta += w(ii) * (out.eta(ii) - out.shift);
        if (level >= 1) {
          d1.noalias() += r * x.row(ii).transpose();
          sum_wx.noalias() += w(ii) * x.row(ii).transpose();
        }
        if (d2.size()) d2.noalias() += r * x.row(ii).transpose() * x.row(ii);
      }
    }
    if (g.deaths == 0) continue;

    out.loglik += sum_w_eta;
    if (level >= 1) out.score += sum_wx;
    const int nsteps = (ties == Ties::efron) ? g.deaths : 1;
    const double step_weight = sumw / nsteps;
    EventTime et;
    if (keep_steps) {
      et.group = gi;
      et.sum_weight = sumw;
      if (need_s2) et.information = Eigen::MatrixXd::Zero(p, p);
      et.mean_xbar = Eigen::VectorXd::Zero(p);
    }
    for (int k = 0; k < nsteps; ++k) {
      const double f = (ties == Ties::efron) ? static_cast<double>(k) / g.deaths : 0.0;
      const double a0 = s0 - f * d0;
      out.loglik -= step_weight * std::log(a0);
      if (level >= 1) {
        const Eigen::VectorXd xbar = (s1 - f * d1) / a0;
        out.score -= step_weight * xbar;
        if (need_s2) {
          const Eigen::MatrixXd a2 = d2.size() ? Eigen::MatrixXd(s2 - f * d2) : s2;
          const Eigen::MatrixXd v = a2 / a0 - xbar * xbar.transpose();
          out.information += step_weight * v;
          if (keep_steps) et.information += step_weight * v;
        }
        if (keep_steps) {
          et.steps.push_back({step_weight / a0, xbar, 1.0 - f});
          et.mean_xbar += xbar / nsteps;
        }
      }
    }
    if (keep_steps) out.event_times.push_back(std::move(et));
  }
  return out;
}

inline void require_events(const CoxData& data) {
  if (data.n_events() == 0) throw InputError("cox: no events in data");
}

}  // namespace detail

/// Weighted log partial likelihood with Breslow or Efron handling of ties.
inline double log_partial_likelihood(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                                     std::span<const double> times, std::span<const double> events,
                                     std::span<const double> weights = {}, Ties ties = Ties::efron) {
  detail::CoxData data(x, times, events, weights);
  detail::require_events(data);
  detail::require(beta.size() == x.cols(), "cox: beta length mismatch");
  return detail::cox_pass(data, beta, ties, 0).loglik;
}

/// Gradient of log_partial_likelihood; weights enter both the event sum and
/// the risk-set averages.
inline Eigen::VectorXd score(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x, std::span<const double> times,
                             std::span<const double> events, std::span<const double> weights = {},
                             Ties ties = Ties::efron) {
  detail::CoxData data(x, times, events, weights);
  detail::require_events(data);
  detail::require(beta.size() == x.cols(), "cox: beta length mismatch");
  return detail::cox_pass(data, beta, ties, 1).score;
}

/// Negative Hessian of log_partial_likelihood.
inline Eigen::MatrixXd information(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                                   std::span<const double> times, std::span<const double> events,
                                   std::span<const double> weights = {}, Ties ties = Ties::efron) {
  detail::CoxData data(x, times, events, weights);
  detail::require_events(data);
  return detail::cox_pass(data, beta, ties, 2).information;
}

namespace detail {

/// Per-subject score residuals L_i (unweighted); sum_i w_i L_i equals the score.
inline Eigen::MatrixXd score_residuals(const CoxData& data, const CoxPass& pass) {
  const Eigen::Index n = data.n(), p = data.p();
  const auto& x = data.x();
  const auto& order = data.order();
  const auto& groups = data.groups();
  Eigen::MatrixXd resid = Eigen::MatrixXd::Zero(n, p);
  // Cumulative hazard and hazard-weighted mean from strictly earlier event times.
  double cum_h = 0.0;
  Eigen::VectorXd cum_hx = Eigen::VectorXd::Zero(p);
  auto et = pass.event_times.rbegin();  // ascending time
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const bool has_event = et != pass.event_times.rend() && et->group == gi;
    double own_h_full = 0.0, own_h_event = 0.0;
    Eigen::VectorXd own_hx_full = Eigen::VectorXd::Zero(p), own_hx_event = Eigen::VectorXd::Zero(p);
    if (has_event) {
      for (const auto& s : et->steps) {
        own_h_full += s.hazard;
        own_hx_full += s.hazard * s.xbar;
        own_h_event += s.event_fraction * s.hazard;
        own_hx_event += s.event_fraction * s.hazard * s.xbar;
      }
    }
    for (std::size_t k = g.begin; k < g.end; ++k) {
      const auto i = static_cast<Eigen::Index>(order[k]);
      const double risk = std::exp(pass.eta(i) - pass.shift);
      const bool died = data.event(order[k]);
      const double h = cum_h + (died ? own_h_event : own_h_full);
      const Eigen::VectorXd hx = cum_hx + (died ? own_hx_event : own_hx_full);
      Eigen::VectorXd r = -risk * (x.row(i).transpose() * h - hx);
      if (died) r += x.row(i).transpose() - et->mean_xbar;
      resid.row(i) = r.transpose();
    }
    if (has_event) {
      cum_h += own_h_full;
      cum_hx += own_hx_full;
      ++et;
    }
  }
  return resid;
}

}  // namespace detail

/// Sandwich covariance A^{-1} B A^{-1} with B = sum_i w_i^2 L_i L_i'.
inline Eigen::MatrixXd robust_variance(const CoxFit& fit, const Eigen::MatrixXd& x, std::span<const double> times,
                                       std::span<const double> events, std::span<const double> weights = {}) {
  detail::require(fit.converged, "robust_variance: fit did not converge");
  detail::CoxData data(x, times, events, weights);
  detail::require_events(data);
  const auto pass = detail::cox_pass(data, fit.beta, fit.ties, 2, true);
  const Eigen::MatrixXd a_inv = linalg::spd_inverse(pass.information, "robust_variance");
  const Eigen::MatrixXd l = detail::score_residuals(data, pass);
  const Eigen::MatrixXd dfbeta = data.w().asDiagonal() * l * a_inv;
  Eigen::MatrixXd v = linalg::symmetrize(dfbeta.transpose() * dfbeta);
  if (!linalg::is_symmetric_psd(v)) throw NumericalError("robust_variance: result is not PSD");
  return v;
}

/// Newton-Raphson with step-halving from beta = 0.
inline CoxFit fit_cox(const Eigen::MatrixXd& x, std::span<const double> times, std::span<const double> events,
                      std::span<const double> weights = {}, const CoxOptions& opt = {}) {
  detail::CoxData data(x, times, events, weights);
  detail::require_events(data);
  detail::require(x.cols() >= 1, "fit_cox: no covariates");
  const Eigen::Index p = x.cols();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto pass = detail::cox_pass(data, beta, opt.ties, 2);
  const Eigen::MatrixXd info0 = pass.information;
  if (linalg::is_rank_deficient(info0))
    throw RankDeficiencyError("fit_cox: information matrix is rank deficient (constant or collinear covariates)");

  CoxFit fit;
  fit.ties = opt.ties;
  fit.null_log_partial_likelihood = pass.loglik;
  const double score_tol = opt.score_tolerance * std::max(1.0, data.w().mean());
  double ll = pass.loglik;
  bool monotone = false;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    fit.iterations = it;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(pass.information);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        linalg::min_generalized_eigenvalue(pass.information, info0) < opt.curvature_collapse) {
      monotone = true;
      break;
    }
    Eigen::VectorXd step = ldlt.solve(pass.score);
    Eigen::VectorXd cand = beta + step;
    double ll_new = detail::cox_pass(data, cand, opt.ties, 0).loglik;
    // Changes below the rounding noise of the log-likelihood count as ascent.
    const double noise = 1e-13 * std::max(1.0, std::fabs(ll));
    for (int h = 0; h < opt.max_halvings && !(ll_new >= ll - noise); ++h) {
      step *= 0.5;
      cand = beta + step;
      ll_new = detail::cox_pass(data, cand, opt.ties, 0).loglik;
    }
    if (!(ll_new >= ll - noise)) {
      cand = beta;
      ll_new = ll;
    }
    const double gain = ll_new - ll;
    const double rel = std::fabs(gain) / std::max(std::fabs(ll_new), 1e-300);
    beta = cand;
    ll = ll_new;
    pass = detail::cox_pass(data, beta, opt.ties, 2);
    if (beta.norm() > opt.separation_norm && gain < opt.separation_gain) {
      monotone = true;
      break;
    }
    if (rel < opt.relative_tolerance && pass.score.cwiseAbs().maxCoeff() < score_tol) {
      fit.converged = true;
      break;
    }
  }
  if (monotone || linalg::min_generalized_eigenvalue(pass.information, info0) < opt.curvature_collapse)
    throw SeparationError("fit_cox: monotone partial likelihood (coefficient diverges to infinity)");
  if (!fit.converged)
    throw ConvergenceError("fit_cox: no convergence after " + std::to_string(opt.max_iterations) + " iterations");

  fit.beta = beta;
  fit.log_partial_likelihood = ll;
  fit.model_covariance = linalg::spd_inverse(pass.information, "fit_cox");
  if (!weights.empty()) fit.weights.assign(weights.begin(), weights.end());
  if (opt.robust) fit.robust_covariance = robust_variance(fit, x, times, events, weights);
  return fit;
}

/// Convenience overload on a dataset; names are taken from the design.
inline CoxFit fit_cox(const DesignMatrix& design, const Dataset& d, std::span<const double> weights = {},
                      const CoxOptions& opt = {}) {
  CoxFit fit = fit_cox(design.x, d.times(), d.events(), weights, opt);
  fit.names = design.names;
  return fit;
}

// ---------------------------------------------------------------------------
// Residuals

struct ResidualSet {
  /// One row per event (ascending time), one column per coefficient.
  Eigen::MatrixXd schoenfeld;
  std::vector<double> event_times;
  std::vector<std::size_t> event_subjects;
  /// One entry per subject, in input order.
  Eigen::VectorXd martingale;
};

/// Martingale residuals use the Breslow-type baseline (with the Efron split
/// inside tied deaths when the fit used Efron); Schoenfeld residuals are
/// X_i minus the risk-set weighted mean.
inline ResidualSet residuals(const CoxFit& fit, const Eigen::MatrixXd& x, std::span<const double> times,
                             std::span<const double> events, std::span<const double> weights = {}) {
  detail::require(fit.converged, "residuals: fit did not converge");
  detail::CoxData data(x, times, events, weights);
  detail::require_events(data);
  const auto pass = detail::cox_pass(data, fit.beta, fit.ties, 1, true);
  const auto& order = data.order();
  const auto& groups = data.groups();
  ResidualSet rs;
  rs.schoenfeld = Eigen::MatrixXd::Zero(data.n_events(), data.p());
  rs.martingale = Eigen::VectorXd::Zero(data.n());

  double cum_h = 0.0;
  Eigen::Index row = 0;
  auto et = pass.event_times.rbegin();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const bool has_event = et != pass.event_times.rend() && et->group == gi;
    double own_full = 0.0, own_event = 0.0;
    if (has_event)
      for (const auto& s : et->steps) {
        own_full += s.hazard;
        own_event += s.event_fraction * s.hazard;
      }
    for (std::size_t k = g.begin; k < g.end; ++k) {
      const std::size_t i = order[k];
      const auto ii = static_cast<Eigen::Index>(i);
      const bool died = data.event(i);
      const double cumhaz = cum_h + (died ? own_event : own_full);
      rs.martingale(ii) = (died ? 1.0 : 0.0) - std::exp(pass.eta(ii) - pass.shift) * cumhaz;
      if (died) {
        rs.schoenfeld.row(row) = x.row(ii) - et->mean_xbar.transpose();
        rs.event_times.push_back(times[i]);
        rs.event_subjects.push_back(i);
        ++row;
      }
    }
    if (has_event) {
      cum_h += own_full;
      ++et;
    }
  }
  return rs;
}

// ---------------------------------------------------------------------------
// Proportional-hazards test

enum class TimeTransform { km, identity, rank };

inline TimeTransform parse_time_transform(std::string_view s) {
  if (s == "km") return TimeTransform::km;
  if (s == "identity") return TimeTransform::identity;
  if (s == "rank") return TimeTransform::rank;
  throw InputError("unknown time transform: " + std::string(s));
}

struct PhTestRow {
  std::string name;
  double chi_square = 0.0;
  int df = 1;
  double p_value = 1.0;
};

struct PhTestResult {
  std::vector<PhTestRow> terms;
  PhTestRow global;
};

/// Score test for a zero slope of the coefficients on g(t), i.e. for the
/// added terms g(t) * X in the model evaluated at (beta_hat, 0). `groups`
/// optionally bundles design columns into multi-df terms.
inline PhTestResult ph_test(const CoxFit& fit, const Eigen::MatrixXd& x, std::span<const double> times,
                            std::span<const double> events, std::span<const double> weights = {},
                            TimeTransform transform = TimeTransform::km,
                            const std::vector<EncodedTerm>& groups = {}) {
  detail::require(fit.converged, "ph_test: fit did not converge");
  detail::CoxData data(x, times, events, weights);
  const Eigen::Index p = data.p();
  detail::require(data.n_events() >= 2, "ph_test: need at least two events");
  detail::require(data.n_events() >= p, "ph_test: fewer events than coefficients");
  const auto pass = detail::cox_pass(data, fit.beta, fit.ties, 2, true);

  // Transformed time per event group.
  std::vector<double> event_group_times;
  for (auto it = pass.event_times.rbegin(); it != pass.event_times.rend(); ++it)
    event_group_times.push_back(times[data.order()[data.groups()[it->group].begin]]);
  std::vector<double> g(event_group_times.size());
  switch (transform) {
    case TimeTransform::identity:
      g = event_group_times;
      break;
    case TimeTransform::km: {
      const auto km = kaplan_meier(times, events);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = 1.0 - km.left_limit(event_group_times[k]);
      break;
    }
    case TimeTransform::rank: {
      // Average rank of each event among all events (ties share the mean rank).
      double seen = 0.0;
      std::size_t k = 0;
      for (auto it = pass.event_times.rbegin(); it != pass.event_times.rend(); ++it, ++k) {
        const double d = data.groups()[it->group].deaths;
        g[k] = seen + (d + 1.0) / 2.0;
        seen += d;
      }
      break;
    }
  }

  Eigen::MatrixXd i11 = Eigen::MatrixXd::Zero(p, p), i12 = i11, i22 = i11;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
  const auto& order = data.order();
  std::size_t k = 0;
  for (auto it = pass.event_times.rbegin(); it != pass.event_times.rend(); ++it, ++k) {
    const double gk = g[k];
    i11 += it->information;
    i12 += gk * it->information;
    i22 += gk * gk * it->information;
    const auto& grp = data.groups()[it->group];
    for (std::size_t m = grp.begin; m < grp.end; ++m) {
      const std::size_t i = order[m];
      if (!data.event(i)) continue;
      const auto ii = static_cast<Eigen::Index>(i);
      u += gk * data.w()(ii) * (x.row(ii).transpose() - it->mean_xbar);
    }
  }
  const Eigen::MatrixXd schur = linalg::symmetrize(i22 - i12.transpose() * linalg::spd_inverse(i11, "ph_test") * i12);

  auto quad = [&](const std::vector<Eigen::Index>& idx) {
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd v(m, m);
    Eigen::VectorXd uu(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      uu(a) = u(idx[static_cast<std::size_t>(a)]);
      for (Eigen::Index b = 0; b < m; ++b) v(a, b) = schur(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(v);
    if (ldlt.info() != Eigen::Success) throw NumericalError("ph_test: singular variance");
    return uu.dot(ldlt.solve(uu));
  };

  PhTestResult res;
  if (groups.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) {
      PhTestRow row;
      row.name = static_cast<std::size_t>(j) < fit.names.size() ? fit.names[static_cast<std::size_t>(j)]
                                                                : "x" + std::to_string(j + 1);
      row.chi_square = quad({j});
      row.df = 1;
      row.p_value = stats::chi_square_sf(row.chi_square, 1);
      res.terms.push_back(row);
    }
  } else {
    for (const auto& t : groups) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index c = 0; c < t.n_columns; ++c) idx.push_back(t.first_column + c);
      PhTestRow row{t.variable, quad(idx), static_cast<int>(t.n_columns), 1.0};
      row.p_value = stats::chi_square_sf(row.chi_square, row.df);
      res.terms.push_back(row);
    }
  }
  std::vector<Eigen::Index> all(static_cast<std::size_t>(p));
  std::iota(all.begin(), all.end(), Eigen::Index{0});
  res.global = {"GLOBAL", quad(all), static_cast<int>(p), 1.0};
  res.global.p_value = stats::chi_square_sf(res.global.chi_square, res.global.df);
  return res;
}

}  // namespace hybridcox
