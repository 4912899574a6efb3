#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridcox/error.hpp"
#include "hybridcox/linalg.hpp"
#include "hybridcox/rng.hpp"
#include "hybridcox/stats.hpp"

namespace hybridcox {

struct GlmOptions {
  int max_iterations = 100;
  double relative_tolerance = 1e-10;  // on the log-likelihood
  double score_tolerance = 1e-8;      // max |score component|
  int max_halvings = 20;
  bool add_intercept = true;
  /// Separation: coefficient norm beyond this with a stalled likelihood.
  double separation_norm = 1e3;
  double separation_gain = 1e-10;
  /// Separation: curvature at the optimum below this fraction of the
  /// curvature at zero along some direction.
  double curvature_collapse = 1e-6;
};

/// Fitted binary or multinomial logistic model. Row k of `coefficients`
/// is the contrast of the k-th non-reference level against `reference`;
/// column 0 is the intercept when one was added.
struct GlmFit {
  Eigen::MatrixXd coefficients;
  /// Covariance of the row-major flattening of `coefficients`.
  Eigen::MatrixXd covariance;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  bool intercept = true;
  int n_levels = 2;
  int reference = 0;

  [[nodiscard]] Eigen::VectorXd flat() const {
    Eigen::VectorXd v(coefficients.size());
    for (Eigen::Index k = 0; k < coefficients.rows(); ++k)
      v.segment(k * coefficients.cols(), coefficients.cols()) = coefficients.row(k).transpose();
    return v;
  }

  [[nodiscard]] Eigen::MatrixXd unflatten(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd m(coefficients.rows(), coefficients.cols());
    for (Eigen::Index k = 0; k < m.rows(); ++k) m.row(k) = v.segment(k * m.cols(), m.cols()).transpose();
    return m;
  }
};

inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z(x.rows(), x.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;
  return z;
}

namespace detail {

inline Eigen::VectorXd weights_or_ones(std::span<const double> w, Eigen::Index n) {
  if (w.empty()) return Eigen::VectorXd::Ones(n);
  require(static_cast<Eigen::Index>(w.size()) == n, "weights length mismatch");
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = w[static_cast<std::size_t>(i)];
    require(std::isfinite(wi) && wi > 0.0, "weights must be positive and finite");
    out(i) = wi;
  }
  return out;
}

inline void check_finite(const Eigen::MatrixXd& x) {
  require(x.allFinite(), "design matrix has non-finite entries");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary logistic. `z` is the full design (intercept column included).

inline double logistic_loglik(const Eigen::VectorXd& beta, const Eigen::MatrixXd& z,
                              std::span<const double> y, std::span<const double> w = {}) {
  const Eigen::VectorXd wt = detail::weights_or_ones(w, z.rows());
  const Eigen::VectorXd eta = z * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    ll += wt(i) * (y[static_cast<std::size_t>(i)] * eta(i) - stats::log1p_exp(eta(i)));
  return ll;
}

inline Eigen::VectorXd logistic_score(const Eigen::VectorXd& beta, const Eigen::MatrixXd& z,
                                      std::span<const double> y, std::span<const double> w = {}) {
  const Eigen::VectorXd wt = detail::weights_or_ones(w, z.rows());
  const Eigen::VectorXd eta = z * beta;
  Eigen::VectorXd r(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    r(i) = wt(i) * (y[static_cast<std::size_t>(i)] - stats::logistic(eta(i)));
  return z.transpose() * r;
}

inline Eigen::MatrixXd logistic_information(const Eigen::VectorXd& beta, const Eigen::MatrixXd& z,
                                            std::span<const double> w = {}) {
  const Eigen::VectorXd wt = detail::weights_or_ones(w, z.rows());
  const Eigen::VectorXd eta = z * beta;
  Eigen::VectorXd v(z.rows());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double p = stats::logistic(eta(i));
    v(i) = wt(i) * p * (1.0 - p);
  }
  return z.transpose() * v.asDiagonal() * z;
}

// ---------------------------------------------------------------------------
// Multinomial logistic with reference-level parameterization. `theta` is the
// row-major flattening of the (K-1) x q coefficient matrix; `y` holds codes
// in [0, K) and `reference` names the baseline level.

namespace detail {

inline int contrast_of(int level, int reference) {
  if (level == reference) return -1;
  return level < reference ? level : level - 1;
}

/// Row probabilities in original level order.
inline Eigen::MatrixXd multinomial_probs(const Eigen::MatrixXd& coef, const Eigen::MatrixXd& z, int n_levels,
                                         int reference) {
  const Eigen::MatrixXd eta = z * coef.transpose();  // n x (K-1)
  Eigen::MatrixXd p(z.rows(), n_levels);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double mx = 0.0;
    for (Eigen::Index c = 0; c < eta.cols(); ++c) mx = std::max(mx, eta(i, c));
    double denom = std::exp(-mx);
    for (Eigen::Index c = 0; c < eta.cols(); ++c) denom += std::exp(eta(i, c) - mx);
    for (int k = 0; k < n_levels; ++k) {
      const int c = contrast_of(k, reference);
      p(i, k) = std::exp((c < 0 ? 0.0 : eta(i, c)) - mx) / denom;
    }
  }
  return p;
}

}  // namespace detail

inline double multinomial_loglik(const Eigen::VectorXd& theta, const Eigen::MatrixXd& z, std::span<const int> y,
                                 int n_levels, int reference = 0, std::span<const double> w = {}) {
  const Eigen::VectorXd wt = detail::weights_or_ones(w, z.rows());
  const Eigen::Index q = z.cols();
  Eigen::MatrixXd coef(n_levels - 1, q);
  for (Eigen::Index k = 0; k < coef.rows(); ++k) coef.row(k) = theta.segment(k * q, q).transpose();
  const Eigen::MatrixXd eta = z * coef.transpose();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    double mx = 0.0;
    for (Eigen::Index c = 0; c < eta.cols(); ++c) mx = std::max(mx, eta(i, c));
    double s = std::exp(-mx);
    for (Eigen::Index c = 0; c < eta.cols(); ++c) s += std::exp(eta(i, c) - mx);
    const int c = detail::contrast_of(y[static_cast<std::size_t>(i)], reference);
    ll += wt(i) * ((c < 0 ? 0.0 : eta(i, c)) - mx - std::log(s));
  }
  return ll;
}

inline Eigen::VectorXd multinomial_score(const Eigen::VectorXd& theta, const Eigen::MatrixXd& z,
                                         std::span<const int> y, int n_levels, int reference = 0,
                                         std::span<const double> w = {}) {
  const Eigen::VectorXd wt = detail::weights_or_ones(w, z.rows());
  const Eigen::Index q = z.cols();
  Eigen::MatrixXd coef(n_levels - 1, q);
  for (Eigen::Index k = 0; k < coef.rows(); ++k) coef.row(k) = theta.segment(k * q, q).transpose();
  const Eigen::MatrixXd p = detail::multinomial_probs(coef, z, n_levels, reference);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int yi = y[static_cast<std::size_t>(i)];
    for (int k = 0; k < n_levels; ++k) {
      const int c = detail::contrast_of(k, reference);
      if (c < 0) continue;
      const double resid = (yi == k ? 1.0 : 0.0) - p(i, k);
      g.segment(c * q, q) += wt(i) * resid * z.row(i).transpose();
    }
  }
  return g;
}

inline Eigen::MatrixXd multinomial_information(const Eigen::VectorXd& theta, const Eigen::MatrixXd& z,
                                               int n_levels, int reference = 0, std::span<const double> w = {}) {
  const Eigen::VectorXd wt = detail::weights_or_ones(w, z.rows());
  const Eigen::Index q = z.cols();
  const Eigen::Index kc = n_levels - 1;
  Eigen::MatrixXd coef(kc, q);
  for (Eigen::Index k = 0; k < kc; ++k) coef.row(k) = theta.segment(k * q, q).transpose();
  const Eigen::MatrixXd p = detail::multinomial_probs(coef, z, n_levels, reference);
  // Contrast-ordered probabilities.
  Eigen::MatrixXd pc(z.rows(), kc);
  for (int k = 0; k < n_levels; ++k) {
    const int c = detail::contrast_of(k, reference);
    if (c >= 0) pc.col(c) = p.col(k);
  }
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(kc * q, kc * q);
  for (Eigen::Index a = 0; a < kc; ++a) {
    for (Eigen::Index b = a; b < kc; ++b) {
      Eigen::VectorXd v(z.rows());
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        v(i) = wt(i) * pc(i, a) * ((a == b ? 1.0 : 0.0) - pc(i, b));
      const Eigen::MatrixXd block = z.transpose() * v.asDiagonal() * z;
      info.block(a * q, b * q, q, q) = block;
      if (a != b) info.block(b * q, a * q, q, q) = block.transpose();
    }
  }
  return info;
}

namespace detail {

/// Damped Newton ascent shared by the logistic and multinomial fitters.
struct NewtonResult {
  GlmFit fit;
  Eigen::VectorXd theta;
};

template <class LogLik, class Score, class Info>
NewtonResult newton_glm(Eigen::VectorXd theta, LogLik&& loglik, Score&& score, Info&& info, const GlmOptions& opt,
                  const char* what) {
  const Eigen::MatrixXd info0 = info(theta);
  if (linalg::is_rank_deficient(info0))
    throw RankDeficiencyError(std::string(what) + ": design is rank deficient (constant or collinear columns)");

  double ll = loglik(theta);
  GlmFit fit;
  bool separated = false;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    fit.iterations = it;
    const Eigen::VectorXd g = score(theta);
    const Eigen::MatrixXd h = info(theta);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        linalg::min_generalized_eigenvalue(h, info0) < opt.curvature_collapse) {
      separated = true;
      break;
    }
    Eigen::VectorXd step = ldlt.solve(g);
    Eigen::VectorXd cand = theta + step;
    double ll_new = loglik(cand);
    const double noise = 1e-13 * std::max(1.0, std::fabs(ll));
    for (int k = 0; k < opt.max_halvings && !(ll_new >= ll - noise); ++k) {
      step *= 0.5;
      cand = theta + step;
      ll_new = loglik(cand);
    }
    if (!(ll_new >= ll - noise)) {
      // No ascent possible along the Newton direction: at the optimum up to rounding.
      ll_new = ll;
      cand = theta;
    }
    const double gain = ll_new - ll;
    const double rel = std::fabs(gain) / std::max(std::fabs(ll_new), 1e-300);
    theta = cand;
    ll = ll_new;
    if (theta.norm() > opt.separation_norm && gain < opt.separation_gain) {
      separated = true;
      break;
    }
    const double max_score = score(theta).cwiseAbs().maxCoeff();
    if ((rel < opt.relative_tolerance || ll == 0.0) && max_score < opt.score_tolerance) {
      fit.converged = true;
      break;
    }
  }
  const Eigen::MatrixXd h = info(theta);
  if (separated || linalg::min_generalized_eigenvalue(h, info0) < opt.curvature_collapse)
    throw SeparationError(std::string(what) +
                          ": complete or quasi-complete separation (fitted probabilities at 0 or 1)");
  if (!fit.converged)
    throw ConvergenceError(std::string(what) + ": no convergence after " + std::to_string(opt.max_iterations) +
                           " iterations");
  fit.log_likelihood = ll;
  fit.covariance = linalg::spd_inverse(h, what);
  return {std::move(fit), std::move(theta)};
}

}  // namespace detail

/// Maximum-likelihood binary logistic regression by damped Newton (IRLS).
inline GlmFit fit_logistic(const Eigen::MatrixXd& x, std::span<const double> y, std::span<const double> w = {},
                           const GlmOptions& opt = {}) {
  detail::require(static_cast<Eigen::Index>(y.size()) == x.rows(), "fit_logistic: y length mismatch");
  detail::require(x.rows() > 0, "fit_logistic: empty data");
  detail::check_finite(x);
  for (double v : y) detail::require(v == 0.0 || v == 1.0, "fit_logistic: y must be 0/1");
  const Eigen::MatrixXd z = opt.add_intercept ? with_intercept(x) : x;
  const Eigen::VectorXd wt = detail::weights_or_ones(w, z.rows());
  std::span<const double> ws(wt.data(), static_cast<std::size_t>(wt.size()));

  auto [fit, theta] = detail::newton_glm(
      Eigen::VectorXd::Zero(z.cols()), [&](const Eigen::VectorXd& b) { return logistic_loglik(b, z, y, ws); },
      [&](const Eigen::VectorXd& b) { return logistic_score(b, z, y, ws); },
      [&](const Eigen::VectorXd& b) { return logistic_information(b, z, ws); }, opt, "fit_logistic");
  fit.coefficients = theta.transpose();
  fit.intercept = opt.add_intercept;
  fit.n_levels = 2;
  fit.reference = 0;
  return fit;
}

/// Maximum-likelihood multinomial logistic regression; K-1 contrasts
/// against `reference`. Every level must be observed.
inline GlmFit fit_multinomial(const Eigen::MatrixXd& x, std::span<const int> y, int n_levels, int reference = 0,
                              std::span<const double> w = {}, const GlmOptions& opt = {}) {
  detail::require(static_cast<Eigen::Index>(y.size()) == x.rows(), "fit_multinomial: y length mismatch");
  detail::require(x.rows() > 0, "fit_multinomial: empty data");
  detail::require(n_levels >= 2, "fit_multinomial: need at least two levels");
  detail::require(reference >= 0 && reference < n_levels, "fit_multinomial: bad reference level");
  detail::check_finite(x);
  std::vector<int> counts(static_cast<std::size_t>(n_levels), 0);
  for (int v : y) {
    detail::require(v >= 0 && v < n_levels, "fit_multinomial: level code out of range");
    ++counts[static_cast<std::size_t>(v)];
  }
  for (int k = 0; k < n_levels; ++k)
    if (counts[static_cast<std::size_t>(k)] == 0)
      throw SeparationError("fit_multinomial: level " + std::to_string(k) +
                            " never observed (degenerate outcome)");

  const Eigen::MatrixXd z = opt.add_intercept ? with_intercept(x) : x;
  const Eigen::VectorXd wt = detail::weights_or_ones(w, z.rows());
  std::span<const double> ws(wt.data(), static_cast<std::size_t>(wt.size()));
  const Eigen::Index q = z.cols();

  auto [fit, theta] = detail::newton_glm(
      Eigen::VectorXd::Zero((n_levels - 1) * q),
      [&](const Eigen::VectorXd& t) { return multinomial_loglik(t, z, y, n_levels, reference, ws); },
      [&](const Eigen::VectorXd& t) { return multinomial_score(t, z, y, n_levels, reference, ws); },
      [&](const Eigen::VectorXd& t) { return multinomial_information(t, z, n_levels, reference, ws); }, opt,
      "fit_multinomial");
  fit.coefficients.resize(n_levels - 1, q);
  for (Eigen::Index k = 0; k < n_levels - 1; ++k) fit.coefficients.row(k) = theta.segment(k * q, q).transpose();
  fit.intercept = opt.add_intercept;
  fit.n_levels = n_levels;
  fit.reference = reference;
  return fit;
}

/// Class probabilities (n x K, original level order) for predictor rows `x`
/// (without intercept column when the fit added one).
inline Eigen::MatrixXd predict_probabilities(const GlmFit& fit, const Eigen::MatrixXd& coefficients,
                                             const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd z = fit.intercept ? with_intercept(x) : x;
  return detail::multinomial_probs(coefficients, z, fit.n_levels, fit.reference);
}

inline Eigen::MatrixXd predict_probabilities(const GlmFit& fit, const Eigen::MatrixXd& x) {
  return predict_probabilities(fit, fit.coefficients, x);
}

/// One draw from the asymptotic normal posterior N(beta_hat, covariance),
/// using the symmetric square root of the covariance.
inline Eigen::MatrixXd draw_coefficients(const GlmFit& fit, Rng& rng) {
  detail::require(fit.converged, "draw_coefficients: fit did not converge");
  const Eigen::MatrixXd root = linalg::symmetric_sqrt(fit.covariance);
  Eigen::VectorXd z(root.rows());
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = standard_normal(rng);
  return fit.unflatten(fit.flat() + root * z);
}

}  // namespace hybridcox
