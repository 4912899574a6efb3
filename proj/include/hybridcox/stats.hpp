#pragma once

#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "hybridcox/error.hpp"

namespace hybridcox::stats {

/// Upper tail P(X > x) of a chi-square variable with `df` degrees of freedom.
inline double chi_square_sf(double x, double df) {
  detail::require(df > 0.0, "chi-square df must be positive");
  if (!(x > 0.0)) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal(0.0, 1.0), p);
}

/// Student-t quantile; infinite df falls back to the normal quantile.
inline double t_quantile(double p, double df) {
  if (std::isinf(df) || df > 1e10) return normal_quantile(p);
  detail::require(df > 0.0, "t df must be positive");
  return boost::math::quantile(boost::math::students_t(df), p);
}

inline double normal_two_sided_p(double z) {
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(0.0, 1.0), std::fabs(z)));
}

inline double logistic(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

/// log(1 + exp(eta)) without overflow.
inline double log1p_exp(double eta) {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

}  // namespace hybridcox::stats
