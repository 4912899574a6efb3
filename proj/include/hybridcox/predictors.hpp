#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "hybridcox/dataset.hpp"
#include "hybridcox/survival.hpp"

namespace hybridcox {

inline constexpr const char* kEventPredictor = "event";
inline constexpr const char* kCumhazPredictor = "cumhaz";

/// Imputation/propensity design: every fully observed covariate (except
/// those listed in `exclude`), the event indicator, and the Nelson-Aalen
/// cumulative hazard at each subject's own time.
inline DesignMatrix build_predictors(const Dataset& d, const std::vector<std::string>& exclude = {}) {
  std::vector<std::string> covs;
  for (const auto& name : d.covariate_names()) {
    if (std::find(exclude.begin(), exclude.end(), name) != exclude.end()) continue;
    if (d.column(name).any_missing()) continue;
    covs.push_back(name);
  }
  DesignMatrix base = encode(d, covs);
  const auto n = static_cast<Eigen::Index>(d.n_rows());
  const Eigen::Index p = base.cols();
  DesignMatrix out;
  out.x.resize(n, p + 2);
  out.x.leftCols(p) = base.x;
  const auto na = nelson_aalen(d.times(), d.events());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.x(i, p) = d.events()[static_cast<std::size_t>(i)];
    out.x(i, p + 1) = na(d.times()[static_cast<std::size_t>(i)]);
  }
  out.names = base.names;
  out.names.emplace_back(kEventPredictor);
  out.names.emplace_back(kCumhazPredictor);
  out.terms = base.terms;
  out.terms.push_back({kEventPredictor, p, 1, {}});
  out.terms.push_back({kCumhazPredictor, p + 1, 1, {}});
  return out;
}

/// Design from an explicit predictor list. The names "event" and "cumhaz"
/// select the event indicator and Nelson-Aalen columns unless the dataset
/// has a covariate of that name.
inline DesignMatrix select_predictors(const Dataset& d, const std::vector<std::string>& names) {
  std::vector<std::string> covs;
  bool want_event = false, want_cumhaz = false;
  for (const auto& name : names) {
    if (d.find(name)) {
      const Column& c = d.column(name);
      if (c.kind == ColumnKind::event) {
        want_event = true;
        continue;
      }
      if (c.kind == ColumnKind::time) throw InputError("predictor '" + name + "' is the time column; use cumhaz");
      covs.push_back(name);
    } else if (name == kEventPredictor) {
      want_event = true;
    } else if (name == kCumhazPredictor) {
      want_cumhaz = true;
    } else {
      throw InputError("unknown predictor: " + name);
    }
  }
  DesignMatrix out = encode(d, covs);
  const auto n = static_cast<Eigen::Index>(d.n_rows());
  const Eigen::Index extra = (want_event ? 1 : 0) + (want_cumhaz ? 1 : 0);
  Eigen::Index col = out.cols();
  out.x.conservativeResize(n, col + extra);
  if (want_event) {
    for (Eigen::Index i = 0; i < n; ++i) out.x(i, col) = d.events()[static_cast<std::size_t>(i)];
    out.names.emplace_back(kEventPredictor);
    out.terms.push_back({kEventPredictor, col, 1, {}});
    ++col;
  }
  if (want_cumhaz) {
    const auto na = nelson_aalen(d.times(), d.events());
    for (Eigen::Index i = 0; i < n; ++i) out.x(i, col) = na(d.times()[static_cast<std::size_t>(i)]);
    out.names.emplace_back(kCumhazPredictor);
    out.terms.push_back({kCumhazPredictor, col, 1, {}});
  }
  return out;
}

}  // namespace hybridcox
