#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these call into the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Fn = std::function<double(const Eigen::VectorXd&)>;

/// Maximizes a unimodal f on [a, b].
inline double golden_section_max(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Nelder-Mead maximization with restarts from the incumbent.
inline Eigen::VectorXd nelder_mead_max(const Fn& f, Eigen::VectorXd x0, double step = 0.5, double tol = 1e-15,
                                       int max_iter = 20000, int restarts = 4) {
  const auto n = x0.size();
  for (int round = 0; round <= restarts; ++round) {
    std::vector<Eigen::VectorXd> s(static_cast<std::size_t>(n + 1), x0);
    for (Eigen::Index j = 0; j < n; ++j) s[static_cast<std::size_t>(j + 1)](j) += step;
    std::vector<double> v(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) v[k] = -f(s[k]);
    for (int it = 0; it < max_iter; ++it) {
      std::vector<std::size_t> idx(s.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
      const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
      if (std::fabs(v[worst] - v[best]) <= tol * (1.0 + std::fabs(v[best]))) {
        double spread = 0.0;
        for (const auto& p : s) spread = std::max(spread, (p - s[best]).cwiseAbs().maxCoeff());
        if (spread < 1e-11) break;
      }
      Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
      for (std::size_t k = 0; k < s.size(); ++k)
        if (k != worst) c += s[k];
      c /= static_cast<double>(n);
      const Eigen::VectorXd xr = c + (c - s[worst]);
      const double fr = -f(xr);
      if (fr < v[best]) {
        const Eigen::VectorXd xe = c + 2.0 * (c - s[worst]);
        const double fe = -f(xe);
        if (fe < fr) {
          s[worst] = xe;
          v[worst] = fe;
        } else {
          s[worst] = xr;
          v[worst] = fr;
        }
      } else if (fr < v[second]) {
        s[worst] = xr;
        v[worst] = fr;
      } else {
        const Eigen::VectorXd xc = c + 0.5 * (s[worst] - c);
        const double fcv = -f(xc);
        if (fcv < v[worst]) {
          s[worst] = xc;
          v[worst] = fcv;
        } else {
          for (std::size_t k = 0; k < s.size(); ++k) {
            if (k == best) continue;
            s[k] = s[best] + 0.5 * (s[k] - s[best]);
            v[k] = -f(s[k]);
          }
        }
      }
    }
    const auto best = static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
    x0 = s[best];
    step *= 0.1;
  }
  return x0;
}

/// Coordinate-wise golden-section ascent inside a box of half-width `radius`
/// around the current point; polishes a Nelder-Mead answer.
inline Eigen::VectorXd coordinate_polish(const Fn& f, Eigen::VectorXd x, double radius = 1e-2, int max_sweeps = 2000) {
  for (int s = 0; s < max_sweeps; ++s) {
    double moved = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      auto g = [&](double t) {
        Eigen::VectorXd y = x;
        y(j) = t;
        return f(y);
      };
      const double next = golden_section_max(g, x(j) - radius, x(j) + radius, 1e-13);
      moved = std::max(moved, std::fabs(next - x(j)));
      x(j) = next;
    }
    if (moved < 1e-11) break;
  }
  return x;
}

/// Central finite-difference gradient.
inline Eigen::VectorXd central_gradient(const Fn& f, const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd a = x, b = x;
    a(j) += h;
    b(j) -= h;
    g(j) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// Exact Cox log partial likelihood from the textbook product, one factor per
/// event. Ties use Breslow (efron = false) or Efron's averaged risk set.
inline double cox_loglik(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x, const std::vector<double>& t,
                         const std::vector<double>& d, const std::vector<double>& w = {}, bool efron = true) {
  const std::size_t n = t.size();
  auto wt = [&](std::size_t i) { return w.empty() ? 1.0 : w[i]; };
  std::vector<double> times;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] == 1.0) times.push_back(t[i]);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double ll = 0.0;
  for (double s : times) {
    double risk = 0.0, tied = 0.0, wsum = 0.0;
    int k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::exp(x.row(static_cast<Eigen::Index>(i)).dot(beta));
      if (t[i] >= s) risk += wt(i) * r;
      if (t[i] == s && d[i] == 1.0) {
        tied += wt(i) * r;
        wsum += wt(i);
        ll += wt(i) * x.row(static_cast<Eigen::Index>(i)).dot(beta);
        ++k;
      }
    }
    for (int j = 0; j < k; ++j) {
      const double denom = efron ? risk - (static_cast<double>(j) / k) * tied : risk;
      ll -= (wsum / k) * std::log(denom);
    }
  }
  return ll;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    dmax = std::max(dmax, std::fabs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return dmax;
}

/// Fixture generator: exponential times, independent censoring, N(0,1) covariates.
struct CoxFixture {
  Eigen::MatrixXd x;
  std::vector<double> t, d;
};

inline CoxFixture make_fixture(std::mt19937_64& rng, int n, int p, bool ties = false) {
  std::normal_distribution<double> z;
  std::exponential_distribution<double> e(1.0);
  CoxFixture f;
  f.x.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) f.x(i, j) = z(rng);
  Eigen::VectorXd beta = Eigen::VectorXd::LinSpaced(p, 0.5, -0.3);
  for (int i = 0; i < n; ++i) {
    const double ti = e(rng) / std::exp(f.x.row(i).dot(beta));
    const double ci = 2.0 * e(rng);
    double obs = std::min(ti, ci);
    if (ties) obs = std::ceil(obs * 4.0) / 4.0;
    f.t.push_back(obs);
    f.d.push_back(ti <= ci ? 1.0 : 0.0);
  }
  return f;
}

}  // namespace oracle
