#include <catch2/catch_amalgamated.hpp>

#include "hybridcox/cox.hpp"
#include "oracles.hpp"

using namespace hybridcox;

namespace {

std::vector<double> random_weights(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<double> w(n);
  for (auto& v : w) v = u(rng);
  return w;
}

}  // namespace

TEST_CASE("partial likelihood matches the textbook product", "[coxfit]") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const auto f = oracle::make_fixture(rng, 40, 2, true);
    const auto w = random_weights(rng, 40);
    Eigen::VectorXd b(2);
    b << 0.3 * rep - 1.0, 0.2;
    for (Ties ties : {Ties::breslow, Ties::efron}) {
      const bool efron = ties == Ties::efron;
      CHECK(log_partial_likelihood(b, f.x, f.t, f.d, {}, ties) ==
            Catch::Approx(oracle::cox_loglik(b, f.x, f.t, f.d, {}, efron)).epsilon(1e-12));
      CHECK(log_partial_likelihood(b, f.x, f.t, f.d, w, ties) ==
            Catch::Approx(oracle::cox_loglik(b, f.x, f.t, f.d, w, efron)).epsilon(1e-12));
    }
  }
}

TEST_CASE("score and information match finite differences", "[coxfit]") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto f = oracle::make_fixture(rng, 50, 3, rep % 2 == 0);
    const auto w = random_weights(rng, 50);
    std::normal_distribution<double> z;
    Eigen::VectorXd b(3);
    for (Eigen::Index j = 0; j < 3; ++j) b(j) = z(rng);
    for (Ties ties : {Ties::breslow, Ties::efron}) {
      auto ll = [&](const Eigen::VectorXd& t) { return log_partial_likelihood(t, f.x, f.t, f.d, w, ties); };
      const Eigen::VectorXd g = score(b, f.x, f.t, f.d, w, ties);
      CHECK((g - oracle::central_gradient(ll, b)).norm() <= 1e-6 * std::max(1.0, g.norm()));
      const Eigen::MatrixXd info = information(b, f.x, f.t, f.d, w, ties);
      for (Eigen::Index j = 0; j < 3; ++j) {
        auto gj = [&](const Eigen::VectorXd& t) { return score(t, f.x, f.t, f.d, w, ties)(j); };
        CHECK((info.row(j).transpose() + oracle::central_gradient(gj, b)).norm() <= 1e-6 * info.norm());
      }
    }
  }
}

TEST_CASE("fit_cox agrees with Nelder-Mead on tied data", "[coxfit]") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const auto f = oracle::make_fixture(rng, 30, 2, true);
    for (Ties ties : {Ties::breslow, Ties::efron}) {
      CoxOptions opt;
      opt.ties = ties;
      const CoxFit fit = fit_cox(f.x, f.t, f.d, {}, opt);
      REQUIRE(fit.converged);
      auto ll = [&](const Eigen::VectorXd& b) { return oracle::cox_loglik(b, f.x, f.t, f.d, {}, ties == Ties::efron); };
      Eigen::VectorXd nm = oracle::nelder_mead_max(ll, Eigen::VectorXd::Zero(2));
      nm = oracle::coordinate_polish(ll, nm);
      CHECK((fit.beta - nm).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("integer weights equal row replication", "[coxfit]") {
  std::mt19937_64 rng(4);
  const auto f = oracle::make_fixture(rng, 25, 2, false);
  std::vector<double> w(25, 1.0);
  Eigen::MatrixXd xr(28, 2);
  xr.topRows(25) = f.x;
  std::vector<double> tr = f.t, dr = f.d;
  for (int i : {3, 7, 11}) {
    w[static_cast<std::size_t>(i)] = 2.0;
    xr.row(25 + (i == 3 ? 0 : i == 7 ? 1 : 2)) = f.x.row(i);
    tr.push_back(f.t[static_cast<std::size_t>(i)]);
    dr.push_back(f.d[static_cast<std::size_t>(i)]);
  }
  CoxOptions opt;
  opt.ties = Ties::breslow;
  const CoxFit a = fit_cox(f.x, f.t, f.d, w, opt);
  const CoxFit b = fit_cox(xr, tr, dr, {}, opt);
  CHECK((a.beta - b.beta).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((a.model_covariance - b.model_covariance).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("robust variance equals the infinitesimal jackknife", "[coxfit]") {
  // dbeta/dw_i by central differences of refits; V = sum_i w_i^2 D_i D_i'.
  std::mt19937_64 rng(5);
  struct Case {
    bool ties;
    Ties method;
    bool weighted;
  };
  for (const Case c : {Case{false, Ties::efron, false}, Case{false, Ties::efron, true}, Case{true, Ties::breslow, false},
                       Case{true, Ties::breslow, true}}) {
    const auto f = oracle::make_fixture(rng, 30, 2, c.ties);
    std::vector<double> w = c.weighted ? random_weights(rng, 30) : std::vector<double>(30, 1.0);
    CoxOptions opt;
    opt.ties = c.method;
    opt.robust = true;
    opt.score_tolerance = 1e-12;
    opt.relative_tolerance = 1e-15;
    const CoxFit fit = fit_cox(f.x, f.t, f.d, w, opt);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
    const double h = 1e-5;
    for (std::size_t i = 0; i < 30; ++i) {
      auto wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const Eigen::VectorXd d = (fit_cox(f.x, f.t, f.d, wp, opt).beta - fit_cox(f.x, f.t, f.d, wm, opt).beta) / (2 * h);
      v += w[i] * w[i] * d * d.transpose();
    }
    CHECK((*fit.robust_covariance - v).cwiseAbs().maxCoeff() <= 1e-6 * v.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("residual sums vanish at the estimate", "[coxfit]") {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 6; ++rep) {
    const auto f = oracle::make_fixture(rng, 80, 2, rep % 2 == 1);
    for (Ties ties : {Ties::breslow, Ties::efron}) {
      CoxOptions opt;
      opt.ties = ties;
      const CoxFit fit = fit_cox(f.x, f.t, f.d, {}, opt);
      const ResidualSet rs = residuals(fit, f.x, f.t, f.d);
      CHECK(rs.schoenfeld.colwise().sum().cwiseAbs().maxCoeff() <= 1e-6 * 80);
      CHECK(std::fabs(rs.martingale.sum()) <= 1e-6 * 80);
      CHECK(std::is_sorted(rs.event_times.begin(), rs.event_times.end()));
    }
  }
}

TEST_CASE("martingale residuals on a hand example", "[coxfit]") {
  // One binary covariate at beta = 0 reduces to the Nelson-Aalen increments.
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 0, 1;
  const std::vector<double> t{1, 2, 3, 4};
  const std::vector<double> d{1, 1, 0, 1};
  const CoxFit fit = fit_cox(x, t, d);
  const ResidualSet rs = residuals(fit, x, t, d);
  // At beta_hat the residuals are 1 - exp(eta) H0; check against a direct Breslow computation.
  const double b = fit.beta(0);
  const double r1 = 1.0 + std::exp(b) + 1.0 + std::exp(b), r2 = std::exp(b) + 1.0 + std::exp(b), r4 = std::exp(b);
  const double h1 = 1.0 / r1, h2 = h1 + 1.0 / r2, h4 = h2 + 1.0 / r4;
  CHECK(rs.martingale(0) == Catch::Approx(1.0 - h1));
  CHECK(rs.martingale(1) == Catch::Approx(1.0 - std::exp(b) * h2));
  CHECK(rs.martingale(2) == Catch::Approx(-h2));
  CHECK(rs.martingale(3) == Catch::Approx(1.0 - std::exp(b) * h4));
}

TEST_CASE("PH score test equals the brute-force extended-model test", "[coxfit]") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 4; ++rep) {
    const auto f = oracle::make_fixture(rng, 60, 2, false);
    const CoxFit fit = fit_cox(f.x, f.t, f.d);
    for (TimeTransform tr : {TimeTransform::identity, TimeTransform::km, TimeTransform::rank}) {
      // g(t) at each event time.
      std::vector<double> ev;
      for (std::size_t i = 0; i < f.t.size(); ++i)
        if (f.d[i] == 1.0) ev.push_back(f.t[i]);
      std::sort(ev.begin(), ev.end());
      auto g = [&](double s) {
        if (tr == TimeTransform::identity) return s;
        if (tr == TimeTransform::rank) return static_cast<double>(std::lower_bound(ev.begin(), ev.end(), s) - ev.begin() + 1);
        double surv = 1.0;
        for (double e : ev) {
          if (e >= s) break;
          int at_risk = 0;
          for (double ti : f.t) at_risk += ti >= e;
          surv *= 1.0 - 1.0 / at_risk;
        }
        return 1.0 - surv;
      };
      // Extended log partial likelihood in (beta, gamma), no ties.
      auto ll = [&](const Eigen::VectorXd& th) {
        const Eigen::VectorXd b = th.head(2), gam = th.tail(2);
        double out = 0.0;
        for (std::size_t i = 0; i < f.t.size(); ++i) {
          if (f.d[i] != 1.0) continue;
          const double gi = g(f.t[i]);
          double denom = 0.0;
          for (std::size_t j = 0; j < f.t.size(); ++j)
            if (f.t[j] >= f.t[i]) denom += std::exp(f.x.row(static_cast<Eigen::Index>(j)).dot(b + gi * gam));
          out += f.x.row(static_cast<Eigen::Index>(i)).dot(b + gi * gam) - std::log(denom);
        }
        return out;
      };
      Eigen::VectorXd th0(4);
      th0 << fit.beta, 0.0, 0.0;
      const Eigen::VectorXd u = oracle::central_gradient(ll, th0, 1e-5);
      Eigen::MatrixXd hess(4, 4);
      for (Eigen::Index j = 0; j < 4; ++j)
        hess.row(j) = oracle::central_gradient([&](const Eigen::VectorXd& s) { return oracle::central_gradient(ll, s, 1e-5)(j); },
                                               th0, 1e-4)
                          .transpose();
      const Eigen::MatrixXd vinv = (-hess).inverse();
      const Eigen::Vector2d ug = u.tail(2);
      const double global = ug.dot(vinv.bottomRightCorner(2, 2) * ug);
      const PhTestResult res = ph_test(fit, f.x, f.t, f.d, {}, tr);
      CHECK(res.global.chi_square == Catch::Approx(global).epsilon(1e-4));
      CHECK(res.global.df == 2);
      // One-term test: only g(t) * x_1 is added, so the block excludes gamma_2.
      const Eigen::Matrix3d h3 = (-hess).topLeftCorner(3, 3);
      const double single = ug(0) * ug(0) * h3.inverse()(2, 2);
      CHECK(res.terms[0].chi_square == Catch::Approx(single).epsilon(1e-4));
    }
  }
}

TEST_CASE("grouped PH terms have multi-df rows", "[coxfit]") {
  std::mt19937_64 rng(8);
  const auto f = oracle::make_fixture(rng, 60, 3, false);
  CoxFit fit = fit_cox(f.x, f.t, f.d);
  const std::vector<EncodedTerm> groups{{"ab", 0, 2, {}}, {"c", 2, 1, {}}};
  const PhTestResult grouped = ph_test(fit, f.x, f.t, f.d, {}, TimeTransform::km, groups);
  const PhTestResult single = ph_test(fit, f.x, f.t, f.d, {}, TimeTransform::km);
  REQUIRE(grouped.terms.size() == 2);
  CHECK(grouped.terms[0].df == 2);
  CHECK(grouped.terms[1].chi_square == Catch::Approx(single.terms[2].chi_square).epsilon(1e-12));
  CHECK(grouped.global.chi_square == Catch::Approx(single.global.chi_square).epsilon(1e-12));
}

TEST_CASE("fit_cox reports degenerate problems", "[coxfit]") {
  Eigen::MatrixXd x(6, 1);
  x << 0, 0, 0, 1, 1, 1;
  const std::vector<double> t{1, 2, 3, 4, 5, 6};
  SECTION("monotone likelihood") {
    // Every event happens in the x = 0 group before any x = 1 subject leaves.
    const std::vector<double> d{1, 1, 1, 0, 0, 0};
    CHECK_THROWS_AS(fit_cox(x, t, d), SeparationError);
  }
  SECTION("no events") {
    const std::vector<double> d(6, 0.0);
    CHECK_THROWS_AS(fit_cox(x, t, d), Error);
  }
  SECTION("constant covariate") {
    Eigen::MatrixXd c = Eigen::MatrixXd::Ones(6, 1);
    const std::vector<double> d{1, 0, 1, 0, 1, 1};
    CHECK_THROWS_AS(fit_cox(c, t, d), RankDeficiencyError);
  }
}
