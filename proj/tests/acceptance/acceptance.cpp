// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails. Tolerances are fixed below.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <boost/rational.hpp>

#include "hybridcox/hybridcox.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hybridcox;
using Q = boost::rational<long long>;

namespace {

constexpr double kBetaTol = 1e-6;            // criterion 1
constexpr double kCriterion1Seconds = 10.0;
constexpr double kGradientRelTol = 1e-5;     // criterion 2
constexpr double kRubinIdentityUlps = 4.0;   // criterion 3
constexpr double kResidualTolPerRow = 1e-6;  // criterion 5
constexpr double kCoverageLow = 92.5, kCoverageHigh = 97.5;  // criterion 6
constexpr double kCriterion6Seconds = 600.0;
constexpr double kCoverageFloor = 90.0;      // criterion 7 (b)
constexpr double kObservedBiasCeiling = 5.0;  // criterion 7 (d), percent
constexpr double kCriterion7Seconds = 2700.0;
constexpr double kRateTolerance = 0.01;      // criterion 8

// Criterion 7 scenario: z shifts the mean of x1 by two standard deviations
// per level, and missingness of z rises with x1 and falls with the event.
constexpr const char* kMarScenario = R"({
  "n": 500, "replicates": 300, "m": 10, "seed": 20240601,
  "design": {"beta": [0.4, 0.8, 0.7, -0.5], "x1_means": [-2.0, 0.0, 2.0]},
  "amputation": {"target": "z", "predictors": ["x1", "event"], "weights": [1, -1], "rate": 0.3},
  "methods": ["CC", "IPW", "MI_P", "MI_NP", "H1",
              {"method": "H2", "kappa": [0, 0.3, 0.5, 1]},
              {"method": "H3", "kappa": [0, 0.3, 0.5, 1]},
              {"method": "H4", "kappa": [0, 0.3, 0.5, 1]}]
})";

int failures = 0;

void report(int id, const std::string& title, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << title << " :: " << detail << std::endl;
  if (!ok) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

/// Fixtures for criteria 1 and 5: n in [8, 20], 1-2 covariates, distinct
/// times, with a maximum strictly inside the brute-force grid.
std::vector<oracle::CoxFixture> small_fixtures() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> size(8, 20), dims(1, 2);
  std::vector<oracle::CoxFixture> out;
  while (out.size() < 25) {
    const int n = size(rng), p = dims(rng);
    auto f = oracle::make_fixture(rng, n, p, false);
    if (std::count(f.d.begin(), f.d.end(), 1.0) < 3) continue;
    out.push_back(std::move(f));
  }
  return out;
}

/// Grid search over [-5, 5]^p, then Nelder-Mead and golden-section polish,
/// all on the textbook partial likelihood. Returns nullopt when the best grid
/// point is on the boundary (no finite maximum).
std::optional<Eigen::VectorXd> brute_force_beta(const oracle::CoxFixture& f) {
  const auto p = f.x.cols();
  auto ll = [&](const Eigen::VectorXd& b) { return oracle::cox_loglik(b, f.x, f.t, f.d, {}, false); };
  const int steps = p == 1 ? 201 : 101;
  const double lo = -5.0, h = 10.0 / (steps - 1);
  Eigen::VectorXd best(p), cur(p);
  double best_ll = -std::numeric_limits<double>::infinity();
  std::vector<int> idx(static_cast<std::size_t>(p), 0);
  std::vector<int> best_idx = idx;
  for (;;) {
    for (Eigen::Index j = 0; j < p; ++j) cur(j) = lo + h * idx[static_cast<std::size_t>(j)];
    const double v = ll(cur);
    if (v > best_ll) {
      best_ll = v;
      best = cur;
      best_idx = idx;
    }
    Eigen::Index j = 0;
    while (j < p && ++idx[static_cast<std::size_t>(j)] == steps) idx[static_cast<std::size_t>(j++)] = 0;
    if (j == p) break;
  }
  for (int i : best_idx)
    if (i == 0 || i == steps - 1) return std::nullopt;
  Eigen::VectorXd nm = oracle::nelder_mead_max(ll, best, h);
  return oracle::coordinate_polish(ll, nm);
}

// ---------------------------------------------------------------------------

void criterion1(const std::vector<oracle::CoxFixture>& fixtures) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int compared = 0, problems = 0;
  for (const auto& f : fixtures) {
    const auto oracle_beta = brute_force_beta(f);
    try {
      const CoxFit fit = fit_cox(f.x, f.t, f.d);
      if (!oracle_beta) {
        ++problems;
        continue;
      }
      worst = std::max(worst, (fit.beta - *oracle_beta).cwiseAbs().maxCoeff());
      ++compared;
    } catch (const SeparationError&) {
      // Agreement when the oracle also finds no interior maximum.
      if (oracle_beta) ++problems;
      else ++compared;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = problems == 0 && compared == 25 && worst <= kBetaTol && secs < kCriterion1Seconds;
  report(1, "Cox oracle equivalence", ok,
         "25 fixtures, max |dbeta| = " + fmt(worst) + " (tol " + fmt(kBetaTol) + "), disagreements " +
             std::to_string(problems) + ", " + fmt(secs) + " s");
}

void criterion2() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  double worst_cox = 0.0, worst_logit = 0.0, worst_multi = 0.0;
  auto rel = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
  };
  const auto f = oracle::make_fixture(rng, 60, 3, true);
  std::vector<double> w(60);
  for (auto& v : w) v = 0.5 + std::uniform_real_distribution<double>(0.0, 1.5)(rng);
  // Logistic / multinomial data.
  Eigen::MatrixXd xz = with_intercept(f.x);
  std::vector<double> yb(60);
  std::vector<int> ym(60);
  for (int i = 0; i < 60; ++i) {
    yb[static_cast<std::size_t>(i)] = f.d[static_cast<std::size_t>(i)];
    ym[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(f.t[static_cast<std::size_t>(i)] * 3)) % 3;
  }
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd b(3), g(4), t(8);
    for (auto* v : {&b, &g, &t})
      for (Eigen::Index j = 0; j < v->size(); ++j) (*v)(j) = 0.7 * z(rng);
    for (Ties ties : {Ties::breslow, Ties::efron}) {
      const auto fd = oracle::central_gradient(
          [&](const Eigen::VectorXd& v) { return log_partial_likelihood(v, f.x, f.t, f.d, w, ties); }, b);
      worst_cox = std::max(worst_cox, rel(score(b, f.x, f.t, f.d, w, ties), fd));
    }
    worst_logit = std::max(worst_logit, rel(logistic_score(g, xz, yb, w),
                                            oracle::central_gradient(
                                                [&](const Eigen::VectorXd& v) { return logistic_loglik(v, xz, yb, w); }, g)));
    worst_multi = std::max(worst_multi, rel(multinomial_score(t, xz, ym, 3, 0, w),
                                            oracle::central_gradient(
                                                [&](const Eigen::VectorXd& v) {
                                                  return multinomial_loglik(v, xz, ym, 3, 0, w);
                                                },
                                                t)));
  }
  const double worst = std::max({worst_cox, worst_logit, worst_multi});
  report(2, "Gradient checks", worst <= kGradientRelTol,
         "20 points; max rel err cox " + fmt(worst_cox) + ", logistic " + fmt(worst_logit) + ", multinomial " +
             fmt(worst_multi) + " (tol " + fmt(kGradientRelTol) + ")");
}

void criterion3() {
  const auto exact = rubin_combine<Q>({Q(9, 10), Q(11, 10)}, {Q(1, 25), Q(1, 25)});
  const bool hand_exact = exact.qbar == Q(1) && exact.t == Q(7, 100);
  Eigen::MatrixXd e(2, 1), v(2, 1);
  e << 0.9, 1.1;
  v << 0.04, 0.04;
  const PooledResult p = rubin_pool(e, v);
  const bool hand_double = p.qbar(0) == 1.0 && std::fabs(p.t(0) - 0.07) <= 2 * std::numeric_limits<double>::epsilon() * 0.07;

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> mdist(2, 50);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.001, 2.0);
  double worst_identity = 0.0, worst_components = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int m = mdist(rng);
    Eigen::MatrixXd est(m, 1), var(m, 1);
    for (int k = 0; k < m; ++k) {
      est(k, 0) = 3.0 * z(rng);
      var(k, 0) = u(rng);
    }
    const PooledResult r = rubin_pool(est, var);
    const double t = r.wbar(0) + (1.0 + 1.0 / m) * r.b(0);
    worst_identity = std::max(worst_identity, std::fabs(r.t(0) - t) / (std::numeric_limits<double>::epsilon() * t));
    // Independent components via long double two-pass sums.
    long double qbar = 0, wbar = 0, ss = 0;
    for (int k = 0; k < m; ++k) {
      qbar += est(k, 0);
      wbar += var(k, 0);
    }
    qbar /= m;
    wbar /= m;
    for (int k = 0; k < m; ++k) ss += (est(k, 0) - qbar) * (est(k, 0) - qbar);
    const long double tt = wbar + (1.0L + 1.0L / m) * ss / (m - 1);
    worst_components = std::max(worst_components, static_cast<double>(std::fabs(r.t(0) - tt) / tt));
  }
  const bool ok = hand_exact && hand_double && worst_identity <= kRubinIdentityUlps && worst_components <= 1e-13;
  report(3, "Rubin arithmetic", ok,
         std::string("hand example rational ") + (hand_exact ? "exact" : "WRONG") + ", double " +
             (hand_double ? "exact" : "WRONG") + "; 1000 random inputs: identity within " + fmt(worst_identity) +
             " ulp, components rel err " + fmt(worst_components));
}

void criterion4() {
  std::vector<double> pi;
  std::vector<std::uint8_t> r;
  for (int a = 1; a <= 99; ++a)
    for (std::uint8_t obs : {0, 1}) {
      pi.push_back(a / 100.0);
      r.push_back(obs);
    }
  int mismatches = 0, checked = 0;
  for (int kk = 0; kk <= 20; ++kk) {
    const double kappa = kk / 20.0;
    const WeightVector w = hybrid_weights(pi, r, kappa);
    for (std::size_t i = 0; i < pi.size(); ++i, ++checked) {
      const double expected = r[i] ? 1.0 / pi[i] : kappa * 1.0 + (1.0 - kappa) * (1.0 / (1.0 - pi[i]));
      if (w.w[i] != expected) ++mismatches;
    }
  }
  // Endpoints in closed form.
  const WeightVector w0 = hybrid_weights(pi, r, 0.0), w1 = hybrid_weights(pi, r, 1.0);
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (r[i]) continue;
    if (w0.w[i] != 1.0 / (1.0 - pi[i])) ++mismatches;
    if (w1.w[i] != 1.0) ++mismatches;
  }
  report(4, "Hybrid weight formula", mismatches == 0,
         std::to_string(checked) + " grid cells (pi 0.01..0.99, R in {0,1}, kappa 0..1 step 0.05) plus endpoints, " +
             std::to_string(mismatches) + " mismatches");
}

void criterion5(const std::vector<oracle::CoxFixture>& small) {
  std::vector<oracle::CoxFixture> all = small;
  std::mt19937_64 rng(55);
  for (int k = 0; k < 10; ++k) all.push_back(oracle::make_fixture(rng, 200, 3, k % 2 == 0));
  double worst = 0.0;
  int fitted = 0;
  for (const auto& f : all) {
    for (Ties ties : {Ties::breslow, Ties::efron}) {
      CoxOptions opt;
      opt.ties = ties;
      CoxFit fit;
      try {
        fit = fit_cox(f.x, f.t, f.d, {}, opt);
      } catch (const SeparationError&) {
        continue;
      }
      ++fitted;
      const ResidualSet rs = residuals(fit, f.x, f.t, f.d);
      const double n = static_cast<double>(f.t.size());
      worst = std::max(worst, rs.schoenfeld.colwise().sum().cwiseAbs().maxCoeff() / n);
      worst = std::max(worst, std::fabs(rs.martingale.sum()) / n);
    }
  }
  report(5, "Residual identities", worst <= kResidualTolPerRow,
         std::to_string(fitted) + " fits; max |sum|/n = " + fmt(worst) + " (tol " + fmt(kResidualTolPerRow) + ")");
}

void criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  SimConfig cfg = SimConfig::from_json(nlohmann::json::parse(
      R"({"n": 500, "replicates": 300, "seed": 20240602, "amputation": {"rate": 0.0}, "methods": ["CC"]})"));
  const SimulationResult res = run_simulation(cfg, 1);
  bool ok = true;
  std::string detail = "coverage";
  for (const auto& row : res.rows) {
    ok = ok && row.n_ok == 300 && row.coverage >= kCoverageLow && row.coverage <= kCoverageHigh;
    detail += " " + row.coefficient + "=" + fmt(row.coverage, 4) + "%";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kCriterion6Seconds;
  report(6, "Null-coverage calibration", ok, detail + "; " + fmt(secs) + " s");
}

void criterion7() {
  const auto t0 = std::chrono::steady_clock::now();
  const SimConfig cfg = SimConfig::from_json(nlohmann::json::parse(kMarScenario));
  const SimulationResult res = run_simulation(cfg, 1);
  const double secs = seconds_since(t0);

  auto find = [&](const std::string& method, std::optional<double> kappa, const std::string& coef) -> const MetricsRow& {
    for (const auto& r : res.rows)
      if (r.method == method && r.kappa == kappa && r.coefficient == coef) return r;
    throw std::runtime_error("missing row " + method + " " + coef);
  };
  const std::vector<std::string> amputed{"z[b]", "z[c]"}, observed{"x1", "x2"};
  const std::vector<std::string> hybrids{"H2", "H3", "H4"};
  const std::vector<double> grid{0.0, 0.3, 0.5, 1.0};

  // (a) CC bias on z exceeds every MI/hybrid at kappa in {0.3, 0.5}.
  bool a = true;
  std::string a_detail;
  for (const auto& c : amputed) {
    const double cc = std::fabs(*find("CC", std::nullopt, c).relative_bias);
    double worst = 0.0;
    for (const auto& r : res.rows) {
      if (r.coefficient != c || r.method == "CC") continue;
      if (r.kappa && *r.kappa != 0.3 && *r.kappa != 0.5) continue;
      worst = std::max(worst, std::fabs(*r.relative_bias));
    }
    a = a && cc > worst;
    a_detail += c + " CC " + fmt(cc) + "% vs max " + fmt(worst) + "%; ";
  }
  // (b) hybrid coverage at kappa in {0.3, 0.5}.
  bool b = true;
  double min_cov = 100.0;
  for (const auto& h : hybrids)
    for (double k : {0.3, 0.5})
      for (const auto& r : res.rows)
        if (r.method == h && r.kappa == k) min_cov = std::min(min_cov, r.coverage);
  b = min_cov >= kCoverageFloor;
  // (c) CI width non-increasing in kappa, wider at 0 than at 1.
  bool c = true;
  std::string c_detail;
  for (const auto& h : hybrids)
    for (const auto& coef : res.coefficients) {
      double prev = std::numeric_limits<double>::infinity();
      for (double k : grid) {
        const double w = find(h, k, coef).mean_ci_width;
        if (w > prev) {
          c = false;
          c_detail += h + "/" + coef + " rises at kappa " + fmt(k) + "; ";
        }
        prev = w;
      }
      if (!(find(h, 0.0, coef).mean_ci_width > find(h, 1.0, coef).mean_ci_width)) c = false;
    }
  // (d) fully observed covariates, every MI/hybrid run.
  double worst_d = 0.0;
  std::string worst_d_at;
  for (const auto& r : res.rows) {
    if (r.method == "CC") continue;
    if (std::find(observed.begin(), observed.end(), r.coefficient) == observed.end()) continue;
    const double v = std::fabs(*r.relative_bias);
    if (v > worst_d) {
      worst_d = v;
      worst_d_at = r.method + (r.kappa ? " kappa " + fmt(*r.kappa) : std::string()) + " " + r.coefficient;
    }
  }
  const bool d = worst_d <= kObservedBiasCeiling;
  const bool ok = a && b && c && d && secs < kCriterion7Seconds;
  report(7, "MAR-scenario trend reproduction", ok,
         std::string("(a) ") + (a ? "ok" : "fail") + " [" + a_detail + "] (b) " + (b ? "ok" : "fail") +
             " min coverage " + fmt(min_cov, 4) + "% (c) " + (c ? "ok" : "fail " + c_detail) + " (d) " +
             (d ? "ok" : "fail") + " max |rel bias| " + fmt(worst_d) + "% at " + worst_d_at + "; " + fmt(secs) +
             " s");

  std::ofstream out(fs::path(TEST_WORK_DIR) / "criterion7_metrics.csv");
  write_metrics_csv(out, res.rows);
}

void criterion8() {
  Rng rng(8);
  const Dataset d = generate_synthetic(SyntheticDesign{}, 10000, rng);
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const AmputationResult r =
        ampute_mar(d, AmputationPlan{"z", {"x1", "event"}, 0.3, {1.0, -1.0}, seed, AmputationSampling::systematic});
    const double rate = static_cast<double>(std::count(r.observed.begin(), r.observed.end(), std::uint8_t{0})) / 10000.0;
    worst = std::max(worst, std::fabs(rate - 0.3));
  }
  report(8, "Amputation calibration", worst <= kRateTolerance,
         "n = 10000, 20 seeds, max |rate - 0.30| = " + fmt(worst) + " (tol " + fmt(kRateTolerance) + ")");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion9() {
  const fs::path work = fs::path(TEST_WORK_DIR) / "determinism";
  fs::remove_all(work);
  fs::create_directories(work);
  // Small samples: a few replicates fail on propensity separation, so the trace
  // also carries failure records.
  std::ofstream(work / "config.json") << R"({"n": 200, "replicates": 12, "m": 4, "seed": 99, "max_failure_fraction": 0.5,
    "methods": ["CC", "IPW", "MI_P", "MI_NP", "H1", {"method": "H2", "kappa": [0, 0.5]}, {"method": "H3", "kappa": 0.3},
                {"method": "H4", "kappa": 1}]})";
  bool ran = true;
  for (int workers : {1, 4}) {
    const std::string cmd = std::string(HYBRIDCOX_CLI) + " simulate --config " + (work / "config.json").string() +
                            " --workers " + std::to_string(workers) + " --output-dir " +
                            (work / ("w" + std::to_string(workers))).string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    ran = ran && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  }
  int compared = 0, differ = 0;
  if (ran)
    for (const auto& entry : fs::directory_iterator(work / "w1")) {
      ++compared;
      if (slurp(entry.path()) != slurp(work / "w4" / entry.path().filename())) ++differ;
    }
  report(9, "Determinism across worker counts", ran && compared >= 6 && differ == 0,
         std::to_string(compared) + " output files compared for workers 1 vs 4, " + std::to_string(differ) + " differ");
}

void criterion10() {
  // t: 1 2 2+ 3 4+ 5 -> S = 5/6, 2/3, 4/9, 0 ; H = 1/6, 11/30, 7/10, 17/10.
  const std::vector<double> t{1, 2, 2, 3, 4, 5}, e{1, 1, 0, 1, 0, 1};
  const auto km = kaplan_meier<Q>(t, e);
  const auto na = nelson_aalen<Q>(t, e);
  bool ok = km.values == std::vector<Q>{Q(5, 6), Q(2, 3), Q(4, 9), Q(0)} &&
            na.values == std::vector<Q>{Q(1, 6), Q(11, 30), Q(7, 10), Q(17, 10)};
  // Ties: 2 2 2+ 3 -> S = 1/2, 0 ; H = 1/2, 3/2.
  const std::vector<double> t2{2, 2, 2, 3}, e2{1, 1, 0, 1};
  ok = ok && kaplan_meier<Q>(t2, e2).values == std::vector<Q>{Q(1, 2), Q(0)} &&
       nelson_aalen<Q>(t2, e2).values == std::vector<Q>{Q(1, 2), Q(3, 2)};
  // Censoring before the first event: 1+ 2 3 3 4+ -> S = 3/4, 1/4 ; H = 1/4, 11/12.
  const std::vector<double> t3{1, 2, 3, 3, 4}, e3{0, 1, 1, 1, 0};
  ok = ok && kaplan_meier<Q>(t3, e3).values == std::vector<Q>{Q(3, 4), Q(1, 4)} &&
       nelson_aalen<Q>(t3, e3).values == std::vector<Q>{Q(1, 4), Q(11, 12)};
  report(10, "KM/NA hand oracles", ok, "three rational fixtures compared exactly");
}

}  // namespace

int main() {
  fs::create_directories(TEST_WORK_DIR);
  std::cout << "hybridcox " << kVersion << " acceptance" << std::endl;
  const auto fixtures = small_fixtures();
  const std::vector<std::function<void()>> steps{
      [&] { criterion1(fixtures); }, criterion2, criterion3, criterion4, [&] { criterion5(fixtures); },
      criterion6,                    criterion7, criterion8, criterion9, criterion10};
  for (std::size_t k = 0; k < steps.size(); ++k) {
    try {
      steps[k]();
    } catch (const std::exception& e) {
      report(static_cast<int>(k + 1), "criterion", false, std::string("exception: ") + e.what());
    }
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
