// Command-line front end: fit, ampute, impute, analyze, diagnose, simulate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hybridcox/hybridcox.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hybridcox;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;

/// Thrown for problems found before any computation starts (exit code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Config file contents, unwrapping a manifest if one is given.
json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config parse error in " + path + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  if (j.contains("subcommand") && j.contains("config")) return j.at("config");
  return j;
}

/// Flag values set on the command line override the config file.
class Resolver {
 public:
  Resolver(CLI::App* app, std::string* config_path) : app_(app), config_path_(config_path) {}

  template <class T>
  void add(const std::string& flag, const std::string& key, T& target, const std::string& help) {
    auto* opt = app_->add_option(flag, target, help);
    bindings_.push_back([this, opt, key, &target](json& cfg) {
      if (opt->count() > 0) cfg[key] = target;
      else if (cfg.contains(key)) target = cfg.at(key).get<T>();
    });
  }

  void add_flag(const std::string& flag, const std::string& key, bool& target, const std::string& help) {
    auto* opt = app_->add_flag(flag, target, help);
    bindings_.push_back([opt, key, &target](json& cfg) {
      if (opt->count() > 0) cfg[key] = target;
      else if (cfg.contains(key)) target = cfg.at(key).get<bool>();
    });
  }

  /// Merges config and flags; returns the resolved config.
  json resolve() {
    json cfg = load_config(*config_path_);
    try {
      for (auto& b : bindings_) b(cfg);
    } catch (const json::exception& e) {
      throw UsageError(std::string("bad config value: ") + e.what());
    }
    return cfg;
  }

 private:
  CLI::App* app_;
  std::string* config_path_;
  std::vector<std::function<void(json&)>> bindings_;
};

Schema schema_for(const std::string& input, const std::string& schema_path) {
  if (!schema_path.empty()) {
    if (!fs::exists(schema_path)) throw UsageError("schema file not found: " + schema_path);
    return Schema::load(schema_path);
  }
  const std::string sidecar = input + ".schema.json";
  if (fs::exists(sidecar)) return Schema::load(sidecar);
  std::ifstream in(input);
  return infer_schema(in);
}

Dataset read_input(const std::string& input, const std::string& schema_path) {
  if (input.empty()) throw UsageError("--input is required");
  if (!fs::exists(input)) throw UsageError("input file not found: " + input);
  return load_dataset(input, schema_for(input, schema_path));
}

void write_manifest(const std::string& path, const std::string& subcommand, std::uint64_t seed, const json& cfg) {
  json m = {{"version", kVersion}, {"subcommand", subcommand}, {"seed", seed}, {"config", cfg}};
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << m.dump(2) << '\n';
}

void announce(const std::string& subcommand, std::uint64_t seed, const json& cfg) {
  std::cerr << "hybridcox " << kVersion << ' ' << subcommand << "\nseed: " << seed << "\nconfig: " << cfg.dump()
            << '\n';
}

/// Writes to `path`, or stdout when empty.
template <class F>
void emit(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write(out);
}

std::vector<std::string> default_covariates(const Dataset& d, const std::vector<std::string>& given,
                                            const std::string& exclude = {}) {
  if (!given.empty()) {
    for (const auto& c : given)
      if (!d.find(c)) throw UsageError("unknown covariate: " + c);
    return given;
  }
  std::vector<std::string> out;
  for (const auto& c : d.covariate_names())
    if (c != exclude) out.push_back(c);
  return out;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string input, schema, output, weights, ties = "efron";
  std::vector<std::string> covariates;
  bool robust = false;
  double level = 0.95;
};

int run_fit(const FitArgs& a, const json& cfg) {
  const Dataset d = read_input(a.input, a.schema);
  const Ties ties = parse_ties(a.ties);
  const auto covs = default_covariates(d, a.covariates, a.weights);
  std::vector<double> w;
  if (!a.weights.empty()) {
    if (!d.find(a.weights)) throw UsageError("unknown weights column: " + a.weights);
    const Column& c = d.column(a.weights);
    if (c.kind != ColumnKind::continuous || c.any_missing())
      throw UsageError("weights column must be continuous and fully observed");
    w = c.values;
  }
  announce("fit", 0, cfg);
  const DesignMatrix dm = encode(d, covs);
  CoxOptions opt;
  opt.ties = ties;
  opt.robust = a.robust;
  const CoxFit fit = fit_cox(dm, d, w, opt);
  const double z = stats::normal_quantile(0.5 + a.level / 2.0);
  emit(a.output, [&](std::ostream& out) {
    out << "name,beta,hr,se,robust_se,ci_lower,ci_upper,p\n";
    const Eigen::VectorXd se = fit.model_se();
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
      const double rse = fit.robust_covariance ? std::sqrt((*fit.robust_covariance)(j, j)) : 0.0;
      const double s = fit.robust_covariance ? rse : se(j);
      out << fit.names[static_cast<std::size_t>(j)] << ',' << fixed6(fit.beta(j)) << ',' << fixed6(std::exp(fit.beta(j)))
          << ',' << fixed6(se(j)) << ',' << (fit.robust_covariance ? fixed6(rse) : std::string()) << ','
          << fixed6(std::exp(fit.beta(j) - z * s)) << ',' << fixed6(std::exp(fit.beta(j) + z * s)) << ','
          << fixed6(stats::normal_two_sided_p(fit.beta(j) / s)) << '\n';
    }
  });
  if (!a.output.empty()) write_manifest(a.output + ".manifest.json", "fit", 0, cfg);
  return 0;
}

// ---------------------------------------------------------------------------

struct AmputeArgs {
  std::string input, schema, output, target, sampling = "systematic";
  std::vector<std::string> predictors;
  std::vector<double> weights;
  double rate = 0.3;
  std::uint64_t seed = kDefaultSeed;
};

int run_ampute(const AmputeArgs& a, const json& cfg) {
  if (a.output.empty()) throw UsageError("--output is required");
  if (a.target.empty()) throw UsageError("--target is required");
  const Dataset d = read_input(a.input, a.schema);
  AmputationPlan plan;
  plan.target = a.target;
  plan.predictors = a.predictors;
  if (plan.predictors.empty())
    for (const auto& c : d.covariate_names())
      if (c != a.target) plan.predictors.push_back(c);
  plan.weights = a.weights;
  plan.rate = a.rate;
  plan.seed = a.seed;
  if (a.sampling == "systematic") plan.sampling = AmputationSampling::systematic;
  else if (a.sampling == "bernoulli") plan.sampling = AmputationSampling::bernoulli;
  else throw UsageError("unknown sampling: " + a.sampling);
  try {
    plan.validate(d);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  announce("ampute", a.seed, cfg);
  const AmputationResult res = ampute_mar(d, plan);
  std::vector<int> r(res.observed.begin(), res.observed.end());
  write_csv(a.output, res.data, {{"R", r}});
  Schema s = Schema::of(res.data);
  s.add("R", std::nullopt);
  std::ofstream(a.output + ".schema.json") << s.to_json().dump(2) << '\n';
  write_manifest(a.output + ".manifest.json", "ampute", a.seed, cfg);
  std::cerr << "missing: " << std::count(r.begin(), r.end(), 0) << " of " << r.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ImputeArgs {
  std::string input, schema, output_dir, engine = "parametric";
  int m = 10;
  std::uint64_t seed = kDefaultSeed;
};

int run_impute(const ImputeArgs& a, const json& cfg) {
  if (a.output_dir.empty()) throw UsageError("--output-dir is required");
  if (a.m < 1) throw UsageError("--m must be >= 1");
  Engine engine;
  try {
    engine = parse_engine(a.engine);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  const Dataset d = read_input(a.input, a.schema);
  announce("impute", a.seed, cfg);
  const ImputationSet set = engine == Engine::parametric ? impute_parametric(d, a.m, a.seed)
                                                         : impute_nonparametric(d, a.m, a.seed);
  fs::create_directories(a.output_dir);
  json prov = json::array();
  for (std::size_t k = 0; k < set.size(); ++k) {
    const std::string name = "imputed_" + std::to_string(k + 1) + ".csv";
    write_csv((fs::path(a.output_dir) / name).string(), set.datasets[k]);
    std::ofstream((fs::path(a.output_dir) / (name + ".schema.json")).string())
        << Schema::of(set.datasets[k]).to_json().dump(2) << '\n';
    prov.push_back({{"file", name},
                    {"engine", std::string(to_string(set.provenance[k].engine))},
                    {"index", set.provenance[k].index},
                    {"seed", set.provenance[k].seed}});
  }
  json manifest_cfg = cfg;
  manifest_cfg["provenance"] = prov;
  manifest_cfg["target"] = set.target;
  manifest_cfg["predictors"] = set.predictor_names;
  manifest_cfg["augmented"] = set.augmented;
  write_manifest((fs::path(a.output_dir) / "manifest.json").string(), "impute", a.seed, manifest_cfg);
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  std::string input, schema, output, method, ties = "efron", variance = "auto";
  std::vector<std::string> covariates, propensity;
  std::vector<double> truncation{0.01, 0.99};
  double kappa = -1.0;
  double level = 0.95;
  int m = 10;
  int m1 = -1;
  std::uint64_t seed = kDefaultSeed;
};

int run_analyze(const AnalyzeArgs& a, const json& cfg) {
  if (a.method.empty()) throw UsageError("--method is required");
  MethodSpec spec;
  try {
    spec.kind = parse_method(a.method);
    spec.m = a.m;
    if (cfg.contains("kappa")) spec.kappa = a.kappa;
    if (cfg.contains("m1")) spec.m1 = a.m1;
    spec.ties = parse_ties(a.ties);
    if (a.variance == "robust") spec.robust = true;
    else if (a.variance == "model") spec.robust = false;
    else if (a.variance != "auto") throw InputError("--variance must be auto, robust or model");
    if (a.truncation.size() != 2) throw InputError("--truncation takes two values");
    spec.bounds = {a.truncation[0], a.truncation[1]};
    spec.covariates = a.covariates;
    spec.propensity_predictors = a.propensity;
    spec.level = a.level;
    spec.validate();
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  const Dataset d = read_input(a.input, a.schema);
  announce("analyze", a.seed, cfg);
  const MethodResult r = run_method(d, spec, a.seed);
  const auto hrs = hazard_ratios(r);
  emit(a.output, [&](std::ostream& out) {
    out << "method,kappa,statistic";
    for (const auto& h : hrs) out << ',' << h.name;
    out << '\n';
    const std::string kap = r.kappa ? fixed6(*r.kappa) : std::string();
    auto row = [&](const char* stat, auto get) {
      out << r.label() << ',' << kap << ',' << stat;
      for (const auto& h : hrs) out << ',' << fixed6(get(h));
      out << '\n';
    };
    row("HR", [](const HazardRatio& h) { return h.hr; });
    row("CI lower", [](const HazardRatio& h) { return h.lower; });
    row("CI upper", [](const HazardRatio& h) { return h.upper; });
  });
  if (!a.output.empty()) {
    json m = cfg;
    m["n_used"] = r.n_used;
    m["robust_variance"] = r.robust_variance;
    json prov = json::array();
    for (const auto& p : r.provenance)
      prov.push_back({{"engine", std::string(to_string(p.engine))}, {"index", p.index}, {"seed", p.seed}});
    m["provenance"] = prov;
    write_manifest(a.output + ".manifest.json", "analyze", a.seed, m);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  std::string input, schema, output_dir, ties = "efron", transform = "km", group;
  std::vector<std::string> covariates;
  bool per_column = false;
};

int run_diagnose(const DiagnoseArgs& a, const json& cfg) {
  if (a.output_dir.empty()) throw UsageError("--output-dir is required");
  const Dataset d = read_input(a.input, a.schema);
  TimeTransform transform;
  Ties ties;
  try {
    transform = parse_time_transform(a.transform);
    ties = parse_ties(a.ties);
  } catch (const InputError& e) {
    throw UsageError(e.what());
  }
  if (!a.group.empty() && (!d.find(a.group) || d.column(a.group).kind != ColumnKind::categorical))
    throw UsageError("--group must name a categorical column");
  announce("diagnose", 0, cfg);
  fs::create_directories(a.output_dir);
  const auto dir = fs::path(a.output_dir);
  const auto covs = default_covariates(d, a.covariates);
  const DesignMatrix dm = encode(d, covs);
  CoxOptions opt;
  opt.ties = ties;
  const CoxFit fit = fit_cox(dm, d, {}, opt);

  const PhTestResult ph =
      ph_test(fit, dm.x, d.times(), d.events(), {}, transform, a.per_column ? std::vector<EncodedTerm>{} : dm.terms);
  emit((dir / "ph_test.csv").string(), [&](std::ostream& out) {
    out << "term,chisq,df,p\n";
    for (const auto& r : ph.terms) out << r.name << ',' << fixed6(r.chi_square) << ',' << r.df << ',' << fixed6(r.p_value) << '\n';
    out << "GLOBAL," << fixed6(ph.global.chi_square) << ',' << ph.global.df << ',' << fixed6(ph.global.p_value) << '\n';
  });

  const ResidualSet rs = residuals(fit, dm.x, d.times(), d.events());
  emit((dir / "schoenfeld.csv").string(), [&](std::ostream& out) {
    out << "time";
    for (const auto& n : dm.names) out << ',' << n;
    out << '\n';
    for (Eigen::Index i = 0; i < rs.schoenfeld.rows(); ++i) {
      out << fixed6(rs.event_times[static_cast<std::size_t>(i)]);
      for (Eigen::Index j = 0; j < rs.schoenfeld.cols(); ++j) out << ',' << fixed6(rs.schoenfeld(i, j));
      out << '\n';
    }
  });
  emit((dir / "martingale.csv").string(), [&](std::ostream& out) {
    out << "row,martingale\n";
    for (Eigen::Index i = 0; i < rs.martingale.size(); ++i) out << i + 1 << ',' << fixed6(rs.martingale(i)) << '\n';
  });

  // Kaplan-Meier and log(-log S) curves, overall or per group.
  std::vector<std::pair<std::string, std::vector<std::size_t>>> strata;
  if (a.group.empty()) {
    std::vector<std::size_t> all(d.n_rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    strata.emplace_back("all", all);
  } else {
    const Column& g = d.column(a.group);
    for (std::size_t k = 0; k < g.levels.size(); ++k) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!g.is_missing(i) && g.code(i) == static_cast<int>(k)) rows.push_back(i);
      if (!rows.empty()) strata.emplace_back(g.levels[k], rows);
    }
  }
  emit((dir / "km.csv").string(), [&](std::ostream& km_out) {
    km_out << "group,time,survival\n";
    std::ofstream ll((dir / "loglog.csv").string());
    ll << "group,time,log_time,log_minus_log_survival\n";
    for (const auto& [label, rows] : strata) {
      const Dataset sub = d.subset(rows);
      const auto km = kaplan_meier(sub.times(), sub.events());
      for (std::size_t k = 0; k < km.size(); ++k)
        km_out << label << ',' << fixed6(km.knots[k]) << ',' << fixed6(km.values[k]) << '\n';
      for (const auto& p : loglog_curve(km))
        ll << label << ',' << fixed6(p.time) << ',' << fixed6(p.log_time) << ',' << fixed6(p.log_minus_log_survival) << '\n';
    }
  });
  if (!a.group.empty()) {
    const Column& g = d.column(a.group);
    std::vector<std::size_t> rows;
    std::vector<int> codes;
    std::vector<int> remap(g.levels.size(), -1);
    int n_groups = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g.is_missing(i)) {
        auto& r = remap[static_cast<std::size_t>(g.code(i))];
        if (r < 0) r = n_groups++;
      }
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g.is_missing(i)) {
        rows.push_back(i);
        codes.push_back(remap[static_cast<std::size_t>(g.code(i))]);
      }
    const Dataset sub = d.subset(rows);
    const LogRankResult lr = logrank_test(sub.times(), sub.events(), codes, n_groups);
    emit((dir / "logrank.csv").string(), [&](std::ostream& out) {
      out << "chisq,df,p\n" << fixed6(lr.chi_square) << ',' << lr.df << ',' << fixed6(lr.p_value) << '\n';
    });
  }
  write_manifest((dir / "manifest.json").string(), "diagnose", 0, cfg);
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config, output_dir, schema;
  int workers = 1;
  int replicates = -1;
  int n = -1;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_simulate(const SimulateArgs& a) {
  if (a.config.empty()) throw UsageError("--config is required");
  if (a.output_dir.empty()) throw UsageError("--output-dir is required");
  if (a.workers < 1) throw UsageError("--workers must be >= 1");
  const json raw = load_config(a.config);
  SimConfig cfg;
  try {
    cfg = SimConfig::from_json(raw);
    if (a.seed_given) cfg.seed = a.seed;
    if (a.replicates > 0) cfg.replicates = a.replicates;
    if (a.n > 0) cfg.n = static_cast<std::size_t>(a.n);
    if (cfg.source == DataSource::reference) {
      if (cfg.reference_path.empty()) throw InputError("reference mode needs a 'reference' CSV path");
      auto path = fs::path(cfg.reference_path);
      if (path.is_relative()) path = fs::path(a.config).parent_path() / path;
      if (!fs::exists(path)) throw InputError("reference file not found: " + path.string());
      cfg.reference = load_dataset(path.string(), schema_for(path.string(), a.schema));
    }
    cfg.validate();
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  const json resolved = cfg.to_json();
  announce("simulate", cfg.seed, resolved);
  const SimulationResult res = run_simulation(cfg, a.workers);
  const auto dir = fs::path(a.output_dir);
  fs::create_directories(dir);
  emit((dir / "metrics.csv").string(), [&](std::ostream& out) { write_metrics_csv(out, res.rows); });
  emit((dir / "table_relative_bias.csv").string(),
       [&](std::ostream& out) { write_table_csv(out, res.rows, res.coefficients, TableMetric::relative_bias); });
  emit((dir / "table_ci_width.csv").string(),
       [&](std::ostream& out) { write_table_csv(out, res.rows, res.coefficients, TableMetric::ci_width); });
  emit((dir / "table_coverage.csv").string(),
       [&](std::ostream& out) { write_table_csv(out, res.rows, res.coefficients, TableMetric::coverage); });
  emit((dir / "trace.jsonl").string(), [&](std::ostream& out) { write_trace_jsonl(out, res.replicates); });
  write_manifest((dir / "manifest.json").string(), "simulate", cfg.seed, resolved);
  int failed = 0;
  for (const auto& r : res.rows) failed += r.n_failed;
  std::cerr << "replicates: " << cfg.replicates << ", failed method runs (per coefficient row): " << failed << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cox regression with missing categorical covariates: complete cases, IPW, multiple imputation "
               "and kappa-hybrid estimators"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // fit
  FitArgs fit;
  std::string fit_config;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a Cox model and print the coefficient table");
  fit_cmd->add_option("--config", fit_config, "JSON config or manifest");
  Resolver fit_r(fit_cmd, &fit_config);
  fit_r.add("--input", "input", fit.input, "Input CSV");
  fit_r.add("--schema", "schema", fit.schema, "Schema JSON (default: <input>.schema.json or inferred)");
  fit_r.add("--output", "output", fit.output, "Output CSV (default: stdout)");
  fit_r.add("--covariates", "covariates", fit.covariates, "Covariates (default: all)");
  fit_r.add("--weights", "weights", fit.weights, "Column holding case weights");
  fit_r.add("--ties", "ties", fit.ties, "efron or breslow");
  fit_r.add("--level", "level", fit.level, "Confidence level");
  fit_r.add_flag("--robust", "robust", fit.robust, "Robust (sandwich) standard errors");

  // ampute
  AmputeArgs amp;
  std::string amp_config;
  auto* amp_cmd = app.add_subcommand("ampute", "Introduce MAR missingness into one covariate");
  amp_cmd->add_option("--config", amp_config, "JSON config or manifest");
  Resolver amp_r(amp_cmd, &amp_config);
  amp_r.add("--input", "input", amp.input, "Input CSV");
  amp_r.add("--schema", "schema", amp.schema, "Schema JSON");
  amp_r.add("--output", "output", amp.output, "Output CSV (an R column is appended)");
  amp_r.add("--target", "target", amp.target, "Column to ampute");
  amp_r.add("--predictors", "predictors", amp.predictors, "Columns driving missingness (event and cumhaz allowed)");
  amp_r.add("--weights", "weights", amp.weights, "Weight per predictor on the standardized scale");
  amp_r.add("--rate", "rate", amp.rate, "Missingness rate");
  amp_r.add("--seed", "seed", amp.seed, "Random seed");
  amp_r.add("--sampling", "sampling", amp.sampling, "systematic or bernoulli");

  // impute
  ImputeArgs imp;
  std::string imp_config;
  auto* imp_cmd = app.add_subcommand("impute", "Write M completed datasets");
  imp_cmd->add_option("--config", imp_config, "JSON config or manifest");
  Resolver imp_r(imp_cmd, &imp_config);
  imp_r.add("--input", "input", imp.input, "Input CSV");
  imp_r.add("--schema", "schema", imp.schema, "Schema JSON");
  imp_r.add("--output-dir", "output_dir", imp.output_dir, "Directory for imputed_<m>.csv files");
  imp_r.add("--engine", "engine", imp.engine, "parametric or trees");
  imp_r.add("--m", "m", imp.m, "Number of imputations");
  imp_r.add("--seed", "seed", imp.seed, "Random seed");

  // analyze
  AnalyzeArgs an;
  std::string an_config;
  auto* an_cmd = app.add_subcommand("analyze", "Run one analysis method and print hazard ratios");
  an_cmd->add_option("--config", an_config, "JSON config or manifest");
  Resolver an_r(an_cmd, &an_config);
  an_r.add("--input", "input", an.input, "Input CSV");
  an_r.add("--schema", "schema", an.schema, "Schema JSON");
  an_r.add("--output", "output", an.output, "Output CSV (default: stdout)");
  an_r.add("--method", "method", an.method, "CC, IPW, MI_P, MI_NP, H1, H2, H3 or H4");
  an_r.add("--kappa", "kappa", an.kappa, "Compromise parameter (H2-H4)");
  an_r.add("--m", "m", an.m, "Number of imputations");
  an_r.add("--m1", "m1", an.m1, "Parametric imputations for H1");
  an_r.add("--seed", "seed", an.seed, "Random seed");
  an_r.add("--ties", "ties", an.ties, "efron or breslow");
  an_r.add("--variance", "variance", an.variance, "auto, robust or model");
  an_r.add("--truncation", "truncation", an.truncation, "Propensity bounds (two values)");
  an_r.add("--covariates", "covariates", an.covariates, "Analysis covariates (default: all)");
  an_r.add("--propensity-predictors", "propensity_predictors", an.propensity,
           "Propensity predictors (default: observed covariates, event, cumhaz)");
  an_r.add("--level", "level", an.level, "Confidence level");

  // diagnose
  DiagnoseArgs dg;
  std::string dg_config;
  auto* dg_cmd = app.add_subcommand("diagnose", "Proportional-hazards test, residuals and survival curves");
  dg_cmd->add_option("--config", dg_config, "JSON config or manifest");
  Resolver dg_r(dg_cmd, &dg_config);
  dg_r.add("--input", "input", dg.input, "Input CSV (complete data)");
  dg_r.add("--schema", "schema", dg.schema, "Schema JSON");
  dg_r.add("--output-dir", "output_dir", dg.output_dir, "Directory for diagnostic tables");
  dg_r.add("--covariates", "covariates", dg.covariates, "Covariates (default: all)");
  dg_r.add("--ties", "ties", dg.ties, "efron or breslow");
  dg_r.add("--transform", "transform", dg.transform, "km, identity or rank");
  dg_r.add("--group", "group", dg.group, "Categorical column for KM curves and the log-rank test");
  dg_r.add_flag("--per-column", "per_column", dg.per_column, "One PH test per design column instead of per term");

  // simulate
  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo comparison of the methods");
  sim_cmd->add_option("--config", sim.config, "Simulation JSON config or manifest");
  sim_cmd->add_option("--output-dir", sim.output_dir, "Directory for metrics, tables and trace");
  sim_cmd->add_option("--workers", sim.workers, "Worker threads");
  sim_cmd->add_option("--replicates", sim.replicates, "Override the replicate count");
  sim_cmd->add_option("--n", sim.n, "Override the per-replicate sample size");
  sim_cmd->add_option("--schema", sim.schema, "Schema for the reference CSV");
  auto* sim_seed = sim_cmd->add_option("--seed", sim.seed, "Override the master seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*fit_cmd) return run_fit(fit, fit_r.resolve());
    if (*amp_cmd) return run_ampute(amp, amp_r.resolve());
    if (*imp_cmd) return run_impute(imp, imp_r.resolve());
    if (*an_cmd) return run_analyze(an, an_r.resolve());
    if (*dg_cmd) return run_diagnose(dg, dg_r.resolve());
    if (*sim_cmd) {
      sim.seed_given = sim_seed->count() > 0;
      return run_simulate(sim);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
