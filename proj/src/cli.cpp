#include "frailsim/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "frailsim/errors.hpp"
#include "frailsim/estimands.hpp"
#include "frailsim/harness.hpp"
#include "frailsim/io.hpp"

namespace frailsim::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

// "name(a,b,c)" -> {name, [a, b, c]}; a bare "name" has no arguments.
std::pair<std::string, std::vector<double>> parse_call(const std::string& key, const std::string& v) {
  const auto open = v.find('(');
  if (open == std::string::npos) return {trim(v), {}};
  if (v.back() != ')') throw ConfigError("config: malformed '" + key + "' value '" + v + "'");
  std::vector<double> args;
  for (const auto& a : split_list(v.substr(open + 1, v.size() - open - 2), ','))
    args.push_back(to_double(key, a));
  return {trim(v.substr(0, open)), args};
}

BaselineHazard parse_baseline(const std::string& v) {
  const auto [name, a] = parse_call("baseline", v);
  if (a.empty()) return standard_baseline(name);
  auto need = [&](std::size_t n) {
    if (a.size() != n) throw ConfigError("config: baseline '" + name + "' takes " + std::to_string(n) + " values");
  };
  try {
    if (name == "exp") { need(1); return BaselineHazard::exponential(a[0]); }
    if (name == "wei") { need(2); return BaselineHazard::weibull(a[0], a[1]); }
    if (name == "gom") { need(2); return BaselineHazard::gompertz(a[0], a[1]); }
    if (name == "ww") { need(5); return BaselineHazard::mixture(a[0], a[1], a[2], a[3], a[4]); }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  throw ConfigError("config: unknown baseline '" + name + "'");
}

FrailtySpec parse_frailty_spec(const std::string& v) {
  const auto [name, a] = parse_call("frailty", v);
  if (a.size() != 1 || !(a[0] > 0.0)) throw ConfigError("config: frailty takes one positive variance");
  for (FrailtyFamily f : {FrailtyFamily::Gamma, FrailtyFamily::LogNormal, FrailtyFamily::MixtureNormal})
    if (to_string(f) == name) return {f, a[0]};
  throw ConfigError("config: unknown frailty '" + name + "'");
}

}  // namespace

Scenario parse_scenario_definition(const std::string& id, const std::string& definition) {
  if (id.empty() || id.find(',') != std::string::npos)
    throw ConfigError("config: scenario ids must be non-empty and contain no commas");
  Scenario s;
  s.id = id;
  s.baseline_code = "custom";
  bool have_baseline = false, have_frailty = false;
  for (const auto& item : split_list(definition, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("config: scenario " + id + ": expected key=value in '" + item + "'");
    const std::string k = trim(item.substr(0, eq));
    const std::string v = trim(item.substr(eq + 1));
    if (k == "baseline") {
      s.baseline = parse_baseline(v);
      const auto [name, a] = parse_call(k, v);
      s.baseline_code = a.empty() ? name : "custom";
      have_baseline = true;
    } else if (k == "frailty") {
      s.frailty = parse_frailty_spec(v);
      have_frailty = true;
    } else if (k == "clusters") {
      s.n_clusters = static_cast<int>(to_int(k, v));
    } else if (k == "size") {
      s.cluster_size = static_cast<int>(to_int(k, v));
    } else if (k == "beta") {
      s.beta = to_double(k, v);
    } else if (k == "treat_prob") {
      s.treat_prob = to_double(k, v);
    } else if (k == "censor") {
      s.censor_time = to_double(k, v);
    } else {
      throw ConfigError("config: scenario " + id + ": unknown key '" + k + "'");
    }
  }
  if (!have_baseline || !have_frailty)
    throw ConfigError("config: scenario " + id + " needs baseline and frailty");
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: scenario ") + id + ": " + e.what());
  }
  return s;
}

RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "scenarios") {
      if (value == "all") c.all_scenarios = true;
      else c.scenario_ids = split_list(value, ',');
    } else if (key == "models") {
      c.model_ids = split_list(value, ',');
    } else if (key == "n_sim") {
      c.n_sim = static_cast<int>(to_int(key, value));
    } else if (key == "seed") {
      c.master_seed = static_cast<std::uint64_t>(to_int(key, value));
    } else if (key == "workers") {
      c.workers = static_cast<int>(to_int(key, value));
    } else if (key == "out") {
      c.out = value;
    } else if (key == "gh_nodes") {
      c.gh_nodes = static_cast<int>(to_int(key, value));
    } else if (key == "horizon") {
      c.horizon = to_double(key, value);
    } else if (key == "filter_threshold") {
      c.filter_threshold = to_double(key, value);
    } else if (key == "filter_alarm") {
      c.filter_alarm = to_double(key, value);
    } else if (key == "max_evaluations") {
      c.max_evaluations = static_cast<int>(to_int(key, value));
    } else if (key.rfind("scenario.", 0) == 0) {
      c.custom_scenarios.push_back(parse_scenario_definition(key.substr(9), value));
    } else {
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (c.n_sim < 1) throw ConfigError("config: n_sim must be >= 1");
  if (c.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (c.gh_nodes < 7 || c.gh_nodes > 128) throw ConfigError("config: gh_nodes must lie in [7, 128]");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  return parse_config(in);
}

std::vector<Scenario> RunConfig::resolve_scenarios() const {
  std::vector<Scenario> out;
  if (all_scenarios) out = scenario_grid();
  for (const auto& id : scenario_ids) {
    const auto custom = std::find_if(custom_scenarios.begin(), custom_scenarios.end(),
                                     [&](const Scenario& s) { return s.id == id; });
    out.push_back(custom != custom_scenarios.end() ? *custom : grid_scenario(id));
  }
  if (out.empty()) throw ConfigError("config: no scenarios selected");
  return out;
}

std::vector<ModelSpec> RunConfig::resolve_models() const {
  if (model_ids.empty()) throw ConfigError("config: no models selected");
  std::vector<ModelSpec> out;
  for (const auto& id : model_ids) {
    if (id == "all") {
      for (auto m : all_models()) out.push_back(m);
      continue;
    }
    out.push_back(ModelSpec::parse(id));
  }
  for (auto& m : out) m.gh_nodes = gh_nodes;
  return out;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string with_se(double est, double se) {
  if (!std::isfinite(est)) return "NA";
  return fmt("%.4f", est) + " (" + (std::isfinite(se) ? fmt("%.4f", se) : std::string("NA")) + ")";
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

int cmd_simulate(const std::string& scenario_id, const std::optional<std::string>& config_path,
                 int reps, std::optional<std::uint64_t> seed, const std::optional<std::string>& out_dir,
                 std::ostream& out) {
  RunConfig cfg = config_path ? load_config(*config_path) : RunConfig{};
  if (seed) cfg.master_seed = *seed;
  if (out_dir) cfg.out = *out_dir;
  if (reps < 1) throw ConfigError("--reps must be >= 1");
  cfg.scenario_ids = {scenario_id};
  cfg.all_scenarios = false;
  const Scenario s = cfg.resolve_scenarios().front();
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t ds = derive_seed(cfg.master_seed, s.id, r);
    const ClusteredDataset data = generate_dataset(s, ds);
    char stem[32];
    std::snprintf(stem, sizeof stem, "_rep%04d", r);
    const auto base = cfg.out / (s.id + stem);
    io::write_dataset_csv(base.string() + ".csv", data);
    io::write_manifest(base.string() + ".manifest.json", s, ds, r);
    out << "wrote " << base.string() << ".csv (" << data.rows.size() << " rows, "
        << data.n_events() << " events)\n";
  }
  return kOk;
}

int cmd_fit(const std::string& data_path, const std::string& model_arg,
            const std::optional<std::string>& out_path, double horizon, int gh_nodes,
            std::ostream& out, std::ostream& err) {
  const ClusteredDataset data = io::read_dataset_csv(data_path);
  std::vector<ModelSpec> models;
  if (model_arg == "all") models = all_models();
  else for (const auto& id : split_list(model_arg, ',')) models.push_back(ModelSpec::parse(id));

  nlohmann::json records = nlohmann::json::array();
  char line[256];
  std::snprintf(line, sizeof line, "%-15s %-9s %-20s %-20s %-20s %12s %12s %12s\n", "model",
                "converged", "HR (SE)", "frailty var (SE)", "LLE (SE)", "loglik", "AIC", "BIC");
  out << line;
  int failures = 0;
  std::string last_error;
  for (ModelSpec m : models) {
    m.gh_nodes = gh_nodes;
    nlohmann::json rec{{"model", m.id()}};
    try {
      const FitResult f = fit(m, data);
      const EstimandResult hr = estimate_hr(f);
      const EstimandResult fv = estimate_frailty_var(f);
      EstimandResult l{EstimandKind::LLE, NAN, NAN, NAN, NAN};
      try {
        l = estimate_lle(f, horizon);
      } catch (const Error& e) {
        err << m.id() << ": LLE unavailable: " << e.what() << '\n';
      }
      const auto ic = information_criteria(f, data.rows.size());
      std::snprintf(line, sizeof line, "%-15s %-9s %-20s %-20s %-20s %12.3f %12.3f %12.3f\n",
                    m.id().c_str(), f.converged ? "yes" : "no", with_se(hr.estimate, hr.se).c_str(),
                    with_se(fv.estimate, fv.se).c_str(), with_se(l.estimate, l.se).c_str(), f.loglik,
                    ic.aic, ic.bic);
      out << line;
      rec["converged"] = f.converged;
      rec["loglik"] = number_or_null(f.loglik);
      rec["aic"] = number_or_null(ic.aic);
      rec["bic"] = number_or_null(ic.bic);
      rec["n_obs"] = f.n_obs;
      rec["n_events"] = f.n_events;
      rec["beta"] = {{"estimate", number_or_null(f.beta)}, {"se", number_or_null(f.se_beta)}};
      rec["hr"] = {{"estimate", number_or_null(hr.estimate)}, {"se", number_or_null(hr.se)},
                   {"lo", number_or_null(hr.lo)}, {"hi", number_or_null(hr.hi)}};
      rec["frailty_var"] = {{"estimate", number_or_null(fv.estimate)}, {"se", number_or_null(fv.se)}};
      rec["lle"] = {{"estimate", number_or_null(l.estimate)}, {"se", number_or_null(l.se)},
                    {"lo", number_or_null(l.lo)}, {"hi", number_or_null(l.hi)}};
      nlohmann::json params = nlohmann::json::object();
      for (std::size_t i = 0; i < f.names.size(); ++i) params[f.names[i]] = number_or_null(f.params[i]);
      rec["params"] = params;
      rec["gradient_norm"] = number_or_null(f.gradient_norm);
      rec["iterations"] = f.iterations;
    } catch (const FitSetupError& e) {
      ++failures;
      last_error = e.what();
      err << m.id() << ": " << e.what() << '\n';
      rec["error"] = e.what();
      std::snprintf(line, sizeof line, "%-15s %-9s %s\n", m.id().c_str(), "error", e.what());
      out << line;
    }
    records.push_back(rec);
  }
  const std::filesystem::path target = out_path ? std::filesystem::path(*out_path)
                                                : std::filesystem::path(data_path + ".fit.json");
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  std::ofstream jf(target);
  if (!jf) throw DataError("cannot write '" + target.string() + "'");
  jf << records.dump(2) << '\n';
  if (failures == static_cast<int>(models.size())) {
    err << "unfittable data: " << last_error << '\n';
    return kDataError;
  }
  return kOk;
}

std::vector<std::string> model_ids_of(const std::vector<ModelSpec>& models) {
  std::vector<std::string> ids;
  for (const auto& m : models) ids.push_back(m.id());
  return ids;
}

std::vector<io::ScenarioInfo> info_of(const std::vector<Scenario>& scenarios) {
  std::vector<io::ScenarioInfo> info;
  for (const auto& s : scenarios)
    info.push_back({s.id, s.baseline_code, s.frailty.family, s.frailty.theta, s.n_clusters, s.cluster_size});
  return info;
}

std::map<std::string, FrailtyFamily> families_of(const std::vector<io::ScenarioInfo>& info) {
  std::map<std::string, FrailtyFamily> m;
  for (const auto& s : info) m[s.id] = s.frailty;
  return m;
}

void write_summaries(const std::filesystem::path& dir, std::vector<ReplicationRecord>& records,
                     const std::vector<io::ScenarioInfo>& info, const TruthTable& truths,
                     const std::vector<std::string>& models, double threshold, double alarm,
                     std::ostream& err) {
  filter_convergence(records, threshold);
  const SummaryReport report = summarize(records, truths, families_of(info), alarm);
  io::write_results_csv(dir / "results.csv", records);
  io::write_summary_csv(dir / "summary.csv", report.rows);
  io::write_plot_data(dir / "plot_data.csv", info, models, report);
  for (const auto& w : report.warnings) err << "warning: " << w << '\n';
  for (const auto& [sid, mid, kind] : report.nonconverged_cells)
    err << "warning: " << sid << " / " << mid << " / " << to_string(kind)
        << ": fewer than two usable replications\n";
}

int cmd_mc(const std::string& config_path, std::optional<std::uint64_t> seed,
           std::optional<int> workers, const std::optional<std::string>& out_dir,
           std::optional<int> n_sim, std::ostream& out, std::ostream& err) {
  RunConfig cfg = load_config(config_path);
  if (seed) cfg.master_seed = *seed;
  if (workers) cfg.workers = *workers;
  if (out_dir) cfg.out = *out_dir;
  if (n_sim) cfg.n_sim = *n_sim;
  if (cfg.workers < 1 || cfg.n_sim < 1) throw ConfigError("workers and n_sim must be >= 1");
  const auto scenarios = cfg.resolve_scenarios();
  const auto models = cfg.resolve_models();

  HarnessOptions opts;
  opts.workers = cfg.workers;
  opts.horizon = cfg.horizon;
  opts.gh_nodes = cfg.gh_nodes;
  opts.fit.max_evaluations = cfg.max_evaluations;
  auto records = run_grid(scenarios, models, cfg.n_sim, cfg.master_seed, opts);
  const TruthTable truths = compute_truths(scenarios, cfg.horizon);
  std::filesystem::create_directories(cfg.out);
  io::write_scenarios_csv(cfg.out / "scenarios.csv", scenarios, truths);
  std::ostringstream warnings;
  write_summaries(cfg.out, records, info_of(scenarios), truths, model_ids_of(models),
                  cfg.filter_threshold, cfg.filter_alarm, warnings);
  err << warnings.str();
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.converged ? 0 : 1;
  out << "mc: " << scenarios.size() << " scenario(s) x " << models.size() << " model(s) x "
      << cfg.n_sim << " replication(s); " << failed << " non-converged record(s); output in "
      << cfg.out.string() << '\n';
  return kOk;
}

int cmd_summarize(const std::string& results_path, const std::optional<std::string>& scenarios_path,
                  const std::optional<std::string>& out_dir, double threshold, double alarm,
                  std::ostream& out, std::ostream& err) {
  const std::filesystem::path results(results_path);
  const std::filesystem::path meta =
      scenarios_path ? std::filesystem::path(*scenarios_path) : results.parent_path() / "scenarios.csv";
  const std::filesystem::path dir = out_dir ? std::filesystem::path(*out_dir) : results.parent_path();
  auto records = io::read_results_csv(results);
  std::vector<io::ScenarioInfo> info;
  TruthTable truths;
  io::read_scenarios_csv(meta, info, truths);
  std::vector<std::string> models;
  for (const auto& r : records)
    if (std::find(models.begin(), models.end(), r.model_id) == models.end()) models.push_back(r.model_id);
  std::filesystem::create_directories(dir);
  write_summaries(dir, records, info, truths, models, threshold, alarm, err);
  out << "summarize: " << records.size() << " record(s) -> " << (dir / "summary.csv").string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shared-frailty survival simulation and fitting"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<int> workers, n_sim;
  std::optional<std::string> out_dir, config_path, scenarios_path;

  auto* sim = app.add_subcommand("simulate", "Write simulated datasets for one scenario");
  std::string scenario_id;
  int reps = 1;
  sim->add_option("--scenario", scenario_id, "Scenario id (grid or config-defined)")->required();
  sim->add_option("--reps", reps, "Number of replicate datasets");
  sim->add_option("--seed", seed, "Master seed");
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--config", config_path, "Config file with custom scenarios");

  auto* fitc = app.add_subcommand("fit", "Fit models to a dataset CSV");
  std::string data_path, model_arg = "all";
  std::optional<std::string> fit_out;
  double horizon = 5.0;
  int gh_nodes = 15;
  fitc->add_option("--data", data_path, "Dataset CSV")->required();
  fitc->add_option("--model", model_arg, "Model id, comma list, or 'all'");
  fitc->add_option("--out", fit_out, "Machine-readable JSON report");
  fitc->add_option("--horizon", horizon, "Life-expectancy horizon in years");
  fitc->add_option("--gh-nodes", gh_nodes, "Gauss-Hermite nodes for log-Normal frailty")
      ->check(CLI::Range(7, 128));

  auto* mc = app.add_subcommand("mc", "Run a Monte Carlo experiment");
  std::string mc_config;
  mc->add_option("--config", mc_config, "Run configuration")->required();
  mc->add_option("--seed", seed, "Master seed (overrides config)");
  mc->add_option("--workers", workers, "Worker threads (overrides config)");
  mc->add_option("--out", out_dir, "Output directory (overrides config)");
  mc->add_option("--n-sim", n_sim, "Replications per scenario (overrides config)");

  auto* summ = app.add_subcommand("summarize", "Recompute summaries from a results CSV");
  std::string results_path;
  double threshold = 10.0, alarm = 0.05;
  summ->add_option("--results", results_path, "results.csv")->required();
  summ->add_option("--scenarios", scenarios_path, "scenarios.csv (default: next to results)");
  summ->add_option("--out", out_dir, "Output directory (default: next to results)");
  summ->add_option("--filter-threshold", threshold, "Robust z cutoff");
  summ->add_option("--filter-alarm", alarm, "Warn when more than this fraction is filtered");

  auto* list = app.add_subcommand("scenarios", "List the scenario grid");

  std::vector<std::string> argv_store{"frailsim"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*sim) return cmd_simulate(scenario_id, config_path, reps, seed, out_dir, out);
    if (*fitc) return cmd_fit(data_path, model_arg, fit_out, horizon, gh_nodes, out, err);
    if (*mc) return cmd_mc(mc_config, seed, workers, out_dir, n_sim, out, err);
    if (*summ) return cmd_summarize(results_path, scenarios_path, out_dir, threshold, alarm, out, err);
    if (*list) {
      for (const auto& s : scenario_grid()) out << s.id << '\n';
      return kOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const FitSetupError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericError;
  }
  return kOk;
}

}  // namespace frailsim::cli
