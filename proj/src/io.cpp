#include "frailsim/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "frailsim/errors.hpp"

namespace frailsim::io {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ", line " + std::to_string(line);
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line,
                    const char* field) {
  if (s == "NA") return kNaN;
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    throw DataError(where(path, line) + ": non-numeric " + field + " '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::filesystem::path& path, std::size_t line,
                    const char* field) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw DataError(where(path, line) + ": non-integer " + field + " '" + s + "'");
  return v;
}

EstimandKind parse_estimand(const std::string& s, const std::filesystem::path& path,
                            std::size_t line) {
  for (EstimandKind k :
       {EstimandKind::LogHR, EstimandKind::HR, EstimandKind::LLE, EstimandKind::FrailtyVar})
    if (to_string(k) == s) return k;
  throw DataError(where(path, line) + ": unknown estimand '" + s + "'");
}

FrailtyFamily parse_frailty(const std::string& s) {
  for (FrailtyFamily f : {FrailtyFamily::Gamma, FrailtyFamily::LogNormal, FrailtyFamily::MixtureNormal})
    if (to_string(f) == s) return f;
  throw DataError("unknown frailty family '" + s + "'");
}

void expect_header(std::istream& in, const std::filesystem::path& path, const char* header) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != header)
    throw DataError(where(path, 1) + ": expected header '" + header + "'");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_dataset_csv(const std::filesystem::path& path, const ClusteredDataset& data) {
  auto out = open_out(path);
  out << "cluster,time,event,treat\n";
  char buf[40];
  for (const auto& r : data.rows) {
    std::snprintf(buf, sizeof buf, "%.12g", r.time);
    out << r.cluster << ',' << buf << ',' << r.event << ',' << r.treat << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

ClusteredDataset read_dataset_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  expect_header(in, path, "cluster,time,event,treat");
  ClusteredDataset data;
  data.scenario_id = path.stem().string();
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != 4)
      throw DataError(where(path, lineno) + ": expected 4 fields, got " + std::to_string(cells.size()));
    SubjectRow r{};
    r.cluster = parse_int(cells[0], path, lineno, "cluster");
    r.time = parse_double(cells[1], path, lineno, "time");
    r.event = static_cast<int>(parse_int(cells[2], path, lineno, "event"));
    r.treat = static_cast<int>(parse_int(cells[3], path, lineno, "treat"));
    if (!(r.time > 0.0) || !std::isfinite(r.time))
      throw DataError(where(path, lineno) + ": time must be positive and finite");
    if ((r.event != 0 && r.event != 1) || (r.treat != 0 && r.treat != 1))
      throw DataError(where(path, lineno) + ": event and treat must be 0 or 1");
    data.rows.push_back(r);
  }
  if (data.rows.empty()) throw DataError(path.string() + ": no data rows");
  return data;
}

void write_manifest(const std::filesystem::path& path, const Scenario& s, std::uint64_t seed,
                    int rep) {
  const BaselineHazard& b = s.baseline;
  nlohmann::json baseline{{"family", to_string(b.family)}};
  switch (b.family) {
    case HazardFamily::Exponential: baseline["lambda"] = b.lambda; break;
    case HazardFamily::Weibull: baseline["lambda"] = b.lambda; baseline["p"] = b.shape; break;
    case HazardFamily::Gompertz: baseline["lambda"] = b.lambda; baseline["gamma"] = b.shape; break;
    case HazardFamily::WeibullWeibullMixture:
      baseline["lambda1"] = b.lambda1;
      baseline["lambda2"] = b.lambda2;
      baseline["p1"] = b.p1;
      baseline["p2"] = b.p2;
      baseline["pi"] = b.pi;
      break;
  }
  nlohmann::json j{{"scenario_id", s.id},
                   {"baseline", baseline},
                   {"frailty", {{"family", to_string(s.frailty.family)}, {"theta", s.frailty.theta}}},
                   {"n_clusters", s.n_clusters},
                   {"cluster_size", s.cluster_size},
                   {"beta", s.beta},
                   {"treat_prob", s.treat_prob},
                   {"censor_time", s.censor_time},
                   {"rep", rep},
                   {"seed", seed}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_results_csv(const std::filesystem::path& path,
                       const std::vector<ReplicationRecord>& records) {
  auto out = open_out(path);
  out << kResultsHeader << '\n';
  for (const auto& r : records) {
    out << r.scenario_id << ',' << r.model_id << ',' << r.rep << ',' << to_string(r.estimand) << ','
        << format_double(r.estimate) << ',' << format_double(r.se) << ',' << (r.converged ? 1 : 0)
        << ',' << (r.filtered ? 1 : 0) << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<ReplicationRecord> read_results_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  expect_header(in, path, kResultsHeader);
  std::vector<ReplicationRecord> out;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 8) throw DataError(where(path, lineno) + ": expected 8 fields");
    ReplicationRecord r;
    r.scenario_id = c[0];
    r.model_id = c[1];
    r.rep = static_cast<int>(parse_int(c[2], path, lineno, "rep"));
    r.estimand = parse_estimand(c[3], path, lineno);
    r.estimate = parse_double(c[4], path, lineno, "estimate");
    r.se = parse_double(c[5], path, lineno, "se");
    r.converged = parse_int(c[6], path, lineno, "converged") != 0;
    r.filtered = parse_int(c[7], path, lineno, "filtered") != 0;
    out.push_back(std::move(r));
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<PerformanceSummary>& rows) {
  auto out = open_out(path);
  out << kSummaryHeader << '\n';
  for (const auto& p : rows) {
    out << p.scenario_id << ',' << p.model_id << ',' << to_string(p.estimand) << ',' << p.n_total
        << ',' << p.n_used;
    for (double v : {p.truth, p.bias, p.bias_mcse, p.coverage, p.coverage_mcse, p.mse, p.mse_mcse,
                     p.empirical_se, p.mean_model_se, p.convergence_rate, p.filtered_fraction})
      out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_scenarios_csv(const std::filesystem::path& path, const std::vector<Scenario>& scenarios,
                         const TruthTable& truths) {
  auto out = open_out(path);
  out << kScenariosHeader << '\n';
  auto truth = [&](const std::string& id, EstimandKind k) {
    const auto it = truths.find({id, k});
    return it == truths.end() ? kNaN : it->second;
  };
  for (const auto& s : scenarios) {
    out << s.id << ',' << s.baseline_code << ',' << to_string(s.frailty.family) << ','
        << format_double(s.frailty.theta) << ',' << s.n_clusters << ',' << s.cluster_size << ','
        << format_double(truth(s.id, EstimandKind::LogHR)) << ','
        << format_double(truth(s.id, EstimandKind::LLE)) << ','
        << format_double(truth(s.id, EstimandKind::FrailtyVar)) << '\n';
  }
}

void read_scenarios_csv(const std::filesystem::path& path, std::vector<ScenarioInfo>& info,
                        TruthTable& truths) {
  auto in = open_in(path);
  expect_header(in, path, kScenariosHeader);
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 9) throw DataError(where(path, lineno) + ": expected 9 fields");
    ScenarioInfo s;
    s.id = c[0];
    s.baseline = c[1];
    s.frailty = parse_frailty(c[2]);
    s.theta = parse_double(c[3], path, lineno, "theta");
    s.n_clusters = static_cast<int>(parse_int(c[4], path, lineno, "n_clusters"));
    s.cluster_size = static_cast<int>(parse_int(c[5], path, lineno, "cluster_size"));
    const EstimandKind kinds[] = {EstimandKind::LogHR, EstimandKind::LLE, EstimandKind::FrailtyVar};
    for (int k = 0; k < 3; ++k) {
      const double v = parse_double(c[6 + k], path, lineno, "truth");
      if (!std::isnan(v)) truths[{s.id, kinds[k]}] = v;
    }
    info.push_back(std::move(s));
  }
}

void write_plot_data(const std::filesystem::path& path, const std::vector<ScenarioInfo>& scenarios,
                     const std::vector<std::string>& models, const SummaryReport& report) {
  std::map<std::tuple<std::string, std::string, EstimandKind>, const PerformanceSummary*> index;
  for (const auto& p : report.rows) index[{p.scenario_id, p.model_id, p.estimand}] = &p;

  auto out = open_out(path);
  out << kPlotHeader << '\n';
  for (const auto& s : scenarios) {
    const std::string size = std::to_string(s.n_clusters) + "x" + std::to_string(s.cluster_size);
    for (const auto& model : models) {
      for (EstimandKind kind : kRecordedEstimands) {
        if (kind == EstimandKind::FrailtyVar &&
            !frailty_comparable(s.frailty, ModelSpec::parse(model).frailty))
          continue;
        const auto it = index.find({s.id, model, kind});
        const PerformanceSummary* p = it == index.end() ? nullptr : it->second;
        const std::pair<const char*, std::pair<double, double>> measures[] = {
            {"bias", p ? std::pair{p->bias, p->bias_mcse} : std::pair{kNaN, kNaN}},
            {"coverage", p ? std::pair{p->coverage, p->coverage_mcse} : std::pair{kNaN, kNaN}},
            {"mse", p ? std::pair{p->mse, p->mse_mcse} : std::pair{kNaN, kNaN}},
            {"convergence_rate", p ? std::pair{p->convergence_rate, kNaN} : std::pair{kNaN, kNaN}},
        };
        for (const auto& [name, vm] : measures) {
          out << s.id << ',' << s.baseline << ',' << to_string(s.frailty) << ','
              << format_double(s.theta) << ',' << size << ',' << model << ',' << to_string(kind)
              << ',' << name << ',' << format_double(vm.first) << ',' << format_double(vm.second)
              << ',' << (p ? "ok" : "nonconverged") << '\n';
        }
      }
    }
  }
}

}  // namespace frailsim::io
