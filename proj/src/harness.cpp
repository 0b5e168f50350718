#include "frailsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>
#include <tuple>

#include "frailsim/errors.hpp"

namespace frailsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int estimand_rank(EstimandKind k) {
  switch (k) {
    case EstimandKind::LogHR: return 0;
    case EstimandKind::LLE: return 1;
    case EstimandKind::FrailtyVar: return 2;
    case EstimandKind::HR: return 3;
  }
  return 4;
}

// Records for one model fitted to one dataset.
void fit_one(const ClusteredDataset& data, const Scenario& s, const ModelSpec& m, int rep,
             const HarnessOptions& opts, ReplicationRecord* out) {
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t e = 0; e < std::size(kRecordedEstimands); ++e) {
    out[e] = {s.id, m.id(), rep, kRecordedEstimands[e], kNaN, kNaN, false, false, 0.0};
  }
  try {
    const FitResult f = fit(m, data, opts.fit);
    if (f.converged) {
      const EstimandResult log_hr = estimate_log_hr(f);
      out[0].estimate = log_hr.estimate;
      out[0].se = log_hr.se;
      out[0].converged = std::isfinite(log_hr.se);
      try {
        const EstimandResult l = estimate_lle(f, opts.horizon);
        out[1].estimate = l.estimate;
        out[1].se = l.se;
        out[1].converged = std::isfinite(l.estimate) && std::isfinite(l.se);
      } catch (const Error&) {
      }
      const EstimandResult v = estimate_frailty_var(f);
      out[2].estimate = v.estimate;
      out[2].se = v.se;
      out[2].converged = std::isfinite(v.se);
    }
  } catch (const Error&) {
    // Unfittable replicate: all records stay non-converged.
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (std::size_t e = 0; e < std::size(kRecordedEstimands); ++e) out[e].wall_time = secs;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<ReplicationRecord> run_grid(const std::vector<Scenario>& scenarios,
                                        const std::vector<ModelSpec>& models_in, int n_sim,
                                        std::uint64_t master_seed, const HarnessOptions& opts) {
  if (n_sim < 1) throw ConfigError("n_sim must be >= 1");
  std::vector<ModelSpec> models = models_in;
  for (ModelSpec& m : models) {
    m.gh_nodes = opts.gh_nodes;
    m.validate();
  }
  const std::size_t n_est = std::size(kRecordedEstimands);
  const std::size_t per_unit = models.size() * n_est;
  const std::size_t n_units = scenarios.size() * static_cast<std::size_t>(n_sim);
  std::vector<ReplicationRecord> slots(n_units * per_unit);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t u = next.fetch_add(1);
      if (u >= n_units) return;
      const Scenario& s = scenarios[u / n_sim];
      const int rep = static_cast<int>(u % n_sim);
      const ClusteredDataset data = generate_dataset(s, derive_seed(master_seed, s.id, rep));
      for (std::size_t mi = 0; mi < models.size(); ++mi) {
        fit_one(data, s, models[mi], rep, opts, &slots[u * per_unit + mi * n_est]);
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(opts.workers, static_cast<int>(n_units)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Order: scenario, model, rep, estimand.
  std::vector<ReplicationRecord> out;
  out.reserve(slots.size());
  for (std::size_t si = 0; si < scenarios.size(); ++si)
    for (std::size_t mi = 0; mi < models.size(); ++mi)
      for (int r = 0; r < n_sim; ++r)
        for (std::size_t e = 0; e < n_est; ++e)
          out.push_back(slots[(si * n_sim + r) * per_unit + mi * n_est + e]);
  return out;
}

std::vector<ReplicationRecord> run_cell(const Scenario& s, const ModelSpec& m, int n_sim,
                                        std::uint64_t master_seed, const HarnessOptions& opts) {
  return run_grid({s}, {m}, n_sim, master_seed, opts);
}

void filter_convergence(std::vector<ReplicationRecord>& records, double threshold) {
  using Key = std::tuple<std::string, std::string, EstimandKind>;
  std::map<Key, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].filtered = false;
    if (records[i].converged)
      cells[{records[i].scenario_id, records[i].model_id, records[i].estimand}].push_back(i);
  }
  for (const auto& [key, idx] : cells) {
    if (idx.size() < 2) continue;
    std::vector<double> est, se;
    for (std::size_t i : idx) {
      est.push_back(records[i].estimate);
      se.push_back(records[i].se);
    }
    std::sort(est.begin(), est.end());
    std::sort(se.begin(), se.end());
    const double est_med = quantile_type7(est, 0.5);
    const double est_iqr = quantile_type7(est, 0.75) - quantile_type7(est, 0.25);
    const double se_med = quantile_type7(se, 0.5);
    const double se_iqr = quantile_type7(se, 0.75) - quantile_type7(se, 0.25);
    for (std::size_t i : idx) {
      const double z_est = est_iqr > 0.0 ? (records[i].estimate - est_med) / est_iqr : 0.0;
      const double z_se = se_iqr > 0.0 ? (records[i].se - se_med) / se_iqr : 0.0;
      records[i].filtered = std::fabs(z_est) > threshold || std::fabs(z_se) > threshold;
    }
  }
}

double coverage_mcse(double coverage, int n) {
  return std::sqrt(coverage * (1.0 - coverage) / n);
}

PerformanceSummary performance(const std::vector<ReplicationRecord>& records_in, double truth) {
  std::vector<const ReplicationRecord*> records;
  for (const auto& r : records_in) records.push_back(&r);
  std::stable_sort(records.begin(), records.end(),
                   [](const auto* a, const auto* b) { return a->rep < b->rep; });

  PerformanceSummary p;
  if (!records.empty()) {
    p.scenario_id = records.front()->scenario_id;
    p.model_id = records.front()->model_id;
    p.estimand = records.front()->estimand;
  }
  p.truth = truth;
  p.n_total = static_cast<int>(records.size());
  std::vector<double> est, se, sq;
  int covered = 0, filtered = 0;
  for (const auto* r : records) {
    if (r->filtered) ++filtered;
    if (!r->converged || r->filtered) continue;
    est.push_back(r->estimate);
    se.push_back(r->se);
    sq.push_back((r->estimate - truth) * (r->estimate - truth));
    if (r->estimate - kWaldZ * r->se <= truth && truth <= r->estimate + kWaldZ * r->se) ++covered;
  }
  p.n_used = static_cast<int>(est.size());
  p.convergence_rate = p.n_total > 0 ? double(p.n_used) / p.n_total : 0.0;
  p.filtered_fraction = p.n_total > 0 ? double(filtered) / p.n_total : 0.0;
  if (p.n_used < 2) throw NumericError("performance: fewer than two usable replications");

  const double n = p.n_used;
  p.bias = mean_of(est) - truth;
  p.empirical_se = sd_of(est);
  p.bias_mcse = p.empirical_se / std::sqrt(n);
  p.coverage = covered / n;
  p.coverage_mcse = coverage_mcse(p.coverage, p.n_used);
  p.mse = mean_of(sq);
  p.mse_mcse = sd_of(sq) / std::sqrt(n);
  p.mean_model_se = mean_of(se);
  return p;
}

bool frailty_comparable(FrailtyFamily scenario_family, FrailtyFamily model_family) {
  return scenario_family == model_family && scenario_family != FrailtyFamily::MixtureNormal;
}

TruthTable compute_truths(const std::vector<Scenario>& scenarios, double horizon) {
  TruthTable t;
  for (const Scenario& s : scenarios) {
    const TrueEstimands te = true_estimands(s, horizon);
    t[{s.id, EstimandKind::LogHR}] = te.beta;
    t[{s.id, EstimandKind::LLE}] = te.lle;
    if (s.frailty.family != FrailtyFamily::MixtureNormal)
      t[{s.id, EstimandKind::FrailtyVar}] = s.frailty.theta;
  }
  return t;
}

SummaryReport summarize(const std::vector<ReplicationRecord>& records, const TruthTable& truths,
                        const std::map<std::string, FrailtyFamily>& frailty_families,
                        double filter_alarm) {
  using Key = std::tuple<std::string, std::string, int>;
  std::map<Key, std::vector<ReplicationRecord>> cells;
  for (const auto& r : records)
    cells[{r.scenario_id, r.model_id, estimand_rank(r.estimand)}].push_back(r);

  SummaryReport report;
  for (const auto& [key, cell] : cells) {
    const auto& [sid, mid, rank] = key;
    const EstimandKind kind = cell.front().estimand;
    if (kind == EstimandKind::FrailtyVar) {
      const auto fam = frailty_families.find(sid);
      if (fam == frailty_families.end() ||
          !frailty_comparable(fam->second, ModelSpec::parse(mid).frailty))
        continue;
    }
    const auto truth = truths.find({sid, kind});
    if (truth == truths.end()) continue;
    try {
      PerformanceSummary p = performance(cell, truth->second);
      if (p.filtered_fraction > filter_alarm) {
        report.warnings.push_back(sid + " / " + mid + " / " + to_string(kind) + ": filtered " +
                                  std::to_string(p.filtered_fraction * 100.0) + "% of replications");
      }
      report.rows.push_back(std::move(p));
    } catch (const NumericError&) {
      report.nonconverged_cells.emplace_back(sid, mid, kind);
    }
  }
  return report;
}

}  // namespace frailsim
