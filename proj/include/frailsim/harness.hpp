#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "frailsim/estimands.hpp"
#include "frailsim/fitter.hpp"
#include "frailsim/simulator.hpp"

namespace frailsim {

/// Estimands recorded per replication, in output order.
inline constexpr EstimandKind kRecordedEstimands[] = {EstimandKind::LogHR, EstimandKind::LLE,
                                                      EstimandKind::FrailtyVar};

struct ReplicationRecord {
  std::string scenario_id;
  std::string model_id;
  int rep = 0;
  EstimandKind estimand = EstimandKind::LogHR;
  double estimate = 0.0;  // NaN when not converged
  double se = 0.0;
  bool converged = false;
  bool filtered = false;
  double wall_time = 0.0;  // seconds spent on the fit (not persisted)
};

struct HarnessOptions {
  int workers = 1;
  double horizon = 5.0;
  FitOptions fit;
  int gh_nodes = 15;
};

/// Fits every model to replicate datasets of one scenario. Records are
/// ordered by (model, rep, estimand) and are identical for any worker count.
std::vector<ReplicationRecord> run_grid(const std::vector<Scenario>& scenarios,
                                        const std::vector<ModelSpec>& models, int n_sim,
                                        std::uint64_t master_seed, const HarnessOptions& opts = {});

std::vector<ReplicationRecord> run_cell(const Scenario& s, const ModelSpec& m, int n_sim,
                                        std::uint64_t master_seed, const HarnessOptions& opts = {});

/// Robust outlier filter: within each (scenario, model, estimand), a converged
/// record is filtered when |estimate - median| / IQR > 10 or the same holds
/// for its standard error. IQR = 0 disables the check for that column.
void filter_convergence(std::vector<ReplicationRecord>& records, double threshold = 10.0);

struct PerformanceSummary {
  std::string scenario_id;
  std::string model_id;
  EstimandKind estimand = EstimandKind::LogHR;
  int n_total = 0;
  int n_used = 0;
  double truth = 0.0;
  double bias = 0.0, bias_mcse = 0.0;
  double coverage = 0.0, coverage_mcse = 0.0;
  double mse = 0.0, mse_mcse = 0.0;
  double empirical_se = 0.0;
  double mean_model_se = 0.0;
  double convergence_rate = 0.0;
  double filtered_fraction = 0.0;
};

/// Performance of the unfiltered, converged records of a single cell.
/// Throws NumericError when fewer than two records are usable.
PerformanceSummary performance(const std::vector<ReplicationRecord>& records, double truth);

/// Coverage MCSE sqrt(c (1 - c) / n).
double coverage_mcse(double coverage, int n);

/// Truth keyed by (scenario id, estimand); a missing entry means "no truth".
using TruthTable = std::map<std::pair<std::string, EstimandKind>, double>;

/// Truth for every scenario: LogHR, LLE, and FrailtyVar (the latter only
/// meaningful for models whose frailty family matches the scenario's).
TruthTable compute_truths(const std::vector<Scenario>& scenarios, double horizon = 5.0);

/// Whether a frailty-variance summary is reported for (scenario, model).
bool frailty_comparable(FrailtyFamily scenario_family, FrailtyFamily model_family);

struct SummaryReport {
  std::vector<PerformanceSummary> rows;
  std::vector<std::string> warnings;
  std::vector<std::tuple<std::string, std::string, EstimandKind>> nonconverged_cells;
};

/// Summaries for every cell present in records (records must already be filtered).
/// `frailty_families` maps scenario id to the data frailty family.
SummaryReport summarize(const std::vector<ReplicationRecord>& records, const TruthTable& truths,
                        const std::map<std::string, FrailtyFamily>& frailty_families,
                        double filter_alarm = 0.05);

}  // namespace frailsim
