#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "frailsim/harness.hpp"
#include "frailsim/simulator.hpp"

namespace frailsim::io {

// Dataset CSV: header `cluster,time,event,treat`, times with 12 significant digits.
void write_dataset_csv(const std::filesystem::path& path, const ClusteredDataset& data);
ClusteredDataset read_dataset_csv(const std::filesystem::path& path);

// JSON manifest describing the scenario and seed behind a dataset file.
void write_manifest(const std::filesystem::path& path, const Scenario& s, std::uint64_t seed,
                    int rep);

// Results CSV: `scenario_id,model_id,rep,estimand,estimate,se,converged,filtered`.
inline constexpr const char* kResultsHeader =
    "scenario_id,model_id,rep,estimand,estimate,se,converged,filtered";
void write_results_csv(const std::filesystem::path& path,
                       const std::vector<ReplicationRecord>& records);
std::vector<ReplicationRecord> read_results_csv(const std::filesystem::path& path);

inline constexpr const char* kSummaryHeader =
    "scenario_id,model_id,estimand,n_total,n_used,truth,bias,bias_mcse,coverage,coverage_mcse,"
    "mse,mse_mcse,empirical_se,mean_model_se,convergence_rate,filtered_fraction";
void write_summary_csv(const std::filesystem::path& path,
                       const std::vector<PerformanceSummary>& rows);

/// Per-scenario metadata and truth, written next to the results so that
/// `summarize` can rebuild summaries without the original configuration.
struct ScenarioInfo {
  std::string id;
  std::string baseline;
  FrailtyFamily frailty = FrailtyFamily::Gamma;
  double theta = 0.0;
  int n_clusters = 0;
  int cluster_size = 0;
};

inline constexpr const char* kScenariosHeader =
    "scenario_id,baseline,frailty,theta,n_clusters,cluster_size,true_loghr,true_lle,"
    "true_frailty_var";
void write_scenarios_csv(const std::filesystem::path& path, const std::vector<Scenario>& scenarios,
                         const TruthTable& truths);
void read_scenarios_csv(const std::filesystem::path& path, std::vector<ScenarioInfo>& info,
                        TruthTable& truths);

// Tidy plot data: one row per (scenario, model, estimand, measure).
inline constexpr const char* kPlotHeader =
    "scenario_id,baseline,frailty,theta,size,model,estimand,measure,value,mcse,status";
void write_plot_data(const std::filesystem::path& path, const std::vector<ScenarioInfo>& scenarios,
                     const std::vector<std::string>& models, const SummaryReport& report);

std::string format_double(double v);

}  // namespace frailsim::io
