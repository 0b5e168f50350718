#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "frailsim/hazard.hpp"

namespace frailsim {

struct Scenario {
  std::string id;
  std::string baseline_code;  // exp | wei | gom | ww1 | ww2 | custom
  BaselineHazard baseline;
  FrailtySpec frailty;
  int n_clusters = 20;
  int cluster_size = 150;
  double beta = -0.5;
  double treat_prob = 0.5;
  double censor_time = 5.0;

  void validate() const;
};

struct SubjectRow {
  std::int64_t cluster;
  double time;
  int event;
  int treat;

  bool operator==(const SubjectRow&) const = default;
};

struct ClusteredDataset {
  std::vector<SubjectRow> rows;
  std::string scenario_id;
  std::uint64_t seed = 0;

  std::size_t n_events() const;
};

/// Latent event time by inversion: H0^{-1}(-log(u) / (alpha e^{x beta})).
double simulate_time(const BaselineHazard& b, double alpha, int x, double beta, double u);

/// Rounds to 12 significant digits, the precision of the dataset CSV.
double quantize_time(double t);

/// Generates one dataset. Each cluster draws from its own counter stream
/// keyed by (scenario id, seed, cluster index), so output does not depend on
/// evaluation order. Times are quantized to 12 significant digits.
ClusteredDataset generate_dataset(const Scenario& s, std::uint64_t seed);

/// Same as generate_dataset, additionally returning the per-cluster frailty.
ClusteredDataset generate_dataset(const Scenario& s, std::uint64_t seed,
                                  std::vector<FrailtyDraw>* frailties);

/// Seed of replicate `rep` of scenario `scenario_id` under a master seed.
std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& scenario_id, int rep);

/// Named baselines: exp, wei, gom, ww1, ww2.
BaselineHazard standard_baseline(const std::string& code);

/// The 90-scenario grid. Order: baseline (exp, wei, gom, ww1, ww2), then
/// frailty (gamma, lognormal, mixnormal), then theta (0.25, 0.75, 1.25),
/// then size (750x2, 20x150). Ids look like "ww2-gamma-0.75-20x150".
std::vector<Scenario> scenario_grid();

/// Builds a grid scenario from its id; throws ConfigError when unknown.
Scenario grid_scenario(const std::string& id);

}  // namespace frailsim
