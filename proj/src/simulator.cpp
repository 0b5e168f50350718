#include "frailsim/simulator.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "frailsim/errors.hpp"

namespace frailsim {

void Scenario::validate() const {
  baseline.validate();
  frailty.validate();
  if (n_clusters < 1 || cluster_size < 1) throw ConfigError("scenario " + id + ": empty design");
  if (!(treat_prob >= 0.0 && treat_prob <= 1.0))
    throw ConfigError("scenario " + id + ": treat_prob outside [0, 1]");
  if (!(censor_time > 0.0) || !std::isfinite(beta))
    throw ConfigError("scenario " + id + ": censor_time must be > 0 and beta finite");
}

std::size_t ClusteredDataset::n_events() const {
  std::size_t d = 0;
  for (const auto& r : rows) d += static_cast<std::size_t>(r.event);
  return d;
}

double simulate_time(const BaselineHazard& b, double alpha, int x, double beta, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("simulate_time: u must lie in (0, 1)");
  if (!(alpha > 0.0)) throw DomainError("simulate_time: frailty must be > 0");
  return inverse_cumulative_hazard(b, -std::log(u) / (alpha * std::exp(x * beta)));
}

double quantize_time(double t) {
  if (!std::isfinite(t)) return t;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", t);
  return std::strtod(buf, nullptr);
}

ClusteredDataset generate_dataset(const Scenario& s, std::uint64_t seed) {
  return generate_dataset(s, seed, nullptr);
}

ClusteredDataset generate_dataset(const Scenario& s, std::uint64_t seed,
                                  std::vector<FrailtyDraw>* frailties) {
  s.validate();
  ClusteredDataset data;
  data.scenario_id = s.id;
  data.seed = seed;
  data.rows.reserve(static_cast<std::size_t>(s.n_clusters) * s.cluster_size);
  if (frailties != nullptr) frailties->clear();

  const CounterStream root(combine_key(seed, hash_string(s.id)));
  for (int c = 0; c < s.n_clusters; ++c) {
    CounterStream rng = root.split(static_cast<std::uint64_t>(c));
    const FrailtyDraw frailty = sample_frailty(s.frailty, rng);
    if (frailties != nullptr) frailties->push_back(frailty);
    for (int j = 0; j < s.cluster_size; ++j) {
      const int treat = rng.uniform_open() < s.treat_prob ? 1 : 0;
      const double u = rng.uniform_open();
      const double latent = quantize_time(simulate_time(s.baseline, frailty.alpha, treat, s.beta, u));
      // A latent time equal to the horizon counts as censored.
      const bool event = latent < s.censor_time;
      data.rows.push_back({c + 1, event ? latent : s.censor_time, event ? 1 : 0, treat});
    }
  }
  return data;
}

std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& scenario_id, int rep) {
  return combine_key(combine_key(master_seed, hash_string(scenario_id)),
                     static_cast<std::uint64_t>(rep));
}

BaselineHazard standard_baseline(const std::string& code) {
  if (code == "exp") return BaselineHazard::exponential(0.5);
  if (code == "wei") return BaselineHazard::weibull(0.5, 0.8);
  if (code == "gom") return BaselineHazard::gompertz(0.5, 0.2);
  if (code == "ww1") return BaselineHazard::mixture(0.3, 0.5, 1.5, 2.5, 0.7);
  if (code == "ww2") return BaselineHazard::mixture(0.5, 0.5, 1.3, 0.7, 0.5);
  throw ConfigError("unknown baseline code '" + code + "'");
}

namespace {

constexpr std::array<const char*, 5> kBaselines{"exp", "wei", "gom", "ww1", "ww2"};
constexpr std::array<FrailtyFamily, 3> kFrailties{FrailtyFamily::Gamma, FrailtyFamily::LogNormal,
                                                  FrailtyFamily::MixtureNormal};
constexpr std::array<double, 3> kThetas{0.25, 0.75, 1.25};
constexpr std::array<std::pair<int, int>, 2> kSizes{{{750, 2}, {20, 150}}};

std::string theta_label(double theta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", theta);
  return buf;
}

}  // namespace

std::vector<Scenario> scenario_grid() {
  std::vector<Scenario> out;
  for (const char* code : kBaselines) {
    for (FrailtyFamily family : kFrailties) {
      for (double theta : kThetas) {
        for (auto [clusters, size] : kSizes) {
          Scenario s;
          s.baseline_code = code;
          s.baseline = standard_baseline(code);
          s.frailty = {family, theta};
          s.n_clusters = clusters;
          s.cluster_size = size;
          s.id = std::string(code) + "-" + to_string(family) + "-" + theta_label(theta) + "-" +
                 std::to_string(clusters) + "x" + std::to_string(size);
          out.push_back(std::move(s));
        }
      }
    }
  }
  return out;
}

Scenario grid_scenario(const std::string& id) {
  for (Scenario& s : scenario_grid())
    if (s.id == id) return s;
  throw ConfigError("unknown scenario id '" + id + "'");
}

}  // namespace frailsim
