#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "frailsim/errors.hpp"
#include "frailsim/simulator.hpp"
#include "km.hpp"

using namespace frailsim;
using doctest::Approx;

TEST_CASE("simulate_time examples") {
  const auto e = BaselineHazard::exponential(0.5);
  CHECK(simulate_time(e, 1.0, 0, -0.5, std::exp(-1.0)) == Approx(2.0).epsilon(1e-15));
  CHECK(simulate_time(BaselineHazard::weibull(0.5, 0.8), 1.0, 0, -0.5, std::exp(-0.5)) ==
        Approx(1.0).epsilon(1e-15));
  CHECK(simulate_time(e, 2.0, 1, -0.5, std::exp(-1.0)) == Approx(std::exp(0.5)).epsilon(1e-15));
  CHECK(std::exp(0.5) == Approx(1.64872).epsilon(1e-6));
}

TEST_CASE("simulate_time rejects u outside (0, 1)") {
  const auto e = BaselineHazard::exponential(0.5);
  CHECK_THROWS_AS(simulate_time(e, 1, 0, 0, 0.0), DomainError);
  CHECK_THROWS_AS(simulate_time(e, 1, 0, 0, 1.0), DomainError);
  CHECK_THROWS_AS(simulate_time(e, 0, 0, 0, 0.5), DomainError);
}

TEST_CASE("times round-trip through 12 significant digits") {
  CHECK(quantize_time(1.0 / 3.0) == 0.333333333333);
  CHECK(quantize_time(2.0) == 2.0);
  CHECK(quantize_time(quantize_time(0.123456789012345)) == quantize_time(0.123456789012345));
}

TEST_CASE("750x2 scenario shape") {
  const auto s = grid_scenario("wei-gamma-0.75-750x2");
  const auto d = generate_dataset(s, 42);
  CHECK(d.rows.size() == 1500);
  std::map<std::int64_t, int> sizes;
  for (const auto& r : d.rows) ++sizes[r.cluster];
  CHECK(sizes.size() == 750);
  for (const auto& [c, n] : sizes) CHECK(n == 2);
  CHECK(sizes.begin()->first == 1);
  CHECK(d.scenario_id == s.id);
  CHECK(d.seed == 42);
}

TEST_CASE("generation is deterministic given scenario and seed") {
  const auto s = grid_scenario("ww1-lognormal-1.25-20x150");
  const auto a = generate_dataset(s, 7), b = generate_dataset(s, 7), c = generate_dataset(s, 8);
  CHECK(a.rows == b.rows);
  CHECK_FALSE(a.rows == c.rows);
}

TEST_CASE("event indicator consistency and time range") {
  for (const auto& s : scenario_grid()) {
    const auto d = generate_dataset(s, 1234);
    for (const auto& r : d.rows) {
      REQUIRE(r.time > 0.0);
      REQUIRE(r.time <= s.censor_time);
      REQUIRE((r.event == 0) == (r.time == s.censor_time));
    }
  }
}

TEST_CASE("a shared frailty drives every member of a cluster") {
  Scenario s = grid_scenario("ww2-mixnormal-0.75-20x150");
  const std::uint64_t seed = 77;
  std::vector<FrailtyDraw> frailties;
  const auto d = generate_dataset(s, seed, &frailties);
  REQUIRE(frailties.size() == 20);

  // Replay each cluster's stream: one frailty draw, then (treat, u) per member.
  const CounterStream root(combine_key(seed, hash_string(s.id)));
  for (int c = 0; c < s.n_clusters; ++c) {
    CounterStream rng = root.split(static_cast<std::uint64_t>(c));
    const auto f = sample_frailty(s.frailty, rng);
    CHECK(f.alpha == frailties[c].alpha);
    for (int j = 0; j < s.cluster_size; ++j) {
      const auto& row = d.rows[static_cast<std::size_t>(c) * s.cluster_size + j];
      const int treat = rng.uniform_open() < s.treat_prob ? 1 : 0;
      const double t = quantize_time(simulate_time(s.baseline, f.alpha, treat, s.beta, rng.uniform_open()));
      CHECK(row.treat == treat);
      CHECK(row.time == std::min(t, s.censor_time));
    }
  }
}

TEST_CASE("pooled treatment fraction is balanced") {
  Scenario s = grid_scenario("exp-gamma-0.25-20x150");
  s.id = "balance";
  s.n_clusters = 5000;
  s.cluster_size = 200;
  const auto d = generate_dataset(s, 5);
  double treated = 0;
  for (const auto& r : d.rows) treated += r.treat;
  CHECK(std::fabs(treated / d.rows.size() - 0.5) <= 0.002);
}

TEST_CASE("control-arm Kaplan-Meier tracks the analytic marginal survival") {
  Scenario s = grid_scenario("exp-gamma-0.25-750x2");
  s.id = "km-check";
  s.n_clusters = 25000;
  const auto d = generate_dataset(s, 20240101);
  for (double t : {1.0, 2.0, 3.0, 4.0}) {
    const auto km = testing::kaplan_meier(d, 0, t);
    const double truth = std::pow(1 + 0.25 * 0.5 * t, -1 / 0.25);
    CAPTURE(t);
    CHECK(std::fabs(km.survival - truth) <= 2.5758 * km.se);
  }
}

TEST_CASE("scenario grid") {
  const auto grid = scenario_grid();
  CHECK(grid.size() == 90);
  std::map<std::string, int> per_baseline;
  std::set<std::string> ids;
  std::set<std::tuple<std::string, FrailtyFamily, double, int, int>> cells;
  for (const auto& s : grid) {
    ++per_baseline[s.baseline_code];
    ids.insert(s.id);
    cells.emplace(s.baseline_code, s.frailty.family, s.frailty.theta, s.n_clusters, s.cluster_size);
    CHECK((s.frailty.theta == 0.25 || s.frailty.theta == 0.75 || s.frailty.theta == 1.25));
    const bool size_ok = (s.n_clusters == 750 && s.cluster_size == 2) ||
                         (s.n_clusters == 20 && s.cluster_size == 150);
    CHECK(size_ok);
    CHECK(s.beta == -0.5);
    CHECK(s.treat_prob == 0.5);
    CHECK(s.censor_time == 5.0);
    CHECK(grid_scenario(s.id).id == s.id);
  }
  CHECK(ids.size() == 90);
  CHECK(cells.size() == 90);
  CHECK(per_baseline.size() == 5);
  for (const auto& [code, n] : per_baseline) CHECK(n == 18);
  CHECK(grid.front().id == "exp-gamma-0.25-750x2");
  CHECK(grid.back().id == "ww2-mixnormal-1.25-20x150");
}

TEST_CASE("named baselines") {
  const auto ww1 = standard_baseline("ww1");
  CHECK(ww1.lambda1 == 0.3);
  CHECK(ww1.lambda2 == 0.5);
  CHECK(ww1.p1 == 1.5);
  CHECK(ww1.p2 == 2.5);
  CHECK(ww1.pi == 0.7);
  CHECK(standard_baseline("gom").shape == 0.2);
  CHECK_THROWS_AS(standard_baseline("llogis"), ConfigError);
  CHECK_THROWS_AS(grid_scenario("exp-gamma-0.50-750x2"), ConfigError);
}

TEST_CASE("derived seeds separate scenarios and replications") {
  std::set<std::uint64_t> seen;
  for (const auto& s : scenario_grid())
    for (int r = 0; r < 20; ++r) seen.insert(derive_seed(1, s.id, r));
  CHECK(seen.size() == 90 * 20);
  CHECK(derive_seed(1, "a", 0) == derive_seed(1, "a", 0));
  CHECK(derive_seed(1, "a", 0) != derive_seed(2, "a", 0));
}

TEST_CASE("scenario validation") {
  Scenario s = grid_scenario("exp-gamma-0.25-750x2");
  s.n_clusters = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = grid_scenario("exp-gamma-0.25-750x2");
  s.treat_prob = 1.5;
  CHECK_THROWS_AS(generate_dataset(s, 1), ConfigError);
}
