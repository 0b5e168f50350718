#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "frailsim/errors.hpp"
#include "frailsim/harness.hpp"

using namespace frailsim;
using doctest::Approx;

namespace {

ReplicationRecord rec(int rep, double est, double se = 0.1, bool converged = true) {
  ReplicationRecord r;
  r.scenario_id = "s";
  r.model_id = "exp-gamma";
  r.rep = rep;
  r.estimand = EstimandKind::LogHR;
  r.estimate = est;
  r.se = se;
  r.converged = converged;
  return r;
}

std::vector<ReplicationRecord> noisy(int n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-0.6, -0.4), v(0.09, 0.11);
  std::vector<ReplicationRecord> out;
  for (int i = 0; i < n; ++i) out.push_back(rec(i, u(g), v(g)));
  return out;
}

bool same_records(const std::vector<ReplicationRecord>& a, const std::vector<ReplicationRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    const bool est_eq = (std::isnan(x.estimate) && std::isnan(y.estimate)) || x.estimate == y.estimate;
    const bool se_eq = (std::isnan(x.se) && std::isnan(y.se)) || x.se == y.se;
    if (x.scenario_id != y.scenario_id || x.model_id != y.model_id || x.rep != y.rep ||
        x.estimand != y.estimand || !est_eq || !se_eq || x.converged != y.converged)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("filter removes exactly the gross outlier") {
  auto r = noisy(100, 1);
  r.push_back(rec(100, 1e6));
  filter_convergence(r);
  for (int i = 0; i < 100; ++i) CHECK_FALSE(r[i].filtered);
  CHECK(r[100].filtered);
}

TEST_CASE("filter keeps everything when the IQR is zero") {
  std::vector<ReplicationRecord> r;
  for (int i = 0; i < 30; ++i) r.push_back(rec(i, -0.5, 0.2));
  filter_convergence(r);
  for (const auto& x : r) CHECK_FALSE(x.filtered);
}

TEST_CASE("filter boundary is strict") {
  // estimates -0.5 + k*0.001: extremes chosen so median and IQR are unchanged
  std::vector<double> base;
  for (int k = -20; k <= 20; ++k) base.push_back(-0.5 + k * 0.001);
  auto make = [&](double extra_low, double extra_high) {
    std::vector<ReplicationRecord> r;
    for (std::size_t i = 0; i < base.size(); ++i) r.push_back(rec(int(i), base[i], 0.1));
    r.push_back(rec(1000, extra_low, 0.1));
    r.push_back(rec(1001, extra_high, 0.1));
    return r;
  };
  auto probe = make(-10.0, 10.0);
  std::vector<double> est;
  for (const auto& x : probe) est.push_back(x.estimate);
  std::sort(est.begin(), est.end());
  const double med = quantile_type7(est, 0.5);
  const double iqr = quantile_type7(est, 0.75) - quantile_type7(est, 0.25);
  REQUIRE(med == Approx(-0.5).epsilon(1e-12));

  auto r = make(med - 10.0 * iqr, med + 10.5 * iqr);
  filter_convergence(r);
  CHECK_FALSE(r[r.size() - 2].filtered);
  CHECK(r.back().filtered);
}

TEST_CASE("filter works per estimand and ignores non-converged records") {
  auto r = noisy(50, 2);
  auto lle = noisy(50, 3);
  for (auto& x : lle) x.estimand = EstimandKind::LLE;
  lle[7].estimate = 500.0;
  r.insert(r.end(), lle.begin(), lle.end());
  r.push_back(rec(60, NAN, NAN, false));
  filter_convergence(r);
  CHECK(r[50 + 7].filtered);
  CHECK_FALSE(r[7].filtered);
  CHECK_FALSE(r.back().filtered);
}

TEST_CASE("filter flags standard-error outliers") {
  auto r = noisy(60, 4);
  r[3].se = 40.0;
  filter_convergence(r);
  CHECK(r[3].filtered);
}

TEST_CASE("performance of perfect estimates") {
  std::vector<ReplicationRecord> r;
  for (int i = 0; i < 20; ++i) r.push_back(rec(i, -0.5, 1.0));
  const auto p = performance(r, -0.5);
  CHECK(p.bias == 0.0);
  CHECK(p.mse == 0.0);
  CHECK(p.coverage == 1.0);
  CHECK(p.convergence_rate == 1.0);
}

TEST_CASE("coverage Monte Carlo standard error") {
  CHECK(coverage_mcse(0.95, 1000) == Approx(0.0068).epsilon(0.01));
  CHECK(coverage_mcse(0.5, 1000) == Approx(0.0158).epsilon(0.01));
  CHECK(coverage_mcse(0.95, 1000) == Approx(std::sqrt(0.95 * 0.05 / 1000)).epsilon(1e-15));
}

TEST_CASE("performance needs two usable records") {
  std::vector<ReplicationRecord> r{rec(0, -0.5), rec(1, NAN, NAN, false)};
  CHECK_THROWS_AS(performance(r, -0.5), NumericError);
}

TEST_CASE("performance identities and exclusions") {
  auto r = noisy(200, 5);
  r[10].converged = false;
  r[10].estimate = NAN;
  r[11].filtered = true;
  r[11].estimate = 99.0;
  const auto p = performance(r, -0.52);
  CHECK(p.n_total == 200);
  CHECK(p.n_used == 198);
  CHECK(p.filtered_fraction == Approx(0.005));
  const double n = p.n_used;
  CHECK(p.bias * p.bias + p.empirical_se * p.empirical_se * (n - 1) / n == Approx(p.mse).epsilon(1e-12));
  CHECK(p.mse >= p.bias * p.bias);
  CHECK(p.coverage >= 0.0);
  CHECK(p.coverage <= 1.0);
  CHECK(p.coverage_mcse == Approx(coverage_mcse(p.coverage, p.n_used)));
  CHECK(p.bias_mcse == Approx(p.empirical_se / std::sqrt(n)));

  auto shuffled = r;
  std::mt19937_64 g(9);
  std::shuffle(shuffled.begin(), shuffled.end(), g);
  const auto q = performance(shuffled, -0.52);
  CHECK(q.bias == p.bias);
  CHECK(q.mse == p.mse);
  CHECK(q.empirical_se == p.empirical_se);
  CHECK(q.coverage == p.coverage);
}

TEST_CASE("coverage counts the Wald interval") {
  std::vector<ReplicationRecord> r{rec(0, 0.0, 1.0), rec(1, 1.95, 1.0), rec(2, 1.97, 1.0), rec(3, -3.0, 1.0)};
  CHECK(performance(r, 0.0).coverage == 0.5);
}

TEST_CASE("run_cell produces n_sim replications per estimand") {
  const auto s = grid_scenario("exp-gamma-0.25-20x150");
  const auto m = ModelSpec::parse("exp-gamma");
  const auto a = run_cell(s, m, 10, 42);
  REQUIRE(a.size() == 30);
  for (auto kind : kRecordedEstimands) {
    std::vector<int> reps;
    for (const auto& r : a)
      if (r.estimand == kind) reps.push_back(r.rep);
    CHECK(reps.size() == 10);
    std::sort(reps.begin(), reps.end());
    CHECK(std::unique(reps.begin(), reps.end()) == reps.end());
  }
  for (const auto& r : a) {
    CHECK(r.scenario_id == s.id);
    CHECK(r.model_id == "exp-gamma");
    if (!r.converged) CHECK(std::isnan(r.estimate));
  }
  CHECK(same_records(a, run_cell(s, m, 10, 42)));
  CHECK_FALSE(same_records(a, run_cell(s, m, 10, 43)));
}

TEST_CASE("records do not depend on the worker count") {
  const std::vector<Scenario> scen{grid_scenario("wei-lognormal-0.75-20x150"),
                                   grid_scenario("gom-gamma-1.25-750x2")};
  const std::vector<ModelSpec> models{ModelSpec::parse("exp-gamma"), ModelSpec::parse("rp3-lognormal")};
  HarnessOptions one, three;
  three.workers = 3;
  const auto a = run_grid(scen, models, 4, 7, one);
  const auto b = run_grid(scen, models, 4, 7, three);
  CHECK(a.size() == 2 * 2 * 4 * 3);
  CHECK(same_records(a, b));
}

TEST_CASE("truth table and frailty comparability") {
  const std::vector<Scenario> scen{grid_scenario("exp-gamma-0.25-20x150"),
                                   grid_scenario("exp-mixnormal-0.25-20x150")};
  const auto t = compute_truths(scen);
  CHECK(t.at({"exp-gamma-0.25-20x150", EstimandKind::LogHR}) == -0.5);
  CHECK(t.at({"exp-gamma-0.25-20x150", EstimandKind::FrailtyVar}) == 0.25);
  CHECK(t.count({"exp-mixnormal-0.25-20x150", EstimandKind::FrailtyVar}) == 0);
  CHECK(t.at({"exp-mixnormal-0.25-20x150", EstimandKind::LLE}) > 0.0);
  CHECK(frailty_comparable(FrailtyFamily::Gamma, FrailtyFamily::Gamma));
  CHECK_FALSE(frailty_comparable(FrailtyFamily::Gamma, FrailtyFamily::LogNormal));
  CHECK_FALSE(frailty_comparable(FrailtyFamily::MixtureNormal, FrailtyFamily::LogNormal));
}

TEST_CASE("summaries skip misspecified frailty variance and warn on heavy filtering") {
  std::vector<ReplicationRecord> r;
  for (const char* model : {"exp-gamma", "exp-lognormal"}) {
    for (auto kind : kRecordedEstimands) {
      auto cell = noisy(40, 11);
      for (auto& x : cell) {
        x.model_id = model;
        x.estimand = kind;
      }
      r.insert(r.end(), cell.begin(), cell.end());
    }
  }
  for (int i = 0; i < 3; ++i) r[i].filtered = true;  // 3 of 40 LogHR records for exp-gamma
  TruthTable truths{{{"s", EstimandKind::LogHR}, -0.5},
                    {{"s", EstimandKind::LLE}, -0.5},
                    {{"s", EstimandKind::FrailtyVar}, 0.25}};
  const auto rep = summarize(r, truths, {{"s", FrailtyFamily::Gamma}});
  CHECK(rep.rows.size() == 5);
  int fv_rows = 0;
  for (const auto& p : rep.rows)
    if (p.estimand == EstimandKind::FrailtyVar) {
      ++fv_rows;
      CHECK(p.model_id == "exp-gamma");
    }
  CHECK(fv_rows == 1);
  REQUIRE(rep.warnings.size() == 1);
  CHECK(rep.warnings[0].find("exp-gamma") != std::string::npos);
  CHECK(rep.nonconverged_cells.empty());
}

TEST_CASE("cells without usable fits are reported, not summarized") {
  std::vector<ReplicationRecord> r{rec(0, NAN, NAN, false), rec(1, NAN, NAN, false)};
  const auto rep = summarize(r, {{{"s", EstimandKind::LogHR}, -0.5}}, {{"s", FrailtyFamily::Gamma}});
  CHECK(rep.rows.empty());
  CHECK(rep.nonconverged_cells.size() == 1);
}
