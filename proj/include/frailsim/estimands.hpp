#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "frailsim/fitter.hpp"
#include "frailsim/hazard.hpp"
#include "frailsim/simulator.hpp"
#include "frailsim/spline.hpp"

namespace frailsim {

/// Spline baseline with log H0(t) = gamma0 + sum_k gamma_k b_k(log t).
struct SplineBaseline {
  SplineBasis basis;
  std::vector<double> coef;  // gamma0 .. gamma_df
};

/// Anything with a baseline, a treatment log hazard ratio and a frailty law:
/// either a fitted model or a data-generating mechanism.
struct SurvivalModel {
  std::variant<BaselineHazard, SplineBaseline> baseline;
  double beta = 0.0;
  FrailtySpec frailty;
  int gh_nodes = 15;

  /// Conditional (frailty = 1) cumulative hazard for covariate x.
  double cumhaz(double t, int x) const;
};

SurvivalModel model_from_params(const ModelSpec& m, std::span<const double> params,
                                const std::optional<SplineBasis>& basis);
SurvivalModel model_from_fit(const FitResult& f);
SurvivalModel true_model(const Scenario& s);

/// Population (frailty-averaged) survival at t for covariate x.
double marginal_survival(const SurvivalModel& m, double t, int x);

struct LifeExpectancyOptions {
  int grid_points = 1000;
  double tol = 1e-12;
};

/// Restricted mean survival over [0, horizon]: marginal survival on a grid
/// t_k = horizon (k/(n-1))^2, natural interpolating spline, then tanh-sinh integration.
double life_expectancy(const SurvivalModel& m, int x, double horizon,
                       const LifeExpectancyOptions& opts = {});

/// LE(x = 1) - LE(x = 0); positive when treatment is protective.
double lle(const SurvivalModel& m, double horizon, const LifeExpectancyOptions& opts = {});

enum class EstimandKind { LogHR, HR, LLE, FrailtyVar };

std::string to_string(EstimandKind kind);

struct EstimandResult {
  EstimandKind name;
  double estimate;
  double se;
  double lo;
  double hi;
};

inline constexpr double kWaldZ = 1.959964;

using ParamFunctional = std::function<double(std::span<const double>)>;

/// Numerical delta method on the canonical parameter scale.
double delta_method_se(const FitResult& f, const ParamFunctional& functional);

EstimandResult estimate_log_hr(const FitResult& f);
EstimandResult estimate_hr(const FitResult& f);
EstimandResult estimate_lle(const FitResult& f, double horizon = 5.0);
EstimandResult estimate_frailty_var(const FitResult& f);

struct TrueEstimands {
  double beta;
  double lle;
};

/// Ground truth for a scenario: beta by construction, LLE from the true
/// marginal survival on a 4000-point grid.
TrueEstimands true_estimands(const Scenario& s, double horizon = 5.0);

}  // namespace frailsim
