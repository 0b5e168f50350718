#include "frailsim/estimands.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "frailsim/errors.hpp"
#include "frailsim/quadrature.hpp"

namespace frailsim {

double SurvivalModel::cumhaz(double t, int x) const {
  if (t <= 0.0) return 0.0;
  const double scale = std::exp(x * beta);
  if (const auto* b = std::get_if<BaselineHazard>(&baseline)) return cumulative_hazard(*b, t) * scale;
  const auto& sp = std::get<SplineBaseline>(baseline);
  const std::vector<double> basis = sp.basis.eval(std::log(t));
  double s = sp.coef[0];
  for (std::size_t k = 0; k < basis.size(); ++k) s += sp.coef[k + 1] * basis[k];
  return std::exp(s) * scale;
}

SurvivalModel model_from_params(const ModelSpec& m, std::span<const double> params,
                                const std::optional<SplineBasis>& basis) {
  SurvivalModel out;
  out.beta = params[m.beta_index()];
  out.frailty = {m.frailty, std::exp(params[m.frailty_index()])};
  out.gh_nodes = m.gh_nodes;
  switch (m.baseline) {
    case BaselineKind::Exponential:
      out.baseline = BaselineHazard::exponential(std::exp(params[0]));
      break;
    case BaselineKind::Weibull:
      out.baseline = BaselineHazard::weibull(std::exp(params[0]), std::exp(params[1]));
      break;
    case BaselineKind::Gompertz:
      out.baseline = BaselineHazard::gompertz(std::exp(params[0]), params[1]);
      break;
    case BaselineKind::RoystonParmar:
      if (!basis) throw DomainError("spline model requires its basis");
      out.baseline = SplineBaseline{*basis, {params.begin(), params.begin() + m.df + 1}};
      break;
  }
  return out;
}

SurvivalModel model_from_fit(const FitResult& f) {
  return model_from_params(f.model, {f.params.data(), static_cast<std::size_t>(f.params.size())},
                           f.basis);
}

SurvivalModel true_model(const Scenario& s) {
  SurvivalModel out;
  out.baseline = s.baseline;
  out.beta = s.beta;
  out.frailty = s.frailty;
  out.gh_nodes = 63;
  return out;
}

namespace {

// E[exp(-e^eta H)] for eta ~ Normal(mean, var).
double normal_frailty_survival(double cumhaz, double mean, double var, int nodes) {
  if (cumhaz == 0.0) return 1.0;
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
  auto derivs = [&](double eta) {
    const double e = std::exp(eta) * cumhaz;
    const double d = eta - mean;
    return LogDerivs{-e - 0.5 * d * d / var + log_norm, -e - d / var, -e - 1.0 / var};
  };
  return std::exp(adaptive_gh_derivs(derivs, gh_rule_cached(nodes), mean).log_integral);
}

}  // namespace

double marginal_survival(const SurvivalModel& m, double t, int x) {
  if (!(t >= 0.0)) throw DomainError("marginal_survival: t must be >= 0");
  if (t == 0.0) return 1.0;
  const double cumhaz = m.cumhaz(t, x);
  switch (m.frailty.family) {
    case FrailtyFamily::Gamma:
      return gamma_marginal_survival(cumhaz, m.frailty.theta);
    case FrailtyFamily::LogNormal:
      return normal_frailty_survival(cumhaz, 0.0, m.frailty.theta, m.gh_nodes);
    case FrailtyFamily::MixtureNormal: {
      const auto means = m.frailty.mixture_means();
      double s = 0.0;
      for (std::size_t g = 0; g < 2; ++g)
        s += FrailtySpec::mixture_weights[g] *
             normal_frailty_survival(cumhaz, means[g], m.frailty.theta, m.gh_nodes);
      return s;
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double life_expectancy(const SurvivalModel& m, int x, double horizon,
                       const LifeExpectancyOptions& opts) {
  if (!(horizon > 0.0)) throw DomainError("life_expectancy: horizon must be > 0");
  const int n = opts.grid_points;
  if (n < 4) throw DomainError("life_expectancy: need at least 4 grid points");
  std::vector<double> t(n), s(n);
  // quadratic spacing: Weibull shapes below one give S a t^p cusp at the origin
  for (int k = 0; k < n; ++k) {
    const double u = static_cast<double>(k) / (n - 1);
    t[k] = horizon * u * u;
    s[k] = marginal_survival(m, t[k], x);
  }
  t[n - 1] = horizon;
  return interp_integrate(t, s, 0.0, horizon, opts.tol);
}

double lle(const SurvivalModel& m, double horizon, const LifeExpectancyOptions& opts) {
  return life_expectancy(m, 1, horizon, opts) - life_expectancy(m, 0, horizon, opts);
}

std::string to_string(EstimandKind kind) {
  switch (kind) {
    case EstimandKind::LogHR: return "loghr";
    case EstimandKind::HR: return "hr";
    case EstimandKind::LLE: return "lle";
    case EstimandKind::FrailtyVar: return "frailty_var";
  }
  return "?";
}

double delta_method_se(const FitResult& f, const ParamFunctional& functional) {
  const Eigen::Index k = f.params.size();
  if (f.covariance.rows() != k || !f.covariance.allFinite())
    throw NumericError("delta method: covariance is not positive definite");
  Eigen::VectorXd grad(k);
  std::vector<double> p(f.params.data(), f.params.data() + k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double h = 1e-5 * (1.0 + std::fabs(f.params[i]));
    p[i] = f.params[i] + h;
    const double up = functional(p);
    p[i] = f.params[i] - h;
    const double down = functional(p);
    p[i] = f.params[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  const double var = grad.dot(f.covariance * grad);
  if (!(var >= 0.0)) throw NumericError("delta method: negative variance");
  return std::sqrt(var);
}

namespace {

EstimandResult wald(EstimandKind kind, double estimate, double se) {
  return {kind, estimate, se, estimate - kWaldZ * se, estimate + kWaldZ * se};
}

}  // namespace

EstimandResult estimate_log_hr(const FitResult& f) {
  return wald(EstimandKind::LogHR, f.beta, f.se_beta);
}

EstimandResult estimate_hr(const FitResult& f) {
  const EstimandResult log_hr = estimate_log_hr(f);
  const int bi = f.model.beta_index();
  const double se = f.covariance.allFinite()
                        ? delta_method_se(f, [bi](std::span<const double> p) { return std::exp(p[bi]); })
                        : std::numeric_limits<double>::quiet_NaN();
  // interval from the log scale, not exp(beta) +- z se
  return {EstimandKind::HR, std::exp(log_hr.estimate), se, std::exp(log_hr.lo), std::exp(log_hr.hi)};
}

EstimandResult estimate_lle(const FitResult& f, double horizon) {
  const ModelSpec& m = f.model;
  const auto& basis = f.basis;
  auto functional = [&](std::span<const double> p) {
    return lle(model_from_params(m, p, basis), horizon);
  };
  const double est = functional({f.params.data(), static_cast<std::size_t>(f.params.size())});
  return wald(EstimandKind::LLE, est, delta_method_se(f, functional));
}

EstimandResult estimate_frailty_var(const FitResult& f) {
  return wald(EstimandKind::FrailtyVar, f.frailty_var, f.se_frailty_var);
}

TrueEstimands true_estimands(const Scenario& s, double horizon) {
  LifeExpectancyOptions opts;
  opts.grid_points = 4000;
  opts.tol = 1e-8;
  return {s.beta, lle(true_model(s), horizon, opts)};
}

}  // namespace frailsim
