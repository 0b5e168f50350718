#pragma once

#include <array>
#include <string>
#include <utility>

#include "frailsim/rng.hpp"

namespace frailsim {

enum class HazardFamily { Exponential, Weibull, Gompertz, WeibullWeibullMixture };

/// Parametric baseline hazard. Weibull uses h(t) = lambda p t^(p-1); the
/// mixture is a two-component Weibull survival mixture
/// S(t) = pi exp(-lambda1 t^p1) + (1 - pi) exp(-lambda2 t^p2).
struct BaselineHazard {
  HazardFamily family = HazardFamily::Exponential;
  double lambda = 1.0;   // Exponential, Weibull, Gompertz
  double shape = 1.0;    // Weibull p, Gompertz gamma
  double lambda1 = 1.0;  // mixture
  double lambda2 = 1.0;
  double p1 = 1.0;
  double p2 = 1.0;
  double pi = 0.5;

  static BaselineHazard exponential(double lambda);
  static BaselineHazard weibull(double lambda, double p);
  static BaselineHazard gompertz(double lambda, double gamma);
  static BaselineHazard mixture(double lambda1, double lambda2, double p1, double p2, double pi);

  /// Throws DomainError when the parameters violate the family's constraints.
  void validate() const;
};

std::string to_string(HazardFamily family);

double hazard(const BaselineHazard& b, double t);
double cumulative_hazard(const BaselineHazard& b, double t);

/// Smallest t with cumulative_hazard(b, t) = u. Closed form for the
/// single-component families, Brent's method for the mixture.
double inverse_cumulative_hazard(const BaselineHazard& b, double u);

enum class FrailtyFamily { Gamma, LogNormal, MixtureNormal };

std::string to_string(FrailtyFamily family);

/// Frailty distribution with variance parameter theta. For LogNormal and
/// MixtureNormal, theta is the variance of the log-frailty (per component).
struct FrailtySpec {
  FrailtyFamily family = FrailtyFamily::Gamma;
  double theta = 0.5;

  // Mixture-Normal components: equal weights, means -/+ 3 sqrt(theta), variance theta.
  static constexpr std::array<double, 2> mixture_weights{0.5, 0.5};
  std::array<double, 2> mixture_means() const;
  double mixture_component_variance() const { return theta; }

  void validate() const;
};

struct FrailtyDraw {
  double alpha;  // multiplicative frailty
  double eta;    // log frailty
};

FrailtyDraw sample_frailty(const FrailtySpec& spec, CounterStream& rng);

/// Laplace transform of the mean-one Gamma(1/theta, 1/theta) law at H:
/// (1 + theta H)^(-1/theta), continuous at theta -> 0.
double gamma_marginal_survival(double cumhaz, double theta);

}  // namespace frailsim
