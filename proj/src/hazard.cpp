#include "frailsim/hazard.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "frailsim/errors.hpp"

namespace frailsim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

// Log-weights of the two mixture components' survival: log(pi_k) - lambda_k t^p_k.
std::pair<double, double> mixture_log_terms(const BaselineHazard& b, double t) {
  return {std::log(b.pi) - b.lambda1 * std::pow(t, b.p1),
          std::log1p(-b.pi) - b.lambda2 * std::pow(t, b.p2)};
}

// Brent's zero finder on [a, b] with f(a) <= 0 <= f(b).
template <class F>
double brent_zero(F&& f, double a, double b, double fa, double fb, double ftol) {
  double c = a, fc = fa, d = b - a, e = d;
  for (int iter = 0; iter < 500; ++iter) {
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::fabs(b);
    const double m = 0.5 * (c - b);
    if (std::fabs(fb) <= ftol && (std::fabs(m) <= tol || fb == 0.0)) return b;
    if (std::fabs(m) <= tol || fb == 0.0) return b;
    if (std::fabs(e) >= tol && std::fabs(fa) > std::fabs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0) q = -q;
      else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::fabs(tol * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = d;
      }
    } else {
      d = m;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::fabs(d) > tol ? d : (m > 0 ? tol : -tol);
    fb = f(b);
  }
  throw NumericError("inverse_cumulative_hazard: Brent iteration limit reached");
}

}  // namespace

BaselineHazard BaselineHazard::exponential(double lambda) {
  BaselineHazard b;
  b.family = HazardFamily::Exponential;
  b.lambda = lambda;
  b.validate();
  return b;
}

BaselineHazard BaselineHazard::weibull(double lambda, double p) {
  BaselineHazard b;
  b.family = HazardFamily::Weibull;
  b.lambda = lambda;
  b.shape = p;
  b.validate();
  return b;
}

BaselineHazard BaselineHazard::gompertz(double lambda, double gamma) {
  BaselineHazard b;
  b.family = HazardFamily::Gompertz;
  b.lambda = lambda;
  b.shape = gamma;
  b.validate();
  return b;
}

BaselineHazard BaselineHazard::mixture(double lambda1, double lambda2, double p1, double p2,
                                       double pi) {
  BaselineHazard b;
  b.family = HazardFamily::WeibullWeibullMixture;
  b.lambda1 = lambda1;
  b.lambda2 = lambda2;
  b.p1 = p1;
  b.p2 = p2;
  b.pi = pi;
  b.validate();
  return b;
}

void BaselineHazard::validate() const {
  switch (family) {
    case HazardFamily::Exponential:
      if (!positive_finite(lambda)) throw DomainError("exponential: lambda must be > 0");
      break;
    case HazardFamily::Weibull:
      if (!positive_finite(lambda) || !positive_finite(shape))
        throw DomainError("weibull: lambda and p must be > 0");
      break;
    case HazardFamily::Gompertz:
      if (!positive_finite(lambda) || !std::isfinite(shape))
        throw DomainError("gompertz: lambda must be > 0 and gamma finite");
      break;
    case HazardFamily::WeibullWeibullMixture:
      if (!positive_finite(lambda1) || !positive_finite(lambda2) || !positive_finite(p1) ||
          !positive_finite(p2))
        throw DomainError("mixture: scales and shapes must be > 0");
      if (!(pi > 0.0 && pi < 1.0)) throw DomainError("mixture: pi must lie in (0, 1)");
      break;
  }
}

std::string to_string(HazardFamily family) {
  switch (family) {
    case HazardFamily::Exponential: return "exponential";
    case HazardFamily::Weibull: return "weibull";
    case HazardFamily::Gompertz: return "gompertz";
    case HazardFamily::WeibullWeibullMixture: return "weibull-weibull";
  }
  return "?";
}

double hazard(const BaselineHazard& b, double t) {
  if (!(t >= 0.0)) throw DomainError("hazard: t must be >= 0");
  double h = 0.0;
  switch (b.family) {
    case HazardFamily::Exponential:
      h = b.lambda;
      break;
    case HazardFamily::Weibull:
      h = b.lambda * b.shape * std::pow(t, b.shape - 1.0);
      break;
    case HazardFamily::Gompertz:
      h = b.lambda * std::exp(b.shape * t);
      break;
    case HazardFamily::WeibullWeibullMixture: {
      const auto [w1, w2] = mixture_log_terms(b, t);
      const double m = std::max(w1, w2);
      const double e1 = std::exp(w1 - m);
      const double e2 = std::exp(w2 - m);
      const double a1 = b.lambda1 * b.p1 * std::pow(t, b.p1 - 1.0);
      const double a2 = b.lambda2 * b.p2 * std::pow(t, b.p2 - 1.0);
      h = (e1 * a1 + e2 * a2) / (e1 + e2);
      break;
    }
  }
  if (!std::isfinite(h)) throw DomainError("hazard: non-finite value at t = " + std::to_string(t));
  return h;
}

double cumulative_hazard(const BaselineHazard& b, double t) {
  if (!(t >= 0.0)) throw DomainError("cumulative_hazard: t must be >= 0");
  switch (b.family) {
    case HazardFamily::Exponential:
      return b.lambda * t;
    case HazardFamily::Weibull:
      return b.lambda * std::pow(t, b.shape);
    case HazardFamily::Gompertz: {
      const double gt = b.shape * t;
      if (std::fabs(gt) < 1e-8) return b.lambda * t * (1.0 + 0.5 * gt + gt * gt / 6.0);
      return b.lambda * std::expm1(gt) / b.shape;
    }
    case HazardFamily::WeibullWeibullMixture: {
      if (t == 0.0) return 0.0;
      const auto [w1, w2] = mixture_log_terms(b, t);
      const double m = std::max(w1, w2);
      return -(m + std::log(std::exp(w1 - m) + std::exp(w2 - m)));
    }
  }
  return 0.0;
}

double inverse_cumulative_hazard(const BaselineHazard& b, double u) {
  if (!(u >= 0.0)) throw DomainError("inverse_cumulative_hazard: target must be >= 0");
  if (u == 0.0) return 0.0;
  if (std::isinf(u)) return kInf;
  switch (b.family) {
    case HazardFamily::Exponential:
      return u / b.lambda;
    case HazardFamily::Weibull:
      return std::pow(u / b.lambda, 1.0 / b.shape);
    case HazardFamily::Gompertz: {
      const double z = b.shape * u / b.lambda;
      if (z <= -1.0) return kInf;  // defective: H is bounded by -lambda / gamma
      if (std::fabs(z) < 1e-8) return u / b.lambda * (1.0 - 0.5 * z + z * z / 3.0);
      return std::log1p(z) / b.shape;
    }
    case HazardFamily::WeibullWeibullMixture:
      break;
  }

  auto f = [&](double t) { return cumulative_hazard(b, t) - u; };
  double lo = 1e-12, hi = 1.0;
  double flo = f(lo), fhi = f(hi);
  int steps = 0;
  while (flo > 0.0) {
    if (++steps > 200) throw NumericError("inverse_cumulative_hazard: bracket growth failed");
    hi = lo;
    fhi = flo;
    lo *= 0.5;
    flo = f(lo);
  }
  while (fhi < 0.0) {
    if (++steps > 200) throw NumericError("inverse_cumulative_hazard: bracket growth failed");
    lo = hi;
    flo = fhi;
    hi *= 2.0;
    fhi = f(hi);
  }
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  return brent_zero(f, lo, hi, flo, fhi, 1e-10 * std::max(1.0, u));
}

std::string to_string(FrailtyFamily family) {
  switch (family) {
    case FrailtyFamily::Gamma: return "gamma";
    case FrailtyFamily::LogNormal: return "lognormal";
    case FrailtyFamily::MixtureNormal: return "mixnormal";
  }
  return "?";
}

std::array<double, 2> FrailtySpec::mixture_means() const {
  const double m = 3.0 * std::sqrt(theta);
  return {-m, m};
}

void FrailtySpec::validate() const {
  if (!positive_finite(theta)) throw DomainError("frailty variance must be > 0");
}

FrailtyDraw sample_frailty(const FrailtySpec& spec, CounterStream& rng) {
  switch (spec.family) {
    case FrailtyFamily::Gamma: {
      std::gamma_distribution<double> gamma(1.0 / spec.theta, spec.theta);
      const double alpha = gamma(rng);
      return {alpha, std::log(alpha)};
    }
    case FrailtyFamily::LogNormal: {
      std::normal_distribution<double> normal(0.0, std::sqrt(spec.theta));
      const double eta = normal(rng);
      return {std::exp(eta), eta};
    }
    case FrailtyFamily::MixtureNormal: {
      const auto means = spec.mixture_means();
      const std::size_t g = rng.uniform_open() < FrailtySpec::mixture_weights[0] ? 0 : 1;
      std::normal_distribution<double> normal(means[g], std::sqrt(spec.theta));
      const double eta = normal(rng);
      return {std::exp(eta), eta};
    }
  }
  return {1.0, 0.0};
}

double gamma_marginal_survival(double cumhaz, double theta) {
  if (!(cumhaz >= 0.0) || !(theta > 0.0))
    throw DomainError("gamma_marginal_survival: need H >= 0 and theta > 0");
  if (theta < 1e-8) {
    const double h = cumhaz;
    return std::exp(-h + 0.5 * theta * h * h - theta * theta * h * h * h / 3.0);
  }
  return std::exp(-std::log1p(theta * cumhaz) / theta);
}

}  // namespace frailsim
