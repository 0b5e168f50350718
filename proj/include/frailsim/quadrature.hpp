#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "frailsim/errors.hpp"

namespace frailsim {

/// Gauss-Hermite rule for the weight e^{-x^2} (physicists' convention).
struct GHRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> log_weights_plus_sq;  // log(w_k) + x_k^2, used by the adaptive rule

  std::size_t size() const { return nodes.size(); }
};

/// Golub-Welsch nodes refined by Newton on the orthonormal recurrence;
/// weights from the Christoffel function. 1 <= n <= 128.
GHRule gh_rule(int n);

/// Cached rule for repeated use (thread-safe).
const GHRule& gh_rule_cached(int n);

struct AdaptiveGHResult {
  double log_integral;
  double mode;
  double curvature;  // -d^2/deta^2 log f at the mode
};

struct LogDerivs {
  double value;
  double d1;
  double d2;
};

namespace detail {

double log_sum_exp(const std::vector<double>& v);

/// log of the integral given the centring point and curvature.
template <class LogF>
double adaptive_gh_at(LogF&& log_f, const GHRule& rule, double mode, double curvature) {
  const double scale = std::sqrt(2.0 / curvature);
  double m = -std::numeric_limits<double>::infinity();
  thread_local std::vector<double> terms;
  terms.resize(rule.size());
  for (std::size_t k = 0; k < rule.size(); ++k) {
    terms[k] = rule.log_weights_plus_sq[k] + log_f(mode + scale * rule.nodes[k]);
    if (std::isnan(terms[k])) throw QuadratureError("adaptive_gh: NaN integrand");
    m = std::max(m, terms[k]);
  }
  if (!std::isfinite(m)) {
    if (m < 0) return m;
    throw QuadratureError("adaptive_gh: infinite integrand");
  }
  double s = 0.0;
  for (double v : terms) s += std::exp(v - m);
  return m + std::log(s) + std::log(scale);
}

/// Safeguarded Newton ascent to the mode of a log-integrand.
template <class Derivs>
double find_mode(Derivs&& derivs, double start) {
  double x = start;
  LogDerivs cur = derivs(x);
  if (!std::isfinite(cur.value)) throw QuadratureError("adaptive_gh: non-finite start");
  double max_step = 1.0;
  for (int iter = 0; iter < 100; ++iter) {
    double step;
    if (cur.d2 < 0.0) {
      step = -cur.d1 / cur.d2;
    } else {
      step = cur.d1 > 0 ? max_step : -max_step;
    }
    if (std::fabs(step) > max_step) step = step > 0 ? max_step : -max_step;
    // converged once the step is negligible on the integrand's own width
    if (std::fabs(step) <= 1e-11 * (1.0 + std::fabs(x)) ||
        (cur.d2 < 0.0 && std::fabs(step) * std::sqrt(-cur.d2) <= 1e-8))
      return x;

    LogDerivs next{};
    int halvings = 0;
    for (;;) {
      next = derivs(x + step);
      if (std::isfinite(next.value) && next.value >= cur.value - 1e-12 * (1.0 + std::fabs(cur.value)))
        break;
      step *= 0.5;
      if (++halvings > 60) return x;  // no ascent possible: at the mode to working precision
    }
    if (halvings == 0 && cur.d2 >= 0.0) max_step *= 2.0;
    x += step;
    cur = next;
  }
  throw QuadratureError("adaptive_gh: mode search did not converge in 100 iterations");
}

}  // namespace detail

/// Adaptive Gauss-Hermite for an integrand whose log and first two
/// derivatives are available in closed form. Returns log of the integral.
template <class Derivs>
AdaptiveGHResult adaptive_gh_derivs(Derivs&& derivs, const GHRule& rule, double start = 0.0) {
  const double mode = detail::find_mode(derivs, start);
  const double curvature = -derivs(mode).d2;
  if (!(curvature > 0.0) || !std::isfinite(curvature))
    throw QuadratureError("adaptive_gh: non-positive curvature at mode");
  auto value = [&](double x) { return derivs(x).value; };
  return {detail::adaptive_gh_at(value, rule, mode, curvature), mode, curvature};
}

/// Adaptive Gauss-Hermite for a log-integrand over the real line. The mode
/// and curvature are located with finite differences.
AdaptiveGHResult adaptive_gh(const std::function<double(double)>& log_f, const GHRule& rule,
                             double start = 0.0);

struct TanhSinhResult {
  double value;
  int level;
  std::size_t evaluations;
  std::vector<double> level_estimates;
};

inline constexpr int kTanhSinhMaxLevel = 12;

/// Level-doubling tanh-sinh on [a, b]. Stops when consecutive levels agree
/// to tol * (1 + |estimate|); throws QuadratureError at the level cap.
TanhSinhResult tanh_sinh_detailed(const std::function<double(double)>& f, double a, double b,
                                  double tol);

double tanh_sinh(const std::function<double(double)>& f, double a, double b, double tol = 1e-12);

}  // namespace frailsim
