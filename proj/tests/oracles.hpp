#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "frailsim/fitter.hpp"

// Reference computations built on Boost.Math and the scalar per-subject
// formulas, independent of the vectorized likelihood path.
namespace frailsim::testing {

// log of the integral of a^D exp(-a V) against the Gamma(1/theta, 1/theta) density
inline double gamma_kernel_log_integral(double D, double V, double theta) {
  const double k = 1.0 / theta;
  auto log_f = [&](double a) {
    return (D + k - 1) * std::log(a) - a * (V + k) + k * std::log(k) - std::lgamma(k);
  };
  // shape/rate of the (unnormalized) posterior gives a safe scale point
  const double shape = D + k, rate = V + k;
  const double mode = std::max((shape - 1) / rate, 1e-300);
  const double ref = shape > 1 ? log_f(mode) : log_f(shape / rate);
  boost::math::quadrature::exp_sinh<double> integrator;
  const double v = integrator.integrate([&](double a) { return a > 0 ? std::exp(log_f(a) - ref) : 0.0; },
                                        1e-14);
  return ref + std::log(v);
}

// log of the integral of exp(eta D - e^eta V) against Normal(0, var) on [-lim, lim]
inline double lognormal_kernel_log_integral(double D, double V, double var, double lim = 12) {
  auto log_f = [&](double e) {
    return e * D - std::exp(e) * V - 0.5 * e * e / var - 0.5 * std::log(2 * std::numbers::pi * var);
  };
  double ref = -1e300;
  for (double e = -lim; e <= lim; e += 0.01) ref = std::max(ref, log_f(e));
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double v = integrator.integrate([&](double e) { return std::exp(log_f(e) - ref); }, -lim, lim, 1e-14);
  return ref + std::log(v);
}

struct ClusterSums {
  double D = 0, V = 0, sum_log_h = 0;
};

// Per-cluster event count, cumulative hazard and log-hazard sum from conditional_pieces.
inline std::vector<ClusterSums> cluster_sums(const ModelSpec& m, std::span<const double> params,
                                             const ClusteredDataset& data,
                                             const SplineBasis* basis = nullptr) {
  std::vector<ClusterSums> out;
  std::int64_t current = -1;
  for (const auto& r : data.rows) {
    if (r.cluster != current) {
      out.emplace_back();
      current = r.cluster;
    }
    const auto p = conditional_pieces(m, params, r.time, r.treat, basis);
    out.back().V += p.cumhaz;
    if (r.event) {
      out.back().D += 1;
      out.back().sum_log_h += std::log(p.hazard);
    }
  }
  return out;
}

}  // namespace frailsim::testing
