#pragma once

#include <span>
#include <utility>
#include <vector>

namespace frailsim {

/// Restricted cubic spline basis on log time (Royston-Parmar form). The
/// first column is z itself; each interior knot k contributes
///   (z - k)^3_+ - l_k (z - kmin)^3_+ - (1 - l_k) (z - kmax)^3_+,
/// with l_k = (kmax - k) / (kmax - kmin). Every column is linear outside
/// [kmin, kmax].
class SplineBasis {
 public:
  SplineBasis() = default;
  SplineBasis(std::vector<double> interior_knots, double kmin, double kmax);

  int df() const { return static_cast<int>(interior_.size()) + 1; }
  const std::vector<double>& interior_knots() const { return interior_; }
  std::pair<double, double> boundary_knots() const { return {kmin_, kmax_}; }

  void eval(double z, std::span<double> out) const;
  void derivative(double z, std::span<double> out) const;
  std::vector<double> eval(double z) const;
  std::vector<double> derivative(double z) const;

 private:
  std::vector<double> interior_;
  std::vector<double> lambda_;
  double kmin_ = 0.0;
  double kmax_ = 1.0;
};

/// Type-7 sample quantile of sorted data.
double quantile_type7(std::span<const double> sorted, double p);

/// Boundary knots at the extreme log event times, df - 1 interior knots at
/// equally spaced centiles of the distinct values. The fitted models use
/// df in {3, 5, 9}; any df >= 1 is accepted.
SplineBasis place_knots(std::span<const double> log_event_times, int df);

/// Natural cubic interpolating spline (zero second derivative at both ends).
class InterpolatingSpline {
 public:
  InterpolatingSpline(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;
  double lower() const { return x_.front(); }
  double upper() const { return x_.back(); }

 private:
  std::vector<double> x_, y_, m_;  // m_: second derivatives at the knots
};

/// Integral of the natural interpolating spline through points over [a, b],
/// by tanh-sinh quadrature over each knot interval.
double interp_integrate(std::span<const double> t, std::span<const double> y, double a, double b,
                        double tol = 1e-12);

}  // namespace frailsim
