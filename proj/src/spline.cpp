#include "frailsim/spline.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "frailsim/errors.hpp"
#include "frailsim/quadrature.hpp"

namespace frailsim {

namespace {
inline double cube_plus(double v) { return v > 0.0 ? v * v * v : 0.0; }
inline double square_plus(double v) { return v > 0.0 ? v * v : 0.0; }
}  // namespace

SplineBasis::SplineBasis(std::vector<double> interior_knots, double kmin, double kmax)
    : interior_(std::move(interior_knots)), kmin_(kmin), kmax_(kmax) {
  if (!(kmin_ < kmax_)) throw FitSetupError("spline: boundary knots must satisfy kmin < kmax");
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    if (!(interior_[i] > kmin_ && interior_[i] < kmax_) ||
        (i > 0 && !(interior_[i] > interior_[i - 1])))
      throw FitSetupError("spline: interior knots must be strictly inside and increasing");
    lambda_.push_back((kmax_ - interior_[i]) / (kmax_ - kmin_));
  }
}

void SplineBasis::eval(double z, std::span<double> out) const {
  out[0] = z;
  const double lo = cube_plus(z - kmin_);
  const double hi = cube_plus(z - kmax_);
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    out[k + 1] = cube_plus(z - interior_[k]) - lambda_[k] * lo - (1.0 - lambda_[k]) * hi;
  }
}

void SplineBasis::derivative(double z, std::span<double> out) const {
  out[0] = 1.0;
  const double lo = square_plus(z - kmin_);
  const double hi = square_plus(z - kmax_);
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    out[k + 1] =
        3.0 * (square_plus(z - interior_[k]) - lambda_[k] * lo - (1.0 - lambda_[k]) * hi);
  }
}

std::vector<double> SplineBasis::eval(double z) const {
  std::vector<double> out(df());
  eval(z, out);
  return out;
}

std::vector<double> SplineBasis::derivative(double z) const {
  std::vector<double> out(df());
  derivative(z, out);
  return out;
}

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

SplineBasis place_knots(std::span<const double> log_event_times, int df) {
  if (df < 1) throw FitSetupError("spline: df must be >= 1");
  std::vector<double> z(log_event_times.begin(), log_event_times.end());
  std::sort(z.begin(), z.end());
  z.erase(std::unique(z.begin(), z.end()), z.end());
  if (static_cast<int>(z.size()) < df + 1)
    throw FitSetupError("spline: need at least " + std::to_string(df + 1) +
                        " distinct event times for df = " + std::to_string(df) + ", got " +
                        std::to_string(z.size()));
  std::vector<double> interior;
  for (int j = 1; j < df; ++j) interior.push_back(quantile_type7(z, double(j) / df));
  return SplineBasis(std::move(interior), z.front(), z.back());
}

InterpolatingSpline::InterpolatingSpline(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw DomainError("interpolating spline: need >= 2 paired points");
  for (std::size_t i = 1; i < n; ++i)
    if (!(x_[i] > x_[i - 1])) throw DomainError("interpolating spline: abscissae must increase");

  // Tridiagonal system for interior second derivatives (Thomas algorithm).
  m_.assign(n, 0.0);
  if (n == 2) return;
  std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h0 = x_[i] - x_[i - 1];
    const double h1 = x_[i + 1] - x_[i];
    diag[i] = 2.0 * (h0 + h1);
    upper[i] = h1;
    rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
  }
  for (std::size_t i = 2; i + 1 < n; ++i) {
    const double lower = x_[i] - x_[i - 1];
    const double w = lower / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
    if (i == 1) break;
  }
}

double InterpolatingSpline::operator()(double t) const {
  const std::size_t n = x_.size();
  std::size_t i = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin());
  i = std::clamp<std::size_t>(i, 1, n - 1) - 1;
  const double h = x_[i + 1] - x_[i];
  const double a = (x_[i + 1] - t) / h;
  const double b = (t - x_[i]) / h;
  return a * y_[i] + b * y_[i + 1] +
         ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double interp_integrate(std::span<const double> t, std::span<const double> y, double a, double b,
                        double tol) {
  if (t.size() != y.size() || t.size() < 2) throw DomainError("interp_integrate: bad points");
  if (a < t.front() || b > t.back() || a > b)
    throw DomainError("interp_integrate: [a, b] outside the abscissa range");
  if (a == b) return 0.0;
  const InterpolatingSpline spline({t.begin(), t.end()}, {y.begin(), y.end()});

  // Each knot interval holds one cubic piece; integrate piecewise so the
  // double-exponential rule sees an analytic integrand.
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double lo = std::max(a, t[i]);
    const double hi = std::min(b, t[i + 1]);
    if (!(lo < hi)) continue;
    total += tanh_sinh([&](double u) { return spline(u); }, lo, hi, tol);
  }
  return total;
}

}  // namespace frailsim
