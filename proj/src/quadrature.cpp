#include "frailsim/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace frailsim {

namespace detail {

double log_sum_exp(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace detail

namespace {

// Orthonormal Hermite values p_{n-1}(x), p_n(x) and sum_{k<n} p_k(x)^2.
struct HermiteEval {
  double pn, pn1, christoffel_sum;
};

HermiteEval orthonormal_hermite(int n, double x) {
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    sum += cur * cur;
    const double next = x * std::sqrt(2.0 / (k + 1)) * cur - std::sqrt(double(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return {cur, prev, sum};
}

}  // namespace

GHRule gh_rule(int n) {
  if (n < 1 || n > 128) throw DomainError("gh_rule: n must lie in [1, 128]");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(k / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi, Eigen::EigenvaluesOnly);
  std::vector<double> x(eig.eigenvalues().data(), eig.eigenvalues().data() + n);

  // Polish: p_n'(x) = sqrt(2n) p_{n-1}(x).
  for (double& xi : x) {
    for (int it = 0; it < 3; ++it) {
      const HermiteEval e = orthonormal_hermite(n, xi);
      const double d = e.pn / (std::sqrt(2.0 * n) * e.pn1);
      if (!std::isfinite(d)) break;
      xi -= d;
    }
  }
  std::sort(x.begin(), x.end());
  for (int i = 0; i < n / 2; ++i) {
    const double m = 0.5 * (x[n - 1 - i] - x[i]);
    x[i] = -m;
    x[n - 1 - i] = m;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;

  GHRule rule;
  rule.nodes = x;
  rule.weights.resize(n);
  rule.log_weights_plus_sq.resize(n);
  for (int i = 0; i < n; ++i) {
    const double s = orthonormal_hermite(n, x[i]).christoffel_sum;
    rule.weights[i] = 1.0 / s;
    rule.log_weights_plus_sq[i] = -std::log(s) + x[i] * x[i];
  }
  for (int i = 0; i < n / 2; ++i) {
    const double w = 0.5 * (rule.weights[i] + rule.weights[n - 1 - i]);
    rule.weights[i] = rule.weights[n - 1 - i] = w;
    const double lw = 0.5 * (rule.log_weights_plus_sq[i] + rule.log_weights_plus_sq[n - 1 - i]);
    rule.log_weights_plus_sq[i] = rule.log_weights_plus_sq[n - 1 - i] = lw;
  }
  return rule;
}

const GHRule& gh_rule_cached(int n) {
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<GHRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<GHRule>(gh_rule(n));
  return *slot;
}

AdaptiveGHResult adaptive_gh(const std::function<double(double)>& log_f, const GHRule& rule,
                             double start) {
  auto fd = [&](double x) {
    const double h = 1e-4 * (1.0 + std::fabs(x));
    const double f0 = log_f(x);
    const double fp = log_f(x + h);
    const double fm = log_f(x - h);
    return LogDerivs{f0, (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)};
  };
  const double mode = detail::find_mode(fd, start);

  // Re-estimate curvature with a step matched to the integrand's width.
  double c = -fd(mode).d2;
  if (!(c > 0.0) || !std::isfinite(c)) throw QuadratureError("adaptive_gh: non-positive curvature");
  const double h = 0.1 / std::sqrt(c);
  const double f0 = log_f(mode);
  c = -(log_f(mode + h) - 2.0 * f0 + log_f(mode - h)) / (h * h);
  if (!(c > 0.0) || !std::isfinite(c)) throw QuadratureError("adaptive_gh: non-positive curvature");
  return {detail::adaptive_gh_at(log_f, rule, mode, c), mode, c};
}

namespace {

constexpr double kTMax = 6.1;

struct TanhSinhNode {
  double offset;  // distance from the nearer endpoint, as a fraction of (b - a)
  double weight;  // dx/dt / (b - a), excluding the step h
};

// Nodes first introduced at each level: level 0 holds t = 0, 1, ..., level L
// holds odd multiples of 2^-L. Negative t mirror positive t.
const std::vector<TanhSinhNode>& level_nodes(int level) {
  static const auto tables = [] {
    std::array<std::vector<TanhSinhNode>, kTanhSinhMaxLevel + 1> out;
    for (int level = 0; level <= kTanhSinhMaxLevel; ++level) {
      const double h = std::ldexp(1.0, -level);
      const int stride = level == 0 ? 1 : 2;
      const int first = level == 0 ? 0 : 1;
      for (int k = first; k * h <= kTMax; k += stride) {
        const double t = k * h;
        const double s = 0.5 * std::numbers::pi * std::sinh(t);
        const double e = std::exp(-2.0 * s);
        const double offset = e / (1.0 + e);
        // (1/2) * (pi/2) cosh t / cosh^2 s
        const double weight = 0.5 * 0.5 * std::numbers::pi * std::cosh(t) * 4.0 * e /
                              ((1.0 + e) * (1.0 + e));
        out[level].push_back({offset, weight});
      }
    }
    return out;
  }();
  return tables[level];
}

}  // namespace

TanhSinhResult tanh_sinh_detailed(const std::function<double(double)>& f, double a, double b,
                                  double tol) {
  if (!(a < b)) throw DomainError("tanh_sinh: need a < b");
  const double width = b - a;
  TanhSinhResult result{0.0, 0, 0, {}};
  double sum = 0.0;  // sum of weight * f over all nodes so far (unit step)

  auto eval = [&](double x) {
    if (x <= a || x >= b) return 0.0;  // node collapsed onto an endpoint
    const double v = f(x);
    ++result.evaluations;
    if (!std::isfinite(v)) throw QuadratureError("tanh_sinh: non-finite integrand at interior node");
    return v;
  };

  for (int level = 0; level <= kTanhSinhMaxLevel; ++level) {
    double added = 0.0;
    for (const TanhSinhNode& node : level_nodes(level)) {
      const double d = node.offset * width;
      if (node.offset == 0.5) {
        added += node.weight * eval(a + 0.5 * width);
      } else {
        added += node.weight * (eval(a + d) + eval(b - d));
      }
    }
    sum += added;
    const double estimate = sum * width * std::ldexp(1.0, -level);
    result.level_estimates.push_back(estimate);
    result.value = estimate;
    result.level = level;
    if (level >= 2) {
      const double prev = result.level_estimates[level - 1];
      if (std::fabs(estimate - prev) <= tol * (1.0 + std::fabs(estimate))) return result;
    }
  }
  throw QuadratureError("tanh_sinh: level cap reached without convergence");
}

double tanh_sinh(const std::function<double(double)>& f, double a, double b, double tol) {
  return tanh_sinh_detailed(f, a, b, tol).value;
}

}  // namespace frailsim
