#include "frailsim/optim.hpp"

#include <cmath>
#include <limits>

namespace frailsim {

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double rel,
                                 int* evaluations) {
  const Eigen::Index k = x.size();
  Eigen::VectorXd g(k);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double h = rel * (1.0 + std::fabs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  if (evaluations != nullptr) *evaluations += static_cast<int>(2 * k);
  return g;
}

Eigen::MatrixXd central_hessian(const Objective& f, const Eigen::VectorXd& x, double rel,
                                int* evaluations) {
  const Eigen::Index k = x.size();
  Eigen::VectorXd h(k);
  for (Eigen::Index i = 0; i < k; ++i) h[i] = rel * (1.0 + std::fabs(x[i]));
  const double f0 = f(x);
  Eigen::MatrixXd hess(k, k);
  Eigen::VectorXd xp = x;
  int count = 1;
  for (Eigen::Index i = 0; i < k; ++i) {
    xp[i] = x[i] + h[i];
    const double fp = f(xp);
    xp[i] = x[i] - h[i];
    const double fm = f(xp);
    xp[i] = x[i];
    hess(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    count += 2;
    for (Eigen::Index j = 0; j < i; ++j) {
      double s = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          xp[i] = x[i] + si * h[i];
          xp[j] = x[j] + sj * h[j];
          s += si * sj * f(xp);
        }
      }
      xp[i] = x[i];
      xp[j] = x[j];
      hess(i, j) = hess(j, i) = s / (4.0 * h[i] * h[j]);
      count += 4;
    }
  }
  if (evaluations != nullptr) *evaluations += count;
  return hess;
}

namespace {

// Inverse of the diagonal curvature, used to start (and restart) the update.
Eigen::MatrixXd diagonal_start(const Objective& f, const Eigen::VectorXd& x, double fx,
                               int* evaluations) {
  const Eigen::Index k = x.size();
  Eigen::MatrixXd h0 = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double h = 1e-4 * (1.0 + std::fabs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    const double d2 = (fp - 2.0 * fx + fm) / (h * h);
    h0(i, i) = (std::isfinite(d2) && d2 > 1e-8) ? 1.0 / d2 : 1.0;
  }
  *evaluations += static_cast<int>(2 * k);
  return h0;
}

}  // namespace

BfgsResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opts) {
  BfgsResult r;
  r.x = x0;
  r.value = f(x0);
  r.evaluations = 1;
  if (!std::isfinite(r.value)) {
    r.gradient = Eigen::VectorXd::Constant(x0.size(), std::numeric_limits<double>::quiet_NaN());
    r.stagnated = true;
    return r;
  }
  r.gradient = central_gradient(f, r.x, opts.gradient_step, &r.evaluations);
  Eigen::MatrixXd hinv = diagonal_start(f, r.x, r.value, &r.evaluations);

  int last_improvement = r.evaluations;
  int flat_iterations = 0;
  bool just_reset = true;

  for (;;) {
    if (r.evaluations >= opts.max_evaluations) {
      r.stagnated = true;
      break;
    }
    if (r.gradient.lpNorm<Eigen::Infinity>() <= opts.gradient_tolerance * (1.0 + std::fabs(r.value))) {
      r.gradient_converged = true;
      break;
    }
    if (r.evaluations - last_improvement > opts.stagnation_evaluations) {
      r.stagnated = true;
      break;
    }
    ++r.iterations;

    Eigen::VectorXd p = -hinv * r.gradient;
    double slope = r.gradient.dot(p);
    if (!(slope < 0.0)) {
      hinv = diagonal_start(f, r.x, r.value, &r.evaluations);
      just_reset = true;
      p = -hinv * r.gradient;
      slope = r.gradient.dot(p);
    }
    const double pmax = p.lpNorm<Eigen::Infinity>();
    if (pmax > opts.max_step) {
      p *= opts.max_step / pmax;
      slope = r.gradient.dot(p);
    }

    double alpha = 1.0;
    double trial = 0.0;
    Eigen::VectorXd xn;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      xn = r.x + alpha * p;
      trial = f(xn);
      ++r.evaluations;
      if (std::isfinite(trial) && trial <= r.value + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      // Quadratic interpolation when the trial is finite, halving otherwise.
      double next = 0.5 * alpha;
      if (std::isfinite(trial)) {
        const double denom = 2.0 * (trial - r.value - alpha * slope);
        if (denom > 0.0) next = std::clamp(-slope * alpha * alpha / denom, 0.1 * alpha, 0.5 * alpha);
      }
      alpha = next;
    }
    if (!accepted) {
      if (just_reset) {
        r.precision_limited = true;
        break;
      }
      hinv = diagonal_start(f, r.x, r.value, &r.evaluations);
      just_reset = true;
      continue;
    }

    const Eigen::VectorXd gn = central_gradient(f, xn, opts.gradient_step, &r.evaluations);
    const Eigen::VectorXd s = xn - r.x;
    const Eigen::VectorXd y = gn - r.gradient;
    const double sy = s.dot(y);

    const double improvement = r.value - trial;
    if (improvement > 1e-13 * (1.0 + std::fabs(r.value))) {
      last_improvement = r.evaluations;
      flat_iterations = 0;
    } else if (++flat_iterations >= 5) {
      r.x = xn;
      r.value = trial;
      r.gradient = gn;
      r.precision_limited = true;
      break;
    }
    r.x = xn;
    r.value = trial;
    r.gradient = gn;

    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * y;
      hinv += rho * rho * (sy + y.dot(hy)) * s * s.transpose() -
              rho * (hy * s.transpose() + s * hy.transpose());
      just_reset = false;
    }
  }
  return r;
}

}  // namespace frailsim
