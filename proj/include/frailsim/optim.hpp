#pragma once

#include <Eigen/Core>
#include <functional>

namespace frailsim {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct BfgsOptions {
  int max_evaluations = 20000;
  int stagnation_evaluations = 500;  // evaluations without improvement before giving up
  double gradient_tolerance = 1e-8;  // relative to 1 + |f|
  double gradient_step = 1e-5;       // relative central-difference step
  double max_step = 5.0;             // cap on the infinity norm of a trial step
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool gradient_converged = false;
  bool stagnated = false;          // evaluation budget spent without progress
  bool precision_limited = false;  // no further decrease possible at working precision
};

/// Central-difference gradient with per-coordinate step rel * (1 + |x_i|).
Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double rel,
                                 int* evaluations = nullptr);

/// Central-difference Hessian, four-point stencil off the diagonal.
Eigen::MatrixXd central_hessian(const Objective& f, const Eigen::VectorXd& x, double rel,
                                int* evaluations = nullptr);

/// Quasi-Newton minimization (BFGS inverse update, Armijo backtracking) with
/// finite-difference gradients. Non-finite objective values are treated as
/// infeasible and the step is shortened.
BfgsResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opts);

}  // namespace frailsim
