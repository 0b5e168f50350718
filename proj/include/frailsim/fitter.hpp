#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frailsim/hazard.hpp"
#include "frailsim/simulator.hpp"
#include "frailsim/spline.hpp"

namespace frailsim {

enum class BaselineKind { Exponential, Weibull, Gompertz, RoystonParmar };

/// A fit target: baseline family (or spline df) crossed with a frailty family.
/// Ids: exp|wei|gom|rp3|rp5|rp9 followed by -gamma|-lognormal, e.g. "rp5-gamma".
struct ModelSpec {
  BaselineKind baseline = BaselineKind::Exponential;
  int df = 0;  // RoystonParmar only
  FrailtyFamily frailty = FrailtyFamily::Gamma;
  int gh_nodes = 15;

  std::string id() const;
  static ModelSpec parse(const std::string& id);

  int n_baseline_params() const;
  int n_params() const { return n_baseline_params() + 2; }
  int beta_index() const { return n_baseline_params(); }
  int frailty_index() const { return n_baseline_params() + 1; }
  std::vector<std::string> param_names() const;
  void validate() const;
};

/// The twelve fully parametric and spline models (Gamma and log-Normal frailty).
std::vector<ModelSpec> all_models();

struct ConditionalPieces {
  double hazard;
  double cumhaz;
  bool monotone = true;  // false when a spline baseline has s'(log t) <= 0
};

/// Conditional (frailty = 1) hazard and cumulative hazard for covariate x.
/// params uses the canonical layout: baseline block, beta, log frailty variance.
ConditionalPieces conditional_pieces(const ModelSpec& m, std::span<const double> params, double t,
                                     int x, const SplineBasis* basis = nullptr);

/// Dataset regrouped by cluster with the per-row quantities every model needs.
/// Rows are stably sorted by cluster id.
struct FitData {
  explicit FitData(const ClusteredDataset& data);

  std::size_t n_rows() const { return time.size(); }
  std::size_t n_clusters() const { return offsets.size() - 1; }

  std::vector<double> time, log_time, event, treat;
  std::vector<std::size_t> offsets;   // cluster c spans [offsets[c], offsets[c+1])
  std::vector<double> cluster_events;  // D_i
  std::size_t n_events = 0;
  std::vector<double> event_log_times;
};

/// Marginal log-likelihood of a shared-frailty model. Gamma frailty uses the
/// closed-form Laplace transform; log-Normal frailty integrates each cluster
/// by adaptive Gauss-Hermite quadrature. Invalid parameters evaluate to -inf.
class MarginalLikelihood {
 public:
  MarginalLikelihood(const ModelSpec& m, const ClusteredDataset& data,
                     std::optional<SplineBasis> basis = std::nullopt);

  double operator()(std::span<const double> params) const;
  double operator()(const Eigen::VectorXd& params) const {
    return (*this)(std::span<const double>(params.data(), static_cast<std::size_t>(params.size())));
  }

  /// Per-cluster contributions (same order as FitData clusters).
  std::vector<double> cluster_logliks(std::span<const double> params) const;

  const ModelSpec& model() const { return model_; }
  const FitData& data() const { return data_; }
  const std::optional<SplineBasis>& basis() const { return basis_; }

  /// Number of clusters whose quadrature failed in the most recent call on this thread.
  static int quadrature_failures();

 private:
  // Per-row log H and (event rows) log h. Returns false when invalid.
  bool row_terms(std::span<const double> params, std::vector<double>& cumhaz,
                 std::vector<double>& log_hazard) const;
  double cluster_term(double events, double cumhaz_sum, double log_var) const;

  ModelSpec model_;
  FitData data_;
  std::optional<SplineBasis> basis_;
  std::vector<double> basis_cols_;       // column-major n x df
  std::vector<double> basis_deriv_cols_;  // column-major n x df
};

double gamma_marginal_loglik(const ModelSpec& m, std::span<const double> params,
                             const ClusteredDataset& data,
                             std::optional<SplineBasis> basis = std::nullopt);
double lognormal_marginal_loglik(const ModelSpec& m, std::span<const double> params,
                                 const ClusteredDataset& data,
                                 std::optional<SplineBasis> basis = std::nullopt);

struct FitOptions {
  int max_evaluations = 20000;
  int stagnation_evaluations = 500;
  std::vector<double> frailty_starts{0.1, 0.5, 1.0};
  double gradient_tolerance = 1e-5;  // convergence: |grad|_inf <= tol * (1 + |loglik|)
  double hessian_step = 1e-4;
};

struct FitResult {
  ModelSpec model;
  std::vector<std::string> names;
  Eigen::VectorXd params;           // canonical transformed scale
  Eigen::MatrixXd covariance;       // canonical transformed scale (NaN when not PD)
  Eigen::VectorXd natural;          // log-parameters exponentiated
  Eigen::MatrixXd natural_covariance;
  double beta = 0.0, se_beta = 0.0;
  double frailty_var = 0.0, se_frailty_var = 0.0;
  double loglik = 0.0;
  bool converged = false;
  bool hessian_pd = false;
  bool stagnated = false;
  int iterations = 0;
  int evaluations = 0;
  int best_start = 0;
  double gradient_norm = 0.0;
  double condition_number = 0.0;
  std::optional<SplineBasis> basis;
  std::size_t n_obs = 0, n_events = 0, n_clusters = 0;

  Eigen::VectorXd transformed_se() const;
  Eigen::VectorXd natural_se() const;
  /// d natural / d transformed for each coordinate (diagonal transform).
  Eigen::VectorXd natural_jacobian() const;
};

/// True when parameter i of the model is estimated on the log scale.
bool is_log_parameter(const ModelSpec& m, int i);

/// Marginal maximum likelihood by BFGS from the three documented starts.
FitResult fit(const ModelSpec& m, const ClusteredDataset& data, const FitOptions& opts = {});

struct InformationCriteria {
  double aic;
  double bic;
};

InformationCriteria information_criteria(const FitResult& f, std::size_t n_obs);
InformationCriteria information_criteria(double loglik, int k, std::size_t n_obs);

}  // namespace frailsim
