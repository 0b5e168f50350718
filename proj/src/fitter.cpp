#include "frailsim/fitter.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "frailsim/errors.hpp"
#include "frailsim/kernels.hpp"
#include "frailsim/optim.hpp"
#include "frailsim/quadrature.hpp"

namespace frailsim {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

thread_local int g_quadrature_failures = 0;

std::string baseline_code(const ModelSpec& m) {
  switch (m.baseline) {
    case BaselineKind::Exponential: return "exp";
    case BaselineKind::Weibull: return "wei";
    case BaselineKind::Gompertz: return "gom";
    case BaselineKind::RoystonParmar: return "rp" + std::to_string(m.df);
  }
  return "?";
}

}  // namespace

std::string ModelSpec::id() const { return baseline_code(*this) + "-" + to_string(frailty); }

ModelSpec ModelSpec::parse(const std::string& id) {
  const auto dash = id.find('-');
  if (dash == std::string::npos) throw ConfigError("unknown model id '" + id + "'");
  const std::string base = id.substr(0, dash);
  const std::string fr = id.substr(dash + 1);
  ModelSpec m;
  if (base == "exp") m.baseline = BaselineKind::Exponential;
  else if (base == "wei") m.baseline = BaselineKind::Weibull;
  else if (base == "gom") m.baseline = BaselineKind::Gompertz;
  else if (base == "rp3" || base == "rp5" || base == "rp9") {
    m.baseline = BaselineKind::RoystonParmar;
    m.df = base[2] - '0';
  } else {
    throw ConfigError("unknown model id '" + id + "'");
  }
  if (fr == "gamma") m.frailty = FrailtyFamily::Gamma;
  else if (fr == "lognormal") m.frailty = FrailtyFamily::LogNormal;
  else throw ConfigError("unknown model id '" + id + "'");
  return m;
}

int ModelSpec::n_baseline_params() const {
  switch (baseline) {
    case BaselineKind::Exponential: return 1;
    case BaselineKind::Weibull:
    case BaselineKind::Gompertz: return 2;
    case BaselineKind::RoystonParmar: return df + 1;
  }
  return 0;
}

std::vector<std::string> ModelSpec::param_names() const {
  std::vector<std::string> names;
  switch (baseline) {
    case BaselineKind::Exponential: names = {"log_lambda"}; break;
    case BaselineKind::Weibull: names = {"log_lambda", "log_p"}; break;
    case BaselineKind::Gompertz: names = {"log_lambda", "gamma"}; break;
    case BaselineKind::RoystonParmar:
      for (int k = 0; k <= df; ++k) names.push_back("gamma" + std::to_string(k));
      break;
  }
  names.push_back("beta");
  names.push_back(frailty == FrailtyFamily::Gamma ? "log_theta" : "log_sigma2");
  return names;
}

void ModelSpec::validate() const {
  if (baseline == BaselineKind::RoystonParmar && df != 3 && df != 5 && df != 9)
    throw ConfigError("spline models take df in {3, 5, 9}");
  if (frailty == FrailtyFamily::MixtureNormal)
    throw ConfigError("mixture-Normal frailty is simulated, not fitted");
  if (frailty == FrailtyFamily::LogNormal && gh_nodes < 7)
    throw ConfigError("gh_nodes must be >= 7");
}

std::vector<ModelSpec> all_models() {
  std::vector<ModelSpec> out;
  for (const char* b : {"exp", "wei", "gom", "rp3", "rp5", "rp9"})
    for (const char* f : {"gamma", "lognormal"}) out.push_back(ModelSpec::parse(std::string(b) + "-" + f));
  return out;
}

bool is_log_parameter(const ModelSpec& m, int i) {
  if (i == m.frailty_index()) return true;
  if (i == m.beta_index()) return false;
  switch (m.baseline) {
    case BaselineKind::Exponential: return true;
    case BaselineKind::Weibull: return true;
    case BaselineKind::Gompertz: return i == 0;
    case BaselineKind::RoystonParmar: return false;
  }
  return false;
}

ConditionalPieces conditional_pieces(const ModelSpec& m, std::span<const double> params, double t,
                                     int x, const SplineBasis* basis) {
  if (!(t > 0.0)) throw DomainError("conditional_pieces: t must be > 0");
  const double lp = x * params[m.beta_index()];
  switch (m.baseline) {
    case BaselineKind::Exponential: {
      const double lam = std::exp(params[0]);
      return {lam * std::exp(lp), lam * t * std::exp(lp)};
    }
    case BaselineKind::Weibull: {
      const auto b = BaselineHazard::weibull(std::exp(params[0]), std::exp(params[1]));
      return {hazard(b, t) * std::exp(lp), cumulative_hazard(b, t) * std::exp(lp)};
    }
    case BaselineKind::Gompertz: {
      const auto b = BaselineHazard::gompertz(std::exp(params[0]), params[1]);
      return {hazard(b, t) * std::exp(lp), cumulative_hazard(b, t) * std::exp(lp)};
    }
    case BaselineKind::RoystonParmar: {
      if (basis == nullptr) throw DomainError("conditional_pieces: spline model needs a basis");
      const std::vector<double> b = basis->eval(std::log(t));
      const std::vector<double> db = basis->derivative(std::log(t));
      double s = params[0], ds = 0.0;
      for (int k = 0; k < m.df; ++k) {
        s += params[k + 1] * b[k];
        ds += params[k + 1] * db[k];
      }
      const double cumhaz = std::exp(s + lp);
      return {ds / t * cumhaz, cumhaz, ds > 0.0};
    }
  }
  return {kNaN, kNaN, false};
}

FitData::FitData(const ClusteredDataset& data) {
  std::vector<std::size_t> order(data.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return data.rows[a].cluster < data.rows[b].cluster;
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const SubjectRow& r = data.rows[order[k]];
    if (!(r.time > 0.0) || !std::isfinite(r.time))
      throw DataError("dataset row has non-positive or non-finite time");
    if (k == 0 || r.cluster != data.rows[order[k - 1]].cluster) {
      offsets.push_back(k);
      cluster_events.push_back(0.0);
    }
    time.push_back(r.time);
    log_time.push_back(std::log(r.time));
    event.push_back(r.event ? 1.0 : 0.0);
    treat.push_back(r.treat ? 1.0 : 0.0);
    if (r.event) {
      ++n_events;
      cluster_events.back() += 1.0;
      event_log_times.push_back(log_time.back());
    }
  }
  offsets.push_back(order.size());
}

MarginalLikelihood::MarginalLikelihood(const ModelSpec& m, const ClusteredDataset& data,
                                       std::optional<SplineBasis> basis)
    : model_(m), data_(data), basis_(std::move(basis)) {
  model_.validate();
  if (model_.baseline != BaselineKind::RoystonParmar) return;
  if (!basis_) basis_ = place_knots(data_.event_log_times, model_.df);
  if (basis_->df() != model_.df) throw FitSetupError("spline basis df does not match the model");
  const std::size_t n = data_.n_rows();
  const auto df = static_cast<std::size_t>(model_.df);
  basis_cols_.assign(n * df, 0.0);
  basis_deriv_cols_.assign(n * df, 0.0);
  std::vector<double> b(df), db(df);
  for (std::size_t i = 0; i < n; ++i) {
    basis_->eval(data_.log_time[i], b);
    basis_->derivative(data_.log_time[i], db);
    for (std::size_t k = 0; k < df; ++k) {
      basis_cols_[k * n + i] = b[k];
      basis_deriv_cols_[k * n + i] = db[k];
    }
  }
}

int MarginalLikelihood::quadrature_failures() { return g_quadrature_failures; }

bool MarginalLikelihood::row_terms(std::span<const double> params, std::vector<double>& cumhaz,
                                   std::vector<double>& log_hazard) const {
  const auto& K = kernels::active();
  const std::size_t n = data_.n_rows();
  const double beta = params[model_.beta_index()];
  cumhaz.resize(n);
  log_hazard.resize(n);
  std::span<const double> logt(data_.log_time);
  std::span<const double> treat(data_.treat);

  switch (model_.baseline) {
    case BaselineKind::Exponential: {
      const double one = 1.0;
      K.gemv_colmajor(logt, n, {&one, 1}, params[0], cumhaz);
      K.add_scaled(cumhaz, treat, beta, cumhaz);
      for (std::size_t i = 0; i < n; ++i) {
        log_hazard[i] = params[0];
        cumhaz[i] = std::exp(cumhaz[i]);
      }
      K.add_scaled(log_hazard, treat, beta, log_hazard);
      break;
    }
    case BaselineKind::Weibull: {
      const double p = std::exp(params[1]);
      const double pm1 = p - 1.0;
      K.gemv_colmajor(logt, n, {&p, 1}, params[0], cumhaz);
      K.add_scaled(cumhaz, treat, beta, cumhaz);
      K.gemv_colmajor(logt, n, {&pm1, 1}, params[0] + params[1], log_hazard);
      K.add_scaled(log_hazard, treat, beta, log_hazard);
      for (std::size_t i = 0; i < n; ++i) cumhaz[i] = std::exp(cumhaz[i]);
      break;
    }
    case BaselineKind::Gompertz: {
      const double lam = std::exp(params[0]);
      const double gamma = params[1];
      const double eb = std::exp(beta);
      for (std::size_t i = 0; i < n; ++i) {
        const double gt = gamma * data_.time[i];
        const double h0 = std::fabs(gt) < 1e-8 ? lam * data_.time[i] * (1.0 + 0.5 * gt)
                                               : lam * std::expm1(gt) / gamma;
        cumhaz[i] = data_.treat[i] != 0.0 ? h0 * eb : h0;
      }
      K.gemv_colmajor(data_.time, n, {&gamma, 1}, params[0], log_hazard);
      K.add_scaled(log_hazard, treat, beta, log_hazard);
      break;
    }
    case BaselineKind::RoystonParmar: {
      const auto df = static_cast<std::size_t>(model_.df);
      std::span<const double> coef = params.subspan(1, df);
      thread_local std::vector<double> ds;
      ds.resize(n);
      K.gemv_colmajor(basis_cols_, n, coef, params[0], cumhaz);
      K.add_scaled(cumhaz, treat, beta, cumhaz);
      K.gemv_colmajor(basis_deriv_cols_, n, coef, 0.0, ds);
      for (std::size_t i = 0; i < n; ++i) {
        if (data_.event[i] != 0.0) {
          if (!(ds[i] > 0.0)) return false;
          log_hazard[i] = std::log(ds[i]) - data_.log_time[i] + cumhaz[i];
        } else {
          log_hazard[i] = 0.0;
        }
        cumhaz[i] = std::exp(cumhaz[i]);
      }
      break;
    }
  }
  return true;
}

double MarginalLikelihood::cluster_term(double events, double cumhaz_sum, double log_var) const {
  const double var = std::exp(log_var);
  if (model_.frailty == FrailtyFamily::Gamma) {
    // log of the integral of a^D exp(-a V) against Gamma(1/theta, 1/theta):
    // sum_{m<D} log(1 + m theta) - (1/theta + D) log(1 + theta V).
    const double l1p = std::log1p(var * cumhaz_sum);
    double s = -l1p / var - events * l1p;
    for (int k = 1; k < static_cast<int>(events); ++k) s += std::log1p(k * var);
    return s;
  }
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
  auto derivs = [&](double eta) {
    const double ev = std::exp(eta) * cumhaz_sum;
    return LogDerivs{eta * events - ev - 0.5 * eta * eta / var + log_norm,
                     events - ev - eta / var, -ev - 1.0 / var};
  };
  try {
    return adaptive_gh_derivs(derivs, gh_rule_cached(model_.gh_nodes), 0.0).log_integral;
  } catch (const QuadratureError&) {
    ++g_quadrature_failures;
    return kNegInf;
  }
}

std::vector<double> MarginalLikelihood::cluster_logliks(std::span<const double> params) const {
  if (static_cast<int>(params.size()) != model_.n_params())
    throw DomainError("marginal likelihood: wrong parameter count for " + model_.id());
  const std::size_t nc = data_.n_clusters();
  std::vector<double> out(nc, kNegInf);
  std::vector<double> cumhaz, log_hazard;
  if (!row_terms(params, cumhaz, log_hazard)) return out;
  for (std::size_t i = 0; i < log_hazard.size(); ++i) log_hazard[i] *= data_.event[i];
  std::vector<double> v(nc), dlogh(nc);
  const auto& K = kernels::active();
  K.segment_sum(cumhaz, data_.offsets, v);
  K.segment_sum(log_hazard, data_.offsets, dlogh);
  const double log_var = params[model_.frailty_index()];
  for (std::size_t c = 0; c < nc; ++c) {
    out[c] = dlogh[c] + cluster_term(data_.cluster_events[c], v[c], log_var);
    if (!std::isfinite(out[c])) out[c] = kNegInf;
  }
  return out;
}

double MarginalLikelihood::operator()(std::span<const double> params) const {
  if (static_cast<int>(params.size()) != model_.n_params())
    throw DomainError("marginal likelihood: wrong parameter count for " + model_.id());
  g_quadrature_failures = 0;
  for (double p : params)
    if (!std::isfinite(p)) return kNegInf;
  const double log_var = params[model_.frailty_index()];
  if (log_var > 30.0 || log_var < -60.0) return kNegInf;

  thread_local std::vector<double> cumhaz, log_hazard, v;
  if (!row_terms(params, cumhaz, log_hazard)) return kNegInf;
  const auto& K = kernels::active();
  double total = K.dot(data_.event, log_hazard);
  v.resize(data_.n_clusters());
  K.segment_sum(cumhaz, data_.offsets, v);
  for (std::size_t c = 0; c < v.size(); ++c) {
    total += cluster_term(data_.cluster_events[c], v[c], log_var);
  }
  return std::isfinite(total) ? total : kNegInf;
}

double gamma_marginal_loglik(const ModelSpec& m, std::span<const double> params,
                             const ClusteredDataset& data, std::optional<SplineBasis> basis) {
  if (m.frailty != FrailtyFamily::Gamma) throw DomainError("gamma_marginal_loglik: Gamma model required");
  return MarginalLikelihood(m, data, std::move(basis))(params);
}

double lognormal_marginal_loglik(const ModelSpec& m, std::span<const double> params,
                                 const ClusteredDataset& data, std::optional<SplineBasis> basis) {
  if (m.frailty != FrailtyFamily::LogNormal)
    throw DomainError("lognormal_marginal_loglik: log-Normal model required");
  return MarginalLikelihood(m, data, std::move(basis))(params);
}

Eigen::VectorXd FitResult::natural_jacobian() const {
  Eigen::VectorXd j(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i)
    j[i] = is_log_parameter(model, static_cast<int>(i)) ? std::exp(params[i]) : 1.0;
  return j;
}

Eigen::VectorXd FitResult::transformed_se() const { return covariance.diagonal().array().sqrt(); }

Eigen::VectorXd FitResult::natural_se() const {
  return natural_jacobian().array().abs() * transformed_se().array();
}

namespace {

// Affine reparametrization canonical = T * internal. For spline models the
// coefficient block is whitened against the design at the event times so
// the optimizer sees comparably scaled, weakly correlated coordinates.
Eigen::MatrixXd optimizer_transform(const MarginalLikelihood& lik) {
  const ModelSpec& m = lik.model();
  const int k = m.n_params();
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(k, k);
  if (m.baseline != BaselineKind::RoystonParmar) return t;
  const auto& z = lik.data().event_log_times;
  const int p = m.df + 1;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(z.size()), p);
  std::vector<double> b(m.df);
  for (std::size_t i = 0; i < z.size(); ++i) {
    lik.basis()->eval(z[i], b);
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (int j = 0; j < m.df; ++j) design(static_cast<Eigen::Index>(i), j + 1) = b[j];
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (int i = 0; i < p; ++i)
    if (!(std::fabs(r(i, i)) > 1e-10)) return t;
  const Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  t.topLeftCorner(p, p) = std::sqrt(static_cast<double>(z.size())) * rinv;
  return t;
}

Eigen::VectorXd start_point(const ModelSpec& m, const FitData& data, double frailty_var) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m.n_params());
  double exposure = 0.0;
  for (double t : data.time) exposure += t;
  const double log_rate = std::log(static_cast<double>(data.n_events) / exposure);
  x[0] = log_rate;
  if (m.baseline == BaselineKind::RoystonParmar) x[1] = 1.0;
  x[m.frailty_index()] = std::log(frailty_var);
  return x;
}

}  // namespace

FitResult fit(const ModelSpec& m, const ClusteredDataset& data, const FitOptions& opts) {
  m.validate();
  if (data.n_events() == 0) throw FitSetupError("unfittable: dataset has no events");

  const MarginalLikelihood lik(m, data);
  const Eigen::MatrixXd transform = optimizer_transform(lik);
  const auto to_internal = transform.partialPivLu();
  const Objective objective = [&](const Eigen::VectorXd& internal) {
    const Eigen::VectorXd canonical = transform * internal;
    const double ll = lik(canonical);
    return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
  };

  BfgsOptions bopts;
  bopts.max_evaluations = opts.max_evaluations;
  bopts.stagnation_evaluations = opts.stagnation_evaluations;

  FitResult r;
  r.model = m;
  r.names = m.param_names();
  r.basis = lik.basis();
  r.n_obs = data.rows.size();
  r.n_events = data.n_events();
  r.n_clusters = lik.data().n_clusters();

  BfgsResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < opts.frailty_starts.size(); ++s) {
    const Eigen::VectorXd x0 =
        to_internal.solve(start_point(m, lik.data(), opts.frailty_starts[s]));
    BfgsResult res = minimize_bfgs(objective, x0, bopts);
    r.evaluations += res.evaluations;
    r.iterations += res.iterations;
    if (res.value < best.value) {
      best = std::move(res);
      r.best_start = static_cast<int>(s);
    }
  }

  const int k = m.n_params();
  if (!std::isfinite(best.value)) {
    r.params = Eigen::VectorXd::Constant(k, kNaN);
    r.covariance = Eigen::MatrixXd::Constant(k, k, kNaN);
    r.natural = r.params;
    r.natural_covariance = r.covariance;
    r.loglik = kNegInf;
    r.beta = r.se_beta = r.frailty_var = r.se_frailty_var = kNaN;
    r.stagnated = true;
    return r;
  }

  r.params = transform * best.x;
  r.loglik = -best.value;
  r.stagnated = best.stagnated;
  const Eigen::VectorXd grad_canonical = transform.transpose().partialPivLu().solve(best.gradient);
  r.gradient_norm = grad_canonical.lpNorm<Eigen::Infinity>();

  const Eigen::MatrixXd hess_internal = central_hessian(objective, best.x, opts.hessian_step, &r.evaluations);
  Eigen::LLT<Eigen::MatrixXd> llt(hess_internal);
  r.hessian_pd = hess_internal.allFinite() && llt.info() == Eigen::Success;
  if (r.hessian_pd) {
    const Eigen::MatrixXd cov_internal = llt.solve(Eigen::MatrixXd::Identity(k, k));
    r.covariance = transform * cov_internal * transform.transpose();
    r.covariance = 0.5 * (r.covariance + r.covariance.transpose()).eval();
    const Eigen::MatrixXd tinv = to_internal.inverse();
    const Eigen::MatrixXd hess_canonical = tinv.transpose() * hess_internal * tinv;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess_canonical, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    r.condition_number = ev.maxCoeff() / ev.minCoeff();
    if (!(ev.minCoeff() > 0.0)) r.hessian_pd = false;
  }
  if (!r.hessian_pd) r.covariance = Eigen::MatrixXd::Constant(k, k, kNaN);

  const Eigen::VectorXd jac = r.natural_jacobian();
  r.natural = r.params;
  for (int i = 0; i < k; ++i)
    if (is_log_parameter(m, i)) r.natural[i] = std::exp(r.params[i]);
  r.natural_covariance = jac.asDiagonal() * r.covariance * jac.asDiagonal();

  const int bi = m.beta_index();
  const int fi = m.frailty_index();
  r.beta = r.params[bi];
  r.se_beta = std::sqrt(r.covariance(bi, bi));
  r.frailty_var = r.natural[fi];
  r.se_frailty_var = r.frailty_var * std::sqrt(r.covariance(fi, fi));

  r.converged = r.hessian_pd && !r.stagnated &&
                r.gradient_norm <= opts.gradient_tolerance * (1.0 + std::fabs(r.loglik));
  return r;
}

InformationCriteria information_criteria(double loglik, int k, std::size_t n_obs) {
  return {-2.0 * loglik + 2.0 * k, -2.0 * loglik + k * std::log(static_cast<double>(n_obs))};
}

InformationCriteria information_criteria(const FitResult& f, std::size_t n_obs) {
  return information_criteria(f.loglik, static_cast<int>(f.params.size()), n_obs);
}

}  // namespace frailsim
