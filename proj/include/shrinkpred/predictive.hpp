#pragma once

// Predictive densities: plug-in, closed-form Bayes under the Jeffreys prior,
// and generic Bayes by self-normalised importance sampling. Also the
// asymptotic (order N^-2) risk difference between two priors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shrinkpred/errors.hpp"
#include "shrinkpred/geometry.hpp"
#include "shrinkpred/models.hpp"
#include "shrinkpred/priors.hpp"
#include "shrinkpred/random.hpp"

namespace shrinkpred {

struct ISDiagnostics {
  std::string proposal;
  std::size_t draws = 0;
  double ess = 0.0;
  /// log of the mean unnormalised weight (marginal likelihood estimate).
  double log_normalizer = 0.0;
  std::size_t zero_weight_draws = 0;
};

/// Posterior draws with normalised weights.
struct WeightedSample {
  std::vector<ParamPoint> thetas;
  std::vector<double> weights;
};

class PredictiveDensity {
 public:
  using LogFn = std::function<double(const Observation&)>;

  PredictiveDensity(LogFn log_fn, std::string prior, std::string method)
      : log_fn_(std::move(log_fn)), prior_(std::move(prior)), method_(std::move(method)) {}

  [[nodiscard]] double log_density(const Observation& y) const { return log_fn_(y); }
  [[nodiscard]] double density(const Observation& y) const { return std::exp(log_fn_(y)); }

  [[nodiscard]] const std::string& prior() const { return prior_; }
  [[nodiscard]] const std::string& method() const { return method_; }
  [[nodiscard]] const std::optional<ISDiagnostics>& diagnostics() const { return diagnostics_; }
  [[nodiscard]] const std::shared_ptr<const WeightedSample>& posterior() const { return posterior_; }

  void set_diagnostics(ISDiagnostics d) { diagnostics_ = std::move(d); }
  void set_posterior(std::shared_ptr<const WeightedSample> s) { posterior_ = std::move(s); }

 private:
  LogFn log_fn_;
  std::string prior_;
  std::string method_;
  std::optional<ISDiagnostics> diagnostics_;
  std::shared_ptr<const WeightedSample> posterior_;
};

inline double log_sum_exp(std::span<const double> v) {
  double top = -std::numeric_limits<double>::infinity();
  for (double x : v) {
    top = std::max(top, x);
  }
  if (!std::isfinite(top)) {
    return top;
  }
  double sum = 0.0;
  for (double x : v) {
    sum += std::exp(x - top);
  }
  return top + std::log(sum);
}

/// Multivariate normal log-density.
inline double gaussian_log_density(const Vector& y, const Vector& mean, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw DomainError("gaussian_log_density: covariance is not positive definite");
  }
  const Vector z = llt.matrixL().solve(y - mean);
  const Matrix l = llt.matrixL();
  return -0.5 * static_cast<double>(y.size()) * detail::kLog2Pi -
         l.diagonal().array().log().sum() - 0.5 * z.squaredNorm();
}

/// y -> p(y | mle(data)).
inline PredictiveDensity plugin_predictive(const ModelPtr& model, const DataSet& data) {
  const ParamPoint theta = model->mle(data);
  return {[model, theta](const Observation& y) { return model->log_density(y, theta); }, "none",
          "plug-in"};
}

/// Bayes predictive of the normal model under the flat (Jeffreys) prior:
/// N(x_bar, (1 + 1/N) Sigma).
inline PredictiveDensity normal_jeffreys_predictive(const DataSet& data, const Matrix& covariance) {
  if (data.obs.empty()) {
    throw EstimationError("normal_jeffreys_predictive: empty data set");
  }
  const auto n = static_cast<double>(data.obs.size());
  Vector mean = Vector::Zero(covariance.rows());
  for (const auto& x : data.obs) {
    if (x.size() != covariance.rows()) {
      throw DimensionError("normal_jeffreys_predictive: observation dimension mismatch");
    }
    mean += x;
  }
  mean /= n;
  const Matrix cov = (1.0 + 1.0 / n) * covariance;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw DomainError("normal_jeffreys_predictive: covariance is not positive definite");
  }
  const Matrix l = llt.matrixL();
  const double log_norm = -0.5 * static_cast<double>(mean.size()) * detail::kLog2Pi -
                          l.diagonal().array().log().sum();
  return {[mean, l, log_norm](const Observation& y) {
            const Vector z = l.triangularView<Eigen::Lower>().solve(y - mean);
            return log_norm - 0.5 * z.squaredNorm();
          },
          "jeffreys", "closed-form"};
}

/// Bayes predictive of W_2(m, Sigma) under the Jeffreys prior given the
/// pooled statistic X~ of N observations: a matrix beta type II density
///   c |X~|^{Nm/2} |Y|^{(m-3)/2} / |X~ + Y|^{(Nm+m)/2},
///   c = G((Nm+m)/2) G((Nm+m-1)/2) / (pi^{1/2} G(Nm/2) G((Nm-1)/2) G(m/2) G((m-1)/2)).
inline PredictiveDensity wishart_jeffreys_predictive(const Eigen::Matrix2d& x_pooled, std::size_t n,
                                                     double m) {
  if (!is_spd(x_pooled)) {
    throw DomainError("wishart_jeffreys_predictive: pooled matrix is not positive definite");
  }
  const double nm = static_cast<double>(n) * m;
  if (!(nm > 1.0) || !(m > 1.0)) {
    throw DomainError("wishart_jeffreys_predictive needs Nm > 1 and m > 1");
  }
  const double log_c = std::lgamma(0.5 * (nm + m)) + std::lgamma(0.5 * (nm + m - 1.0)) -
                       0.5 * std::log(std::numbers::pi) - std::lgamma(0.5 * nm) -
                       std::lgamma(0.5 * (nm - 1.0)) - std::lgamma(0.5 * m) -
                       std::lgamma(0.5 * (m - 1.0));
  const double constant = log_c + 0.5 * nm * std::log(x_pooled.determinant());
  const Eigen::Matrix2d xp = x_pooled;
  return {[constant, xp, nm, m](const Observation& y) {
            const Eigen::Matrix2d ym = matrix_from_observation(y);
            const double det_y = ym.determinant();
            if (!(ym(0, 0) > 0.0 && det_y > 0.0)) {
              return -std::numeric_limits<double>::infinity();
            }
            return constant + 0.5 * (m - 3.0) * std::log(det_y) -
                   0.5 * (nm + m) * std::log((xp + ym).determinant());
          },
          "jeffreys", "closed-form"};
}

inline Eigen::Matrix2d pooled_matrix(const DataSet& data) {
  Eigen::Matrix2d pooled = Eigen::Matrix2d::Zero();
  for (const auto& x : data.obs) {
    pooled += matrix_from_observation(x);
  }
  return pooled;
}

struct IntegrationConfig {
  std::size_t draws = 1000;
  /// Proposal covariance = inflation x (observed information)^{-1}.
  double inflation = 4.0;
  /// Integration fails when ESS < draws x min_ess_fraction.
  double min_ess_fraction = 1.0 / 20.0;
  double hessian_step = 1e-4;
  /// Degrees of freedom of the multivariate-t main proposal component;
  /// infinity gives a Gaussian. Posteriors with exponential tails in the
  /// unconstrained coordinates (Wishart, small N) need a finite value.
  double proposal_dof = 5.0;
  /// Share of proposal draws placed radially around prior singular points.
  double defensive_fraction = 0.1;
  /// Extra points to place defensive components at, on top of the prior's
  /// own singular points. Paired comparisons put the union of both priors'
  /// points here so that both proposals coincide.
  std::vector<ParamPoint> defensive_points;
};

namespace detail {

/// Observed information -d^2 log L / du du^T by central differences.
inline Matrix observed_information(const Model& model, const DataSet& data, const Vector& u0,
                                   double step) {
  const auto d = u0.size();
  Vector h(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    h[i] = step * std::max(1.0, std::abs(u0[i]));
  }
  auto loglik = [&](const Vector& u) { return model.log_likelihood(data, model.from_unconstrained(u)); };
  Matrix info(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      Vector pp = u0, pm = u0, mp = u0, mm = u0;
      pp[i] += h[i]; pp[j] += h[j];
      pm[i] += h[i]; pm[j] -= h[j];
      mp[i] -= h[i]; mp[j] += h[j];
      mm[i] -= h[i]; mm[j] -= h[j];
      const double hij = (loglik(pp) - loglik(pm) - loglik(mp) + loglik(mm)) / (4.0 * h[i] * h[j]);
      info(i, j) = -hij;
      info(j, i) = -hij;
    }
  }
  return info;
}

}  // namespace detail

/// Bayes predictive p_pi(y | x^(N)) by self-normalised importance sampling.
///
/// Proposal: multivariate t in the model's unconstrained coordinates, centred
/// at the MLE with scale matrix `inflation` times the inverse observed
/// information, mixed with radial components at prior poles. Draws at which the prior is singular get weight zero.
/// Throws IntegrationError when the effective sample size falls below
/// `draws * min_ess_fraction`.
inline PredictiveDensity generic_bayes_predictive(const ModelPtr& model, const PriorDensity& prior,
                                                  const DataSet& data, const IntegrationConfig& cfg,
                                                  std::uint64_t seed) {
  if (prior.chart != model->chart()) {
    throw DomainError("prior " + prior.name + " is not defined on the chart of " + model->name());
  }
  if (cfg.draws < 2) {
    throw DomainError("importance sampling needs at least two draws");
  }
  const ParamPoint mle = model->mle(data);
  const Vector u0 = model->to_unconstrained(mle);
  const auto d = u0.size();

  Matrix info = detail::observed_information(*model, data, u0, cfg.hessian_step);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
  Vector lambda = eig.eigenvalues();
  if (!(lambda.maxCoeff() > 0.0) || !lambda.allFinite()) {
    throw EstimationError("observed information is not positive at the MLE");
  }
  lambda = lambda.cwiseMax(1e-8 * lambda.maxCoeff());
  // cov = inflation * info^{-1}; factor = V diag(sqrt(inflation / lambda)).
  const Matrix factor =
      eig.eigenvectors() * (cfg.inflation * lambda.cwiseInverse()).cwiseSqrt().asDiagonal();
  const double log_det_factor = 0.5 * (cfg.inflation * lambda.cwiseInverse()).array().log().sum();

  // Defensive components: u = xi + s * r * (z / |z|) with r half-normal,
  // whose density ~ t^{-(d-1)} near xi bounds the weights of priors with
  // integrable poles there.
  std::vector<Vector> poles;
  for (const auto* list : {&cfg.defensive_points, &prior.field.singular_points}) {
    for (const auto& xi : *list) {
      if (xi.chart != model->chart()) {
        continue;
      }
      Vector xu;
      try {
        xu = model->to_unconstrained(xi);
      } catch (const Error&) {
        continue;
      }
      if (std::none_of(poles.begin(), poles.end(), [&](const Vector& v) { return (v - xu).norm() == 0.0; })) {
        poles.push_back(std::move(xu));
      }
    }
  }
  const double beta = poles.empty() ? 0.0 : cfg.defensive_fraction;
  const double radial_scale = std::sqrt(cfg.inflation / lambda.mean());
  const double dd = static_cast<double>(d);
  const double log_sphere = std::log(2.0) + 0.5 * dd * std::log(std::numbers::pi) - std::lgamma(0.5 * dd);
  const Matrix whiten = (lambda / cfg.inflation).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  const double nu = cfg.proposal_dof;
  const bool student = std::isfinite(nu);
  if (!(nu > 0.0)) {
    throw DomainError("proposal degrees of freedom must be positive");
  }
  const double log_t_norm = student ? std::lgamma(0.5 * (nu + dd)) - std::lgamma(0.5 * nu) -
                                          0.5 * dd * std::log(nu * std::numbers::pi)
                                    : -0.5 * dd * detail::kLog2Pi;
  // Main component at squared whitened distance q from the MLE.
  auto log_core = [&](double q) {
    return log_t_norm - log_det_factor - (student ? 0.5 * (nu + dd) * std::log1p(q / nu) : 0.5 * q);
  };
  auto log_proposal = [&](const Vector& u) {
    const double core = log_core((whiten * (u - u0)).squaredNorm());
    if (beta == 0.0) {
      return core;
    }
    std::vector<double> parts{std::log1p(-beta) + core};
    for (const auto& xu : poles) {
      const double t = (u - xu).norm();
      const double log_half_normal = 0.5 * std::log(2.0 / std::numbers::pi) - std::log(radial_scale) -
                                     0.5 * (t / radial_scale) * (t / radial_scale);
      parts.push_back(std::log(beta / static_cast<double>(poles.size())) + log_half_normal - log_sphere -
                      (dd - 1.0) * std::log(t));
    }
    return log_sum_exp(parts);
  };

  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  std::chi_squared_distribution<double> chi2(student ? nu : 1.0);
  std::vector<ParamPoint> thetas;
  std::vector<double> log_w;
  std::vector<Vector> us;
  thetas.reserve(cfg.draws);
  us.reserve(cfg.draws);
  std::vector<double> log_q;
  log_q.reserve(cfg.draws);
  for (std::size_t k = 0; k < cfg.draws; ++k) {
    Vector z(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      z[i] = normal(rng);
    }
    // z / sqrt(g) is multivariate t with nu degrees of freedom.
    const double g = student ? chi2(rng) / nu : 1.0;
    Vector u;
    const double c = beta > 0.0 ? uniform(rng) : 1.0;
    if (c < beta && z.norm() > 0.0) {
      const auto j = std::min(poles.size() - 1, static_cast<std::size_t>(c / beta * static_cast<double>(poles.size())));
      u = poles[j] + (radial_scale * std::abs(normal(rng)) / z.norm()) * z;
    } else {
      u = u0 + factor * (z / std::sqrt(g));
    }
    try {
      thetas.push_back(model->from_unconstrained(u));
    } catch (const Error&) {
      // A defensive draw outside the chart; it carries no weight.
      thetas.push_back(model->from_unconstrained(u0));
      log_q.push_back(std::numeric_limits<double>::infinity());
      us.push_back(std::move(u));
      continue;
    }
    log_q.push_back(beta > 0.0 ? log_proposal(u) : log_core(z.squaredNorm() / g));
    us.push_back(std::move(u));
  }

  const std::vector<double> loglik = model->log_likelihoods(data, thetas);
  ISDiagnostics diag;
  diag.proposal = (student ? "t" + detail::format_number(nu) : std::string("gaussian")) + "(mle, " +
                  detail::format_number(cfg.inflation) + " x inverse observed information)";
  if (beta > 0.0) {
    diag.proposal += " + " + detail::format_number(beta) + " radial at " + std::to_string(poles.size()) + " pole(s)";
  }
  diag.draws = cfg.draws;
  log_w.resize(cfg.draws);
  for (std::size_t k = 0; k < cfg.draws; ++k) {
    double lp = -std::numeric_limits<double>::infinity();
    try {
      lp = prior.log_value(thetas[k]);
    } catch (const NumericalError&) {
    } catch (const DomainError&) {
    }
    const double lw = loglik[k] + lp + model->log_jacobian(us[k]) - log_q[k];
    if (std::isfinite(lw)) {
      log_w[k] = lw;
    } else {
      log_w[k] = -std::numeric_limits<double>::infinity();
      ++diag.zero_weight_draws;
    }
  }
  const double log_total = log_sum_exp(log_w);
  if (!std::isfinite(log_total)) {
    throw IntegrationError("importance sampling: every draw has zero weight");
  }
  diag.log_normalizer = log_total - std::log(static_cast<double>(cfg.draws));

  double sum_sq = 0.0;
  auto sample = std::make_shared<WeightedSample>();
  std::vector<ParamPoint> kept;
  std::vector<double> kept_log_w;
  for (std::size_t k = 0; k < cfg.draws; ++k) {
    const double lw = log_w[k] - log_total;
    const double w = std::exp(lw);
    sum_sq += w * w;
    if (lw > -60.0) {
      kept.push_back(thetas[k]);
      kept_log_w.push_back(lw);
      sample->thetas.push_back(thetas[k]);
      sample->weights.push_back(w);
    }
  }
  diag.ess = 1.0 / sum_sq;
  if (diag.ess < cfg.min_ess_fraction * static_cast<double>(cfg.draws)) {
    throw IntegrationError("importance sampling collapsed: ESS " + detail::format_number(diag.ess) +
                           " of " + std::to_string(cfg.draws) + " draws");
  }

  std::shared_ptr<const BatchLogDensity> batch = model->prepare(kept);
  auto weights = std::make_shared<const std::vector<double>>(std::move(kept_log_w));
  PredictiveDensity pred(
      [batch, weights](const Observation& y) {
        std::vector<double> terms(weights->size());
        batch->evaluate(y, terms);
        for (std::size_t k = 0; k < terms.size(); ++k) {
          terms[k] += (*weights)[k];
        }
        return log_sum_exp(terms);
      },
      prior.name, "importance-sampling");
  pred.set_diagnostics(std::move(diag));
  pred.set_posterior(std::move(sample));
  return pred;
}

/// Order N^-2 risk difference E[D(p, p_h)] - E[D(p, p_f)] at p.
///
/// For h = pi_J (d >= 2):
///   (1/2N^2) g^{ij} d_i log(f/pi_J) d_j log(f/pi_J) - (1/N^2)(pi_J/f) Lap(f/pi_J).
/// Otherwise (d >= 3), with g~ = (h/pi_J)^{2/(d-2)} g and its Laplacian Lap~:
///   N^-2 (h/pi_J)^{2/(d-2)} [(1/2)(h/f)^2 g~^{ij} d_i(f/h) d_j(f/h) - (h/f) Lap~(f/h)].
/// Positive values mean f asymptotically dominates h.
inline double asymptotic_risk_difference(const MetricField& metric, const PriorDensity& f,
                                         const PriorDensity& h, const PriorDensity& jeffreys, int d,
                                         const ParamPoint& p, std::size_t n,
                                         double step = kDefaultStep) {
  if (n < 1) {
    throw DomainError("asymptotic_risk_difference needs N >= 1");
  }
  if (metric.dim() != d || p.dim() != d) {
    throw DimensionError("asymptotic_risk_difference: dimension mismatch");
  }
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  if (h.name == jeffreys.name) {
    if (d < 2) {
      throw DimensionError("asymptotic_risk_difference needs d >= 2");
    }
    const ScalarField ratio = prior_ratio(f, jeffreys);
    const double r = ratio(p);
    const Vector grad = gradient(ratio, p, step, &metric.chart);
    const Matrix ginv = detail::checked_inverse(metric(p));
    const double grad_term = 0.5 * grad.dot(ginv * grad) / (r * r);
    const double lap_term = laplace_beltrami(ratio, metric, p, step) / r;
    return (grad_term - lap_term) / n2;
  }
  if (d <= 2) {
    throw DimensionError("asymptotic_risk_difference against a prior other than Jeffreys needs d >= 3");
  }
  const MetricField tilde = conformal_transform(metric, h.field, jeffreys.field, d);
  const ScalarField ratio = prior_ratio(f, h);
  const double q = ratio(p);
  const Vector grad = gradient(ratio, p, step, &metric.chart);
  const Matrix gt_inv = detail::checked_inverse(tilde(p));
  const double factor = std::pow(h(p) / jeffreys(p), 2.0 / (d - 2));
  const double grad_term = 0.5 * grad.dot(gt_inv * grad) / (q * q);
  const double lap_term = laplace_beltrami(ratio, tilde, p, step) / q;
  return factor * (grad_term - lap_term) / n2;
}

}  // namespace shrinkpred
