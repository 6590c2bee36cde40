#pragma once

// Monte Carlo Kullback-Leibler predictive risk. Replications are independent
// given seeds derived from (master seed, replication index) and are reduced
// in index order, so results do not depend on the number of workers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "shrinkpred/errors.hpp"
#include "shrinkpred/models.hpp"
#include "shrinkpred/predictive.hpp"
#include "shrinkpred/priors.hpp"
#include "shrinkpred/random.hpp"

namespace shrinkpred {

/// log densities below this are clipped (exp underflows past it).
inline constexpr double kLogDensityFloor = -745.0;

struct RiskEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t replications = 0;
  std::size_t inner_draws = 0;
  std::uint64_t seed = 0;
  /// Plain sample mean and standard error, before any control variate.
  double raw_mean = 0.0;
  double raw_std_error = 0.0;
  bool control_variate = false;
  std::size_t failed = 0;
  std::size_t clipped = 0;
  std::optional<Observation> first_clipped;
};

/// Closed-form KL(N(m1, S1) || N(m2, S2)).
inline double gaussian_kl_exact(const Vector& mean1, const Matrix& cov1, const Vector& mean2,
                                const Matrix& cov2) {
  const auto d = mean1.size();
  if (mean2.size() != d || cov1.rows() != d || cov2.rows() != d) {
    throw DimensionError("gaussian_kl_exact: dimension mismatch");
  }
  Eigen::LLT<Matrix> l1(cov1);
  Eigen::LLT<Matrix> l2(cov2);
  if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) {
    throw DomainError("gaussian_kl_exact: covariance is not positive definite");
  }
  const Vector diff = mean2 - mean1;
  const double trace = l2.solve(cov1).trace();
  const double quad = diff.dot(l2.solve(diff));
  const Matrix c1 = l1.matrixL();
  const Matrix c2 = l2.matrixL();
  const double log_det_ratio =
      2.0 * (c2.diagonal().array().log().sum() - c1.diagonal().array().log().sum());
  return 0.5 * (trace + quad - static_cast<double>(d) + log_det_ratio);
}

namespace detail {

inline double clipped_log(double v, std::size_t& clipped) {
  if (!(v >= kLogDensityFloor)) {
    ++clipped;
    return kLogDensityFloor;
  }
  return v;
}

inline void mean_and_stderr(const std::vector<double>& v, double& mean, double& se) {
  const auto n = static_cast<double>(v.size());
  mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= n;
  double ss = 0.0;
  for (double x : v) {
    ss += (x - mean) * (x - mean);
  }
  se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
}

/// Runs body(i) for i in [0, count) on `workers` threads. The first
/// exception is rethrown after all workers stop.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      body(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
          next = count;
        }
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

/// Regression (control-variate) adjustment of several responses sharing one
/// set of zero-mean controls. Returns, per response, the fitted intercept and
/// its standard error. OLS is linear in the response, so the adjusted mean
/// of a difference equals the difference of adjusted means.
inline std::vector<std::pair<double, double>> control_variate_means(
    const std::vector<std::vector<double>>& responses, const std::vector<Vector>& controls) {
  const auto rows = static_cast<Eigen::Index>(controls.size());
  const Eigen::Index cols = controls.front().size() + 1;
  Matrix x(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    x(r, 0) = 1.0;
    x.row(r).tail(cols - 1) = controls[static_cast<std::size_t>(r)].transpose();
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(x);
  const Eigen::Index rank = qr.rank();
  // (X^T X)^{-1}_00 through the pseudo-inverse of the normal equations.
  const Matrix xtx = x.transpose() * x;
  const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(xtx);
  const double inv00 = cod.pseudoInverse()(0, 0);
  std::vector<std::pair<double, double>> out;
  for (const auto& resp : responses) {
    Vector y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      y[r] = resp[static_cast<std::size_t>(r)];
    }
    const Vector beta = qr.solve(y);
    const double rss = (y - x * beta).squaredNorm();
    const double dof = static_cast<double>(rows - rank);
    const double sigma2 = dof > 0 ? rss / dof : 0.0;
    out.emplace_back(beta[0], std::sqrt(std::max(sigma2 * inv00, 0.0)));
  }
  return out;
}

/// Zero-mean controls for one replication: the summed data score and the
/// mean future-observation score at the true parameter.
inline Vector score_controls(const Model& model, const ParamPoint& theta, const DataSet& data,
                             const std::vector<Observation>& future) {
  const int d = theta.dim();
  Vector c = Vector::Zero(2 * d);
  for (const auto& x : data.obs) {
    c.head(d) += score(model, x, theta);
  }
  for (const auto& y : future) {
    c.tail(d) += score(model, y, theta);
  }
  c.tail(d) /= static_cast<double>(future.size());
  return c;
}

}  // namespace detail

/// Builds a predictive density from data and an integration seed.
using PredictiveBuilder = std::function<PredictiveDensity(const DataSet&, std::uint64_t)>;

enum class PredictiveMethod { automatic, closed_form, importance_sampling, plugin };

inline bool has_closed_form(const Model& model, const PriorDensity& prior) {
  return prior.name == "jeffreys" &&
         (model.chart().kind == ChartKind::euclidean || model.chart().kind == ChartKind::wishart);
}

/// Predictive constructor for a prior. `automatic` uses a closed form when
/// one exists (Jeffreys prior on the normal and Wishart models).
inline PredictiveBuilder bayes_builder(const ModelPtr& model, const PriorDensity& prior,
                                       const IntegrationConfig& cfg = {},
                                       PredictiveMethod method = PredictiveMethod::automatic) {
  if (method == PredictiveMethod::plugin) {
    return [model](const DataSet& data, std::uint64_t) { return plugin_predictive(model, data); };
  }
  const bool closed = has_closed_form(*model, prior);
  if (method == PredictiveMethod::closed_form && !closed) {
    throw DomainError("no closed-form predictive for prior " + prior.name + " on " + model->name());
  }
  if (closed && method != PredictiveMethod::importance_sampling) {
    if (model->chart().kind == ChartKind::euclidean) {
      const Matrix cov = dynamic_cast<const NormalModel&>(*model).covariance();
      return [cov](const DataSet& data, std::uint64_t) { return normal_jeffreys_predictive(data, cov); };
    }
    const double m = dynamic_cast<const Wishart2Model&>(*model).degrees_of_freedom();
    return [m](const DataSet& data, std::uint64_t) {
      return wishart_jeffreys_predictive(pooled_matrix(data), data.size(), m);
    };
  }
  return [model, prior, cfg](const DataSet& data, std::uint64_t seed) {
    return generic_bayes_predictive(model, prior, data, cfg, seed);
  };
}

/// Constructors for a paired comparison. When either prior needs importance
/// sampling both use it, so that they share proposal draws and the
/// integration error largely cancels in the difference.
inline std::pair<PredictiveBuilder, PredictiveBuilder> paired_builders(const ModelPtr& model,
                                                                       const PriorDensity& f,
                                                                       const PriorDensity& h,
                                                                       const IntegrationConfig& cfg = {}) {
  const bool closed = has_closed_form(*model, f) && has_closed_form(*model, h);
  const auto method = closed ? PredictiveMethod::closed_form : PredictiveMethod::importance_sampling;
  IntegrationConfig shared = cfg;
  for (const auto* prior : {&f, &h}) {
    shared.defensive_points.insert(shared.defensive_points.end(), prior->field.singular_points.begin(),
                                   prior->field.singular_points.end());
  }
  return {bayes_builder(model, f, shared, method), bayes_builder(model, h, shared, method)};
}

struct RiskOptions {
  unsigned workers = 1;
  /// Regress replication summaries on the score controls (zero mean).
  bool control_variate = true;
  /// Abort when more than this fraction of replications fail.
  double max_failure_fraction = 0.01;
};

/// KL(p(.|theta) || pred) by n_y draws y ~ p(.|theta).
inline RiskEstimate kl_divergence_mc(const Model& model, const ParamPoint& theta,
                                     const PredictiveDensity& pred, std::size_t n_y,
                                     std::uint64_t seed) {
  if (n_y < 2) {
    throw DomainError("kl_divergence_mc needs n_y >= 2");
  }
  Rng rng = make_rng(seed);
  RiskEstimate est;
  est.seed = seed;
  est.inner_draws = n_y;
  est.replications = 1;
  std::vector<double> terms;
  terms.reserve(n_y);
  for (const auto& y : model.sample(theta, n_y, rng)) {
    const std::size_t before = est.clipped;
    const double lp = detail::clipped_log(pred.log_density(y), est.clipped);
    if (est.clipped > before && !est.first_clipped) {
      est.first_clipped = y;
    }
    terms.push_back(model.log_density(y, theta) - lp);
  }
  detail::mean_and_stderr(terms, est.mean, est.std_error);
  est.raw_mean = est.mean;
  est.raw_std_error = est.std_error;
  return est;
}

struct PairedRisk {
  RiskEstimate risk_f;
  RiskEstimate risk_h;
  /// risk_h - risk_f; positive means f is better.
  RiskEstimate difference;
};

namespace detail {

struct Replication {
  bool ok = false;
  double risk_f = 0.0;
  double risk_h = 0.0;
  std::size_t clipped = 0;
  std::optional<Observation> first_clipped;
  Vector controls;
};

inline RiskEstimate summarize(const std::vector<double>& values, std::size_t reps, std::size_t n_y,
                              std::uint64_t seed, std::size_t failed) {
  RiskEstimate est;
  est.replications = reps;
  est.inner_draws = n_y;
  est.seed = seed;
  est.failed = failed;
  mean_and_stderr(values, est.raw_mean, est.raw_std_error);
  est.mean = est.raw_mean;
  est.std_error = est.raw_std_error;
  return est;
}

/// Shared replication loop. With `build_h` empty only the f side is computed.
inline PairedRisk run_replications(const Model& model, const PredictiveBuilder& build_f,
                                   const PredictiveBuilder* build_h, const ParamPoint& theta,
                                   std::size_t n, std::size_t reps, std::size_t n_y,
                                   std::uint64_t seed, const RiskOptions& opts) {
  if (reps < 2) {
    throw DomainError("risk estimation needs reps >= 2");
  }
  if (n_y < 1 || n < 1) {
    throw DomainError("risk estimation needs N >= 1 and n_y >= 1");
  }
  std::vector<Replication> results(reps);
  parallel_for(reps, opts.workers, [&](std::size_t r) {
    const std::uint64_t rs = derive_seed(seed, {r});
    Rng data_rng = make_rng(stream_seed(rs, Stream::data));
    Rng future_rng = make_rng(stream_seed(rs, Stream::future));
    const std::uint64_t integration_seed = stream_seed(rs, Stream::integration);
    Replication& out = results[r];
    const DataSet data = model.sample_data(theta, n, data_rng);
    const auto future = model.sample(theta, n_y, future_rng);
    std::optional<PredictiveDensity> pf;
    std::optional<PredictiveDensity> ph;
    try {
      pf.emplace(build_f(data, integration_seed));
      if (build_h) {
        ph.emplace((*build_h)(data, integration_seed));
      }
    } catch (const NumericalError&) {
      return;
    }
    double sum_f = 0.0;
    double sum_h = 0.0;
    for (const auto& y : future) {
      const double truth = model.log_density(y, theta);
      const std::size_t before = out.clipped;
      sum_f += truth - clipped_log(pf->log_density(y), out.clipped);
      if (ph) {
        sum_h += truth - clipped_log(ph->log_density(y), out.clipped);
      }
      if (out.clipped > before && !out.first_clipped) {
        out.first_clipped = y;
      }
    }
    out.risk_f = sum_f / static_cast<double>(n_y);
    out.risk_h = sum_h / static_cast<double>(n_y);
    out.controls = score_controls(model, theta, data, future);
    out.ok = true;
  });

  std::vector<double> f_values;
  std::vector<double> h_values;
  std::vector<double> diff_values;
  std::vector<Vector> controls;
  std::size_t failed = 0;
  std::size_t clipped = 0;
  std::optional<Observation> first_clipped;
  for (const auto& r : results) {
    if (!r.ok) {
      ++failed;
      continue;
    }
    f_values.push_back(r.risk_f);
    h_values.push_back(r.risk_h);
    diff_values.push_back(r.risk_h - r.risk_f);
    controls.push_back(r.controls);
    clipped += r.clipped;
    if (r.first_clipped && !first_clipped) {
      first_clipped = r.first_clipped;
    }
  }
  if (static_cast<double>(failed) > opts.max_failure_fraction * static_cast<double>(reps) ||
      f_values.size() < 2) {
    throw NumericalError(std::to_string(failed) + " of " + std::to_string(reps) +
                         " replications failed to build a predictive density");
  }
  PairedRisk out;
  out.risk_f = summarize(f_values, reps, n_y, seed, failed);
  out.risk_h = summarize(h_values, reps, n_y, seed, failed);
  out.difference = summarize(diff_values, reps, n_y, seed, failed);
  for (auto* est : {&out.risk_f, &out.risk_h, &out.difference}) {
    est->clipped = clipped;
    est->first_clipped = first_clipped;
  }
  const std::size_t n_controls = static_cast<std::size_t>(controls.front().size());
  if (opts.control_variate && controls.size() >= 4 * (n_controls + 1)) {
    const auto adjusted = control_variate_means({f_values, h_values, diff_values}, controls);
    RiskEstimate* targets[] = {&out.risk_f, &out.risk_h, &out.difference};
    for (std::size_t i = 0; i < 3; ++i) {
      targets[i]->mean = adjusted[i].first;
      targets[i]->std_error = adjusted[i].second;
      targets[i]->control_variate = true;
    }
  }
  return out;
}

}  // namespace detail

/// E[D(p(y|theta), p_hat(y; x^(N)))] by nested Monte Carlo: `reps` data sets
/// of size N, each scored on n_y future draws.
inline RiskEstimate risk_mc(const ModelPtr& model, const PredictiveBuilder& build,
                            const ParamPoint& theta, std::size_t n, std::size_t reps,
                            std::size_t n_y, std::uint64_t seed, const RiskOptions& opts = {}) {
  return detail::run_replications(*model, build, nullptr, theta, n, reps, n_y, seed, opts).risk_f;
}

inline RiskEstimate risk_mc(const ModelPtr& model, const PriorDensity& prior, const ParamPoint& theta,
                            std::size_t n, std::size_t reps, std::size_t n_y, std::uint64_t seed,
                            const RiskOptions& opts = {}, const IntegrationConfig& cfg = {}) {
  return risk_mc(model, bayes_builder(model, prior, cfg), theta, n, reps, n_y, seed, opts);
}

/// Paired risk difference D_h - D_f with common random numbers: both
/// predictives see the same data, the same future draws and the same
/// integration seed.
inline PairedRisk paired_risk_difference(const ModelPtr& model, const PredictiveBuilder& build_f,
                                         const PredictiveBuilder& build_h, const ParamPoint& theta,
                                         std::size_t n, std::size_t reps, std::size_t n_y,
                                         std::uint64_t seed, const RiskOptions& opts = {}) {
  return detail::run_replications(*model, build_f, &build_h, theta, n, reps, n_y, seed, opts);
}

inline PairedRisk paired_risk_difference(const ModelPtr& model, const PriorDensity& f,
                                         const PriorDensity& h, const ParamPoint& theta,
                                         std::size_t n, std::size_t reps, std::size_t n_y,
                                         std::uint64_t seed, const RiskOptions& opts = {},
                                         const IntegrationConfig& cfg = {}) {
  const auto [bf, bh] = paired_builders(model, f, h, cfg);
  return paired_risk_difference(model, bf, bh, theta, n, reps, n_y, seed, opts);
}

enum class Verdict { dominates, inconclusive, h_better, error };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::dominates:
      return "dominates";
    case Verdict::inconclusive:
      return "inconclusive";
    case Verdict::h_better:
      return "h-better";
    default:
      return "error";
  }
}

/// 3-standard-error rule on the paired difference.
inline Verdict classify(const RiskEstimate& diff, double sigmas = 3.0) {
  if (diff.mean > sigmas * diff.std_error && diff.mean > 0.0) {
    return Verdict::dominates;
  }
  if (diff.mean < -sigmas * diff.std_error && diff.mean < 0.0) {
    return Verdict::h_better;
  }
  return Verdict::inconclusive;
}

struct ComparisonRow {
  ParamPoint theta;
  std::size_t n = 0;
  PairedRisk risk;
  Verdict verdict = Verdict::inconclusive;
  std::vector<std::string> flags;
};

struct ComparisonReport {
  std::string model;
  std::string prior_f;
  std::string prior_h;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::size_t n_y = 0;
  std::vector<ComparisonRow> rows;

  [[nodiscard]] std::size_t count(Verdict v) const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [v](const ComparisonRow& r) { return r.verdict == v; }));
  }
};

/// One paired comparison per (theta, N), grid-major. Row failures are
/// recorded in the row and do not abort the scan.
inline ComparisonReport dominance_scan(const ModelPtr& model, const PredictiveBuilder& build_f,
                                       const PredictiveBuilder& build_h, const std::string& name_f,
                                       const std::string& name_h,
                                       const std::vector<ParamPoint>& grid,
                                       const std::vector<std::size_t>& n_list, std::size_t reps,
                                       std::size_t n_y, std::uint64_t seed,
                                       const RiskOptions& opts = {}) {
  if (grid.empty() || n_list.empty()) {
    throw DomainError("dominance_scan needs a nonempty grid and N list");
  }
  ComparisonReport report{model->name(), name_f, name_h, seed, reps, n_y, {}};
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t j = 0; j < n_list.size(); ++j) {
      ComparisonRow row;
      row.theta = grid[g];
      row.n = n_list[j];
      try {
        row.risk = paired_risk_difference(model, build_f, build_h, grid[g], n_list[j], reps, n_y,
                                          derive_seed(seed, {g, j}), opts);
        row.verdict = classify(row.risk.difference);
        if (row.risk.difference.clipped > 0) {
          row.flags.push_back("clipped:" + std::to_string(row.risk.difference.clipped));
        }
        if (row.risk.difference.failed > 0) {
          row.flags.push_back("failed:" + std::to_string(row.risk.difference.failed));
        }
      } catch (const Error& e) {
        row.verdict = Verdict::error;
        row.flags.push_back(std::string("error:") + e.what());
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

inline ComparisonReport dominance_scan(const ModelPtr& model, const PriorDensity& f,
                                       const PriorDensity& h, const std::vector<ParamPoint>& grid,
                                       const std::vector<std::size_t>& n_list, std::size_t reps,
                                       std::size_t n_y, std::uint64_t seed,
                                       const RiskOptions& opts = {}, const IntegrationConfig& cfg = {}) {
  const auto [bf, bh] = paired_builders(model, f, h, cfg);
  return dominance_scan(model, bf, bh, f.name, h.name, grid, n_list, reps, n_y, seed, opts);
}

}  // namespace shrinkpred
