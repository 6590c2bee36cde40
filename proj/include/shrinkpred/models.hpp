#pragma once

// The three statistical families: multivariate normal with known covariance,
// the normal location-scale family, and the 2x2 Wishart family. Each exposes
// sampling, log-density, closed-form Fisher metric and maximum likelihood.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "shrinkpred/errors.hpp"
#include "shrinkpred/random.hpp"
#include "shrinkpred/types.hpp"

namespace shrinkpred {

using Observation = Vector;

/// Observations x(1), ..., x(N) from one model.
struct DataSet {
  std::vector<Observation> obs;
  std::string model;

  [[nodiscard]] std::size_t size() const { return obs.size(); }
};

/// log p(y | theta_k) for a fixed list of parameters, evaluated for many y.
class BatchLogDensity {
 public:
  virtual ~BatchLogDensity() = default;
  [[nodiscard]] virtual std::size_t size() const = 0;
  virtual void evaluate(const Observation& y, std::span<double> out) const = 0;
};

class Model {
 public:
  virtual ~Model() = default;

  /// Canonical model spec, parseable by make_model().
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual int dim() const = 0;
  [[nodiscard]] virtual int obs_dim() const = 0;
  [[nodiscard]] virtual Chart chart() const = 0;
  [[nodiscard]] virtual ParamPoint origin() const = 0;

  [[nodiscard]] virtual double log_density(const Observation& x, const ParamPoint& theta) const = 0;
  virtual std::vector<Observation> sample(const ParamPoint& theta, std::size_t n, Rng& rng) const = 0;
  [[nodiscard]] virtual MetricField fisher_metric() const = 0;
  [[nodiscard]] virtual ParamPoint mle(const DataSet& data) const = 0;

  /// Global unconstrained coordinates used for posterior integration.
  [[nodiscard]] virtual Vector to_unconstrained(const ParamPoint& theta) const { return theta.coords; }
  [[nodiscard]] virtual ParamPoint from_unconstrained(const Vector& u) const { return {u, chart()}; }
  /// log |d theta / d u|.
  [[nodiscard]] virtual double log_jacobian(const Vector& /*u*/) const { return 0.0; }

  [[nodiscard]] virtual std::unique_ptr<BatchLogDensity> prepare(std::vector<ParamPoint> thetas) const;

  /// log p(x^(N) | theta_k) for every theta_k.
  [[nodiscard]] virtual std::vector<double> log_likelihoods(const DataSet& data,
                                                          const std::vector<ParamPoint>& thetas) const;

  [[nodiscard]] double log_likelihood(const DataSet& data, const ParamPoint& theta) const {
    double sum = 0.0;
    for (const auto& x : data.obs) {
      sum += log_density(x, theta);
    }
    return sum;
  }

  [[nodiscard]] DataSet sample_data(const ParamPoint& theta, std::size_t n, Rng& rng) const {
    return {sample(theta, n, rng), name()};
  }
};

using ModelPtr = std::shared_ptr<const Model>;

namespace detail {

class GenericBatch final : public BatchLogDensity {
 public:
  GenericBatch(const Model& model, std::vector<ParamPoint> thetas)
      : model_(model), thetas_(std::move(thetas)) {}
  [[nodiscard]] std::size_t size() const override { return thetas_.size(); }
  void evaluate(const Observation& y, std::span<double> out) const override {
    for (std::size_t k = 0; k < thetas_.size(); ++k) {
      out[k] = model_.log_density(y, thetas_[k]);
    }
  }

 private:
  const Model& model_;
  std::vector<ParamPoint> thetas_;
};

inline constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace detail

inline std::unique_ptr<BatchLogDensity> Model::prepare(std::vector<ParamPoint> thetas) const {
  return std::make_unique<detail::GenericBatch>(*this, std::move(thetas));
}

inline std::vector<double> Model::log_likelihoods(const DataSet& data,
                                                  const std::vector<ParamPoint>& thetas) const {
  const auto batch = prepare(thetas);
  std::vector<double> total(thetas.size(), 0.0);
  std::vector<double> buffer(thetas.size());
  for (const auto& x : data.obs) {
    batch->evaluate(x, buffer);
    for (std::size_t k = 0; k < total.size(); ++k) {
      total[k] += buffer[k];
    }
  }
  return total;
}

// ---------------------------------------------------------------------------
// Multivariate normal with known covariance.

/// N_d(mu, Sigma) with Sigma known. The chart is the whitened mean
/// L^{-1} mu (Sigma = L L^T), so the Fisher metric is the identity.
class NormalModel final : public Model {
 public:
  NormalModel(int d, const Matrix& covariance) : d_(d), cov_(covariance) {
    if (d < 1) {
      throw DimensionError("normal model needs d >= 1");
    }
    if (covariance.rows() != d || covariance.cols() != d) {
      throw DimensionError("normal model covariance must be d x d");
    }
    if (!covariance.isApprox(covariance.transpose())) {
      throw DomainError("normal model covariance is not symmetric");
    }
    Eigen::LLT<Matrix> llt(covariance);
    if (llt.info() != Eigen::Success) {
      throw DomainError("normal model covariance is not positive definite");
    }
    chol_ = llt.matrixL();
    chol_inv_ = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
    log_norm_ = -0.5 * d * detail::kLog2Pi - chol_.diagonal().array().log().sum();
  }

  explicit NormalModel(int d) : NormalModel(d, Matrix::Identity(d, d)) {}

  [[nodiscard]] std::string name() const override { return "normal" + std::to_string(d_); }
  [[nodiscard]] int dim() const override { return d_; }
  [[nodiscard]] int obs_dim() const override { return d_; }
  [[nodiscard]] Chart chart() const override { return Chart::euclidean(d_); }
  [[nodiscard]] ParamPoint origin() const override { return {Vector::Zero(d_), chart()}; }
  [[nodiscard]] const Matrix& covariance() const { return cov_; }
  [[nodiscard]] const Matrix& cholesky() const { return chol_; }

  /// Whitened coordinates of an observation.
  [[nodiscard]] Vector whiten(const Observation& x) const { return chol_inv_ * x; }
  [[nodiscard]] Vector mean_of(const ParamPoint& theta) const { return chol_ * theta.coords; }

  [[nodiscard]] double log_density(const Observation& x, const ParamPoint& theta) const override {
    return log_norm_ - 0.5 * (whiten(x) - theta.coords).squaredNorm();
  }

  std::vector<Observation> sample(const ParamPoint& theta, std::size_t n, Rng& rng) const override {
    std::normal_distribution<double> normal;
    std::vector<Observation> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vector z(d_);
      for (int j = 0; j < d_; ++j) {
        z[j] = normal(rng);
      }
      out.emplace_back(chol_ * (theta.coords + z));
    }
    return out;
  }

  [[nodiscard]] MetricField fisher_metric() const override {
    const int d = d_;
    return {[d](const ParamPoint&) -> Matrix { return Matrix::Identity(d, d); }, chart(),
            "identity"};
  }

  [[nodiscard]] ParamPoint mle(const DataSet& data) const override {
    if (data.obs.empty()) {
      throw EstimationError("normal mle: empty data set");
    }
    Vector mean = Vector::Zero(d_);
    for (const auto& x : data.obs) {
      mean += x;
    }
    mean /= static_cast<double>(data.obs.size());
    return {chol_inv_ * mean, chart()};
  }

  [[nodiscard]] std::unique_ptr<BatchLogDensity> prepare(std::vector<ParamPoint> thetas) const override;

  /// Uses the sufficient statistics sum z_i and sum |z_i|^2 of the whitened data.
  [[nodiscard]] std::vector<double> log_likelihoods(const DataSet& data,
                                                  const std::vector<ParamPoint>& thetas) const override {
    const auto n = static_cast<double>(data.obs.size());
    Vector sum = Vector::Zero(d_);
    double sum_sq = 0.0;
    for (const auto& x : data.obs) {
      const Vector z = whiten(x);
      sum += z;
      sum_sq += z.squaredNorm();
    }
    std::vector<double> out;
    out.reserve(thetas.size());
    for (const auto& t : thetas) {
      out.push_back(n * log_norm_ - 0.5 * (sum_sq - 2.0 * t.coords.dot(sum) + n * t.coords.squaredNorm()));
    }
    return out;
  }

 private:
  int d_;
  Matrix cov_;
  Matrix chol_;
  Matrix chol_inv_;
  double log_norm_ = 0.0;
};

namespace detail {

class NormalBatch final : public BatchLogDensity {
 public:
  NormalBatch(const NormalModel& model, const std::vector<ParamPoint>& thetas)
      : model_(model), d_(model.dim()), means_(model.dim(), static_cast<Eigen::Index>(thetas.size())) {
    for (std::size_t k = 0; k < thetas.size(); ++k) {
      means_.col(static_cast<Eigen::Index>(k)) = thetas[k].coords;
    }
    log_norm_ = model.log_density(Vector::Zero(d_), ParamPoint(Vector::Zero(d_), model.chart()));
  }
  [[nodiscard]] std::size_t size() const override { return static_cast<std::size_t>(means_.cols()); }
  void evaluate(const Observation& y, std::span<double> out) const override {
    const Vector z = model_.whiten(y);
    for (Eigen::Index k = 0; k < means_.cols(); ++k) {
      double q = 0.0;
      for (int j = 0; j < d_; ++j) {
        const double diff = z[j] - means_(j, k);
        q += diff * diff;
      }
      out[static_cast<std::size_t>(k)] = log_norm_ - 0.5 * q;
    }
  }

 private:
  const NormalModel& model_;
  int d_;
  Matrix means_;
  double log_norm_;
};

}  // namespace detail

inline std::unique_ptr<BatchLogDensity> NormalModel::prepare(std::vector<ParamPoint> thetas) const {
  return std::make_unique<detail::NormalBatch>(*this, thetas);
}

// ---------------------------------------------------------------------------
// Normal location-scale family.

/// Fisher-metric constant of the normal location-scale chart: g = (a / sigma^2) I.
inline constexpr double kLocationScaleA = 2.0;

/// N(location, sigma^2) with chart (mu, sigma), location = sqrt(a) mu, so
/// that the Fisher metric is (a / sigma^2) I with a = 2.
class LocationScaleModel final : public Model {
 public:
  static constexpr double a = kLocationScaleA;

  [[nodiscard]] std::string name() const override { return "location-scale"; }
  [[nodiscard]] int dim() const override { return 2; }
  [[nodiscard]] int obs_dim() const override { return 1; }
  [[nodiscard]] Chart chart() const override { return Chart::location_scale(); }
  [[nodiscard]] ParamPoint origin() const override { return make_point({0.0, 1.0}, chart()); }

  static double location(const ParamPoint& theta) { return std::sqrt(a) * theta[0]; }

  [[nodiscard]] double log_density(const Observation& x, const ParamPoint& theta) const override {
    const double sigma = theta[1];
    const double z = (x[0] - location(theta)) / sigma;
    return -0.5 * z * z - 0.5 * detail::kLog2Pi - std::log(sigma);
  }

  std::vector<Observation> sample(const ParamPoint& theta, std::size_t n, Rng& rng) const override {
    std::normal_distribution<double> normal;
    std::vector<Observation> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Vector x(1);
      x[0] = location(theta) + theta[1] * normal(rng);
      out.push_back(std::move(x));
    }
    return out;
  }

  [[nodiscard]] MetricField fisher_metric() const override {
    return {[](const ParamPoint& p) -> Matrix {
              return (a / (p[1] * p[1])) * Matrix::Identity(2, 2);
            },
            chart(), "a/sigma^2 I"};
  }

  /// (rescaled sample mean, sample standard deviation with divisor N).
  [[nodiscard]] ParamPoint mle(const DataSet& data) const override {
    const auto n = static_cast<double>(data.obs.size());
    if (data.obs.size() < 2) {
      throw EstimationError("location-scale mle needs at least two observations");
    }
    double mean = 0.0;
    for (const auto& x : data.obs) {
      mean += x[0];
    }
    mean /= n;
    double ss = 0.0;
    for (const auto& x : data.obs) {
      ss += (x[0] - mean) * (x[0] - mean);
    }
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0)) {
      throw EstimationError("location-scale mle: zero sample variance");
    }
    return make_point({mean / std::sqrt(a), sd}, chart());
  }

  [[nodiscard]] Vector to_unconstrained(const ParamPoint& theta) const override {
    Vector u(2);
    u << theta[0], std::log(theta[1]);
    return u;
  }
  [[nodiscard]] ParamPoint from_unconstrained(const Vector& u) const override {
    return make_point({u[0], std::exp(u[1])}, chart());
  }
  [[nodiscard]] double log_jacobian(const Vector& u) const override { return u[1]; }
};

// ---------------------------------------------------------------------------
// 2x2 Wishart family.

/// Chart (lambda, rho, theta) of 2x2 SPD matrices:
/// Sigma = e^lambda R(theta/2) diag(e^rho, e^-rho) R(theta/2)^T.
struct WishartCoords {
  double lambda = 0.0;
  double rho = 0.0;
  double theta = 0.0;
};

inline Eigen::Matrix2d sigma_from_coords(const WishartCoords& c) {
  const double scale = std::exp(c.lambda);
  const double ch = std::cosh(c.rho);
  const double sh = std::sinh(c.rho);
  const double ct = std::cos(c.theta);
  const double st = std::sin(c.theta);
  Eigen::Matrix2d s;
  s << ch + sh * ct, sh * st, sh * st, ch - sh * ct;
  return scale * s;
}

inline bool is_spd(const Eigen::Matrix2d& s) {
  return s.allFinite() && std::abs(s(0, 1) - s(1, 0)) <= 1e-12 * (std::abs(s(0, 1)) + s.cwiseAbs().maxCoeff()) &&
         s(0, 0) > 0.0 && s.determinant() > 0.0;
}

/// Inverse of sigma_from_coords; theta = 0 when rho = 0 (isotropic matrices).
inline WishartCoords coords_from_sigma(const Eigen::Matrix2d& s) {
  if (!is_spd(s)) {
    throw DomainError("coords_from_sigma: matrix is not symmetric positive definite");
  }
  const double b = 0.5 * (s(0, 1) + s(1, 0));
  const double half_diff = 0.5 * (s(0, 0) - s(1, 1));
  const double radius = std::hypot(half_diff, b);  // e^lambda sinh(rho)
  const double mean = 0.5 * (s(0, 0) + s(1, 1));   // e^lambda cosh(rho)
  WishartCoords c;
  c.lambda = 0.5 * std::log(s.determinant());
  c.rho = 0.5 * std::log((mean + radius) / (mean - radius));
  if (radius > 0.0) {
    c.theta = std::atan2(b, half_diff);
    if (c.theta < 0.0) {
      c.theta += 2.0 * std::numbers::pi;
    }
  }
  return c;
}

inline Observation observation_from_matrix(const Eigen::Matrix2d& x) {
  Observation o(3);
  o << x(0, 0), 0.5 * (x(0, 1) + x(1, 0)), x(1, 1);
  return o;
}

inline Eigen::Matrix2d matrix_from_observation(const Observation& o) {
  Eigen::Matrix2d x;
  x << o[0], o[1], o[1], o[2];
  return x;
}

inline WishartCoords wishart_coords(const ParamPoint& p) { return {p[0], p[1], p[2]}; }

inline ParamPoint to_param(const WishartCoords& c) {
  return make_point({c.lambda, c.rho, c.theta}, Chart::wishart());
}

/// The Fisher inner product (m / 2) tr(Sigma^-1 A Sigma^-1 B) on tangent vectors.
inline double wishart_inner_product(const Eigen::Matrix2d& sigma, const Eigen::Matrix2d& a,
                                    const Eigen::Matrix2d& b, double m) {
  const Eigen::Matrix2d inv = sigma.inverse();
  return 0.5 * m * (inv * a * inv * b).trace();
}

/// log Gamma_2(a) = (1/2) log(pi) + log Gamma(a) + log Gamma(a - 1/2).
inline double log_multigamma2(double a) {
  return 0.5 * std::log(std::numbers::pi) + std::lgamma(a) + std::lgamma(a - 0.5);
}

/// sinh(rho), with its series near zero.
inline double stable_sinh(double rho) {
  return std::abs(rho) < 1e-6 ? rho + rho * rho * rho / 6.0 : std::sinh(rho);
}

/// W_2(m, Sigma) over 2x2 SPD matrices stored as (x11, x12, x22).
class Wishart2Model final : public Model {
 public:
  explicit Wishart2Model(double m) : m_(m) {
    if (!(m >= 2.0)) {
      throw DomainError("wishart2 model needs m >= 2");
    }
    log_norm_ = -m * std::log(2.0) - log_multigamma2(0.5 * m);
  }

  [[nodiscard]] double degrees_of_freedom() const { return m_; }
  [[nodiscard]] std::string name() const override;
  [[nodiscard]] int dim() const override { return 3; }
  [[nodiscard]] int obs_dim() const override { return 3; }
  [[nodiscard]] Chart chart() const override { return Chart::wishart(); }
  [[nodiscard]] ParamPoint origin() const override { return make_point({0.0, 0.0, 0.0}, chart()); }

  [[nodiscard]] double log_density(const Observation& x, const ParamPoint& theta) const override {
    const auto c = wishart_coords(theta);
    const double det_x = x[0] * x[2] - x[1] * x[1];
    if (!(x[0] > 0.0 && det_x > 0.0)) {
      return -std::numeric_limits<double>::infinity();
    }
    const Eigen::Matrix2d inv = sigma_from_coords({-c.lambda, -c.rho, c.theta});
    const double tr = inv(0, 0) * x[0] + 2.0 * inv(0, 1) * x[1] + inv(1, 1) * x[2];
    return log_norm_ - m_ * c.lambda + 0.5 * (m_ - 3.0) * std::log(det_x) - 0.5 * tr;
  }

  /// Bartlett construction: X = L A A^T L^T with A lower triangular,
  /// A_11^2 ~ chi2(m), A_22^2 ~ chi2(m - 1), A_21 ~ N(0, 1).
  std::vector<Observation> sample(const ParamPoint& theta, std::size_t n, Rng& rng) const override {
    const Eigen::Matrix2d sigma = sigma_from_coords(wishart_coords(theta));
    return sample_sigma(sigma, n, rng);
  }

  std::vector<Observation> sample_sigma(const Eigen::Matrix2d& sigma, std::size_t n, Rng& rng) const {
    const Eigen::Matrix2d l = sigma.llt().matrixL();
    std::chi_squared_distribution<double> chi_m(m_);
    std::chi_squared_distribution<double> chi_m1(m_ - 1.0);
    std::normal_distribution<double> normal;
    std::vector<Observation> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      Eigen::Matrix2d a = Eigen::Matrix2d::Zero();
      a(0, 0) = std::sqrt(chi_m(rng));
      a(1, 0) = normal(rng);
      a(1, 1) = std::sqrt(chi_m1(rng));
      const Eigen::Matrix2d la = l * a;
      out.push_back(observation_from_matrix(la * la.transpose()));
    }
    return out;
  }

  /// m (d lambda^2 + d rho^2 + sinh^2(rho) d theta^2).
  [[nodiscard]] MetricField fisher_metric() const override {
    const double m = m_;
    return {[m](const ParamPoint& p) -> Matrix {
              const double s = stable_sinh(p[1]);
              Matrix g = Matrix::Zero(3, 3);
              g(0, 0) = m;
              g(1, 1) = m;
              g(2, 2) = m * s * s;
              return g;
            },
            chart(), "m diag(1, 1, sinh^2 rho)"};
  }

  /// Sigma_hat = (sum of X(l)) / (N m).
  [[nodiscard]] ParamPoint mle(const DataSet& data) const override {
    if (data.obs.empty()) {
      throw EstimationError("wishart mle: empty data set");
    }
    Eigen::Matrix2d pooled = Eigen::Matrix2d::Zero();
    for (const auto& x : data.obs) {
      pooled += matrix_from_observation(x);
    }
    const Eigen::Matrix2d est = pooled / (static_cast<double>(data.obs.size()) * m_);
    if (!is_spd(est)) {
      throw EstimationError("wishart mle: pooled matrix is not positive definite");
    }
    return to_param(coords_from_sigma(est));
  }

  /// Matrix-logarithm coordinates: log Sigma = lambda I + [[u, v], [v, -u]],
  /// (u, v) = rho (cos theta, sin theta). Smooth through rho = 0.
  [[nodiscard]] Vector to_unconstrained(const ParamPoint& theta) const override {
    Vector u(3);
    u << theta[0], theta[1] * std::cos(theta[2]), theta[1] * std::sin(theta[2]);
    return u;
  }
  [[nodiscard]] ParamPoint from_unconstrained(const Vector& u) const override {
    double angle = std::atan2(u[2], u[1]);
    if (angle < 0.0) {
      angle += 2.0 * std::numbers::pi;
    }
    return make_point({u[0], std::hypot(u[1], u[2]), angle}, chart());
  }
  /// d lambda d rho d theta = d lambda du dv / rho.
  [[nodiscard]] double log_jacobian(const Vector& u) const override {
    return -std::log(std::hypot(u[1], u[2]));
  }

  [[nodiscard]] std::unique_ptr<BatchLogDensity> prepare(std::vector<ParamPoint> thetas) const override;

 private:
  double m_;
  double log_norm_;
};

namespace detail {

class WishartBatch final : public BatchLogDensity {
 public:
  WishartBatch(double m, double log_norm, const std::vector<ParamPoint>& thetas) : m_(m) {
    terms_.reserve(thetas.size());
    for (const auto& t : thetas) {
      const auto c = wishart_coords(t);
      const Eigen::Matrix2d inv = sigma_from_coords({-c.lambda, -c.rho, c.theta});
      terms_.push_back({inv(0, 0), 2.0 * inv(0, 1), inv(1, 1), log_norm - m * c.lambda});
    }
  }
  [[nodiscard]] std::size_t size() const override { return terms_.size(); }
  void evaluate(const Observation& x, std::span<double> out) const override {
    const double det_x = x[0] * x[2] - x[1] * x[1];
    if (!(x[0] > 0.0 && det_x > 0.0)) {
      std::fill(out.begin(), out.end(), -std::numeric_limits<double>::infinity());
      return;
    }
    const double shared = 0.5 * (m_ - 3.0) * std::log(det_x);
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      const auto& t = terms_[k];
      out[k] = t.constant + shared - 0.5 * (t.a * x[0] + t.b * x[1] + t.c * x[2]);
    }
  }

 private:
  struct Term {
    double a, b, c, constant;
  };
  double m_;
  std::vector<Term> terms_;
};

inline std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

}  // namespace detail

inline std::string Wishart2Model::name() const { return "wishart2:m=" + detail::format_number(m_); }

inline std::unique_ptr<BatchLogDensity> Wishart2Model::prepare(std::vector<ParamPoint> thetas) const {
  return std::make_unique<detail::WishartBatch>(m_, log_norm_, thetas);
}

// ---------------------------------------------------------------------------
// Monte Carlo estimates of the Fisher metric and skewness tensor.

/// Score vector d_i log p(x | theta) by central differences in the chart.
inline Vector score(const Model& model, const Observation& x, const ParamPoint& theta,
                    double step = 1e-5) {
  Vector s(theta.dim());
  for (int i = 0; i < theta.dim(); ++i) {
    const double h = step * std::max(1.0, std::abs(theta[i]));
    s[i] = (model.log_density(x, theta.shifted(i, h)) - model.log_density(x, theta.shifted(i, -h))) /
           (2.0 * h);
  }
  return s;
}

struct MatrixEstimate {
  Matrix mean;
  Matrix std_error;
  std::size_t samples = 0;
};

struct Tensor3Estimate {
  Tensor3 mean;
  Array3 std_error;
  std::size_t samples = 0;
};

/// E[d_i log p d_j log p] from n sampled score vectors.
inline MatrixEstimate fisher_metric_mc(const Model& model, const ParamPoint& p, std::size_t n,
                                       std::uint64_t seed) {
  if (n < 1) {
    throw DomainError("fisher_metric_mc needs n >= 1");
  }
  Rng rng = make_rng(seed);
  const int d = p.dim();
  Matrix sum = Matrix::Zero(d, d);
  Matrix sum_sq = Matrix::Zero(d, d);
  for (const auto& x : model.sample(p, n, rng)) {
    const Vector s = score(model, x, p);
    const Matrix outer = s * s.transpose();
    sum += outer;
    sum_sq += outer.cwiseProduct(outer);
  }
  const auto nn = static_cast<double>(n);
  MatrixEstimate est;
  est.samples = n;
  est.mean = sum / nn;
  const Matrix var = (sum_sq / nn - est.mean.cwiseProduct(est.mean)).cwiseMax(0.0);
  est.std_error = (var / std::max(nn - 1.0, 1.0)).cwiseSqrt();
  return est;
}

/// E[d_i log p d_j log p d_k log p] from n sampled score vectors.
inline Tensor3Estimate skewness_tensor_mc(const Model& model, const ParamPoint& p, std::size_t n,
                                          std::uint64_t seed) {
  if (n < 1) {
    throw DomainError("skewness_tensor_mc needs n >= 1");
  }
  Rng rng = make_rng(seed);
  const int d = p.dim();
  Array3 sum(d);
  Array3 sum_sq(d);
  for (const auto& x : model.sample(p, n, rng)) {
    const Vector s = score(model, x, p);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        for (int k = j; k < d; ++k) {
          const double v = s[i] * s[j] * s[k];
          sum(i, j, k) += v;
          sum_sq(i, j, k) += v * v;
        }
      }
    }
  }
  const auto nn = static_cast<double>(n);
  Tensor3Estimate est{Tensor3{Array3(d)}, Array3(d), n};
  // Sorted-index entries are estimated once and copied to every permutation.
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        int idx[3] = {i, j, k};
        std::sort(idx, idx + 3);
        const double mean = sum(idx[0], idx[1], idx[2]) / nn;
        const double var = std::max(sum_sq(idx[0], idx[1], idx[2]) / nn - mean * mean, 0.0);
        est.mean.values(i, j, k) = mean;
        est.std_error(i, j, k) = std::sqrt(var / std::max(nn - 1.0, 1.0));
      }
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Model registry.

/// Parses "normal<d>", "location-scale" or "wishart2:m=<m>" (m defaults to 2).
inline ModelPtr make_model(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  auto parse_arg = [&](const std::string& key, double fallback) {
    if (args.empty()) {
      return fallback;
    }
    if (args.rfind(key + "=", 0) != 0) {
      throw ConfigError("model '" + spec + "': expected argument " + key + "=<value>");
    }
    try {
      std::size_t used = 0;
      const std::string text = args.substr(key.size() + 1);
      const double v = std::stod(text, &used);
      if (used != text.size()) {
        throw std::invalid_argument(text);
      }
      return v;
    } catch (const std::logic_error&) {
      throw ConfigError("model '" + spec + "': bad value for " + key);
    }
  };
  if (head.rfind("normal", 0) == 0 && head.size() > 6) {
    const std::string digits = head.substr(6);
    if (digits.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("unknown model '" + spec + "'");
    }
    return std::make_shared<NormalModel>(std::stoi(digits));
  }
  if (head == "normal") {
    return std::make_shared<NormalModel>(static_cast<int>(parse_arg("d", 3)));
  }
  if (head == "location-scale") {
    return std::make_shared<LocationScaleModel>();
  }
  if (head == "wishart2") {
    const double m = parse_arg("m", 2.0);
    if (!(m >= 2.0)) {
      throw ConfigError("wishart2 model needs m >= 2");
    }
    return std::make_shared<Wishart2Model>(m);
  }
  throw ConfigError("unknown model '" + spec +
                    "'; available: normal<d> (e.g. normal3), location-scale, wishart2:m=<m>");
}

}  // namespace shrinkpred
