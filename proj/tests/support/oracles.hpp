#pragma once

// Reference values computed independently of the library code paths.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace oracle {

/// Sum of direct second differences, the flat Laplacian.
inline double flat_laplacian(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& p,
                             double h = 1e-4) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Eigen::VectorXd a = p;
    Eigen::VectorXd b = p;
    a[i] += h;
    b[i] -= h;
    sum += (f(a) - 2.0 * f(p) + f(b)) / (h * h);
  }
  return sum;
}

/// KL(N(m1, v1) || N(m2, v2)) in one dimension.
inline double scalar_gaussian_kl(double m1, double v1, double m2, double v2) {
  return 0.5 * (v1 / v2 + (m2 - m1) * (m2 - m1) / v2 - 1.0 + std::log(v2 / v1));
}

/// Marginal of z ~ N(mu, v I_3) under the prior 1/|mu|:
/// integral of N(z; mu, v I) / |mu| d mu = erf(|z| / sqrt(2 v)) / |z|.
inline double stein3_marginal(const Eigen::Vector3d& z, double v) {
  const double r = z.norm();
  if (r < 1e-12) {
    return std::sqrt(2.0 / (std::numbers::pi * v));
  }
  return std::erf(r / std::sqrt(2.0 * v)) / r;
}

/// Stein-prior Bayes predictive density for N(mu, I_3) from the sample mean
/// of N observations.
inline double stein3_predictive(const Eigen::Vector3d& y, const Eigen::Vector3d& xbar, double n) {
  const double v = 1.0 + 1.0 / n;
  const Eigen::Vector3d diff = y - xbar;
  const double gauss = std::exp(-0.5 * diff.squaredNorm() / v) / std::pow(2.0 * std::numbers::pi * v, 1.5);
  const Eigen::Vector3d w = (n * xbar + y) / (n + 1.0);
  return gauss * stein3_marginal(w, 1.0 / (n + 1.0)) / stein3_marginal(xbar, 1.0 / n);
}

/// 2x2 symmetric matrix e^l (cosh r I + sinh r [[cos t, sin t], [sin t, -cos t]]).
inline Eigen::Matrix2d spd_from_chart(double l, double r, double t) {
  const double a = std::exp(l);
  Eigen::Matrix2d y;
  y << a * (std::cosh(r) + std::sinh(r) * std::cos(t)), a * std::sinh(r) * std::sin(t),
      a * std::sinh(r) * std::sin(t), a * (std::cosh(r) - std::sinh(r) * std::cos(t));
  return y;
}

struct Integral {
  double value;
  double std_error;
};

/// Integral of a density over 2x2 SPD matrices with respect to
/// dy11 dy12 dy22, by importance sampling in (l, r, t), where
/// dY = 2 e^{3l} sinh r dl dr dt. Proposal: logistic l (centre, scale 1),
/// exponential r (rate 1/2), uniform t on [0, 2 pi).
inline Integral integrate_spd(const std::function<double(const Eigen::Matrix2d&)>& density, double centre,
                              std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double p = u(rng);
    while (p <= 0.0) {
      p = u(rng);
    }
    const double l = centre + std::log(p / (1.0 - p));
    const double q_l = p * (1.0 - p);
    const double r = -2.0 * std::log(1.0 - u(rng));
    const double q_r = 0.5 * std::exp(-0.5 * r);
    const double t = 2.0 * std::numbers::pi * u(rng);
    const double q_t = 1.0 / (2.0 * std::numbers::pi);
    const double jac = 2.0 * std::exp(3.0 * l) * std::sinh(r);
    const double w = density(spd_from_chart(l, r, t)) * jac / (q_l * q_r * q_t);
    sum += w;
    sum_sq += w * w;
  }
  const double nn = static_cast<double>(n);
  const double mean = sum / nn;
  return {mean, std::sqrt(std::max(sum_sq / nn - mean * mean, 0.0) / nn)};
}

/// Wishart W_2(m, S) density with respect to dx11 dx12 dx22, written out
/// from the textbook formula.
inline double wishart2_density(const Eigen::Matrix2d& x, double m, const Eigen::Matrix2d& s) {
  const double log_gamma2 = 0.5 * std::log(std::numbers::pi) + std::lgamma(m / 2.0) + std::lgamma((m - 1.0) / 2.0);
  const double log_norm = m * std::log(2.0) + log_gamma2 + 0.5 * m * std::log(s.determinant());
  return std::exp(-log_norm + 0.5 * (m - 3.0) * std::log(x.determinant()) - 0.5 * (s.inverse() * x).trace());
}

}  // namespace oracle
