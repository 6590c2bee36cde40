#pragma once

// Finite-difference Riemannian geometry on a parameter chart: connection
// coefficients, the Laplace-Beltrami operator, curvature, conformal rescaling
// and superharmonicity scans.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "shrinkpred/errors.hpp"
#include "shrinkpred/types.hpp"

namespace shrinkpred {

inline constexpr double kDefaultStep = 1e-4;
inline constexpr double kDefaultSuperharmonicTol = 1e-5;
/// Stencils stay this many steps away from declared singularities.
inline constexpr double kSingularGuardSteps = 3.0;

namespace detail {

inline Vector axis_steps(const ParamPoint& p, double step) {
  if (!(step > 0.0)) {
    throw DomainError("finite-difference step must be positive");
  }
  Vector h(p.dim());
  for (int i = 0; i < p.dim(); ++i) {
    h[i] = step * std::max(1.0, std::abs(p[i]));
  }
  return h;
}

/// Throws StencilError unless every point p + sum_i offsets_i * h_i e_i with
/// |offsets_i| <= reach along one or two axes is inside the chart.
inline void require_stencil(const Chart& chart, const ParamPoint& p, const Vector& h, int reach) {
  const int d = p.dim();
  for (int i = 0; i < d; ++i) {
    for (int s : {-1, 1}) {
      Vector c = p.coords;
      c[i] += s * reach * h[i];
      if (!chart.contains(c)) {
        throw StencilError("finite-difference stencil leaves the " + chart.name() +
                           " chart along axis " + std::to_string(i));
      }
    }
  }
}

inline void require_clear_of_singularities(const ScalarField& f, const ParamPoint& p,
                                           const Vector& h, int reach) {
  const double radius = (reach + kSingularGuardSteps) * h.maxCoeff();
  if (f.distance_to_singular(p) < radius) {
    throw SingularityError("stencil for " + (f.name.empty() ? std::string("field") : f.name) +
                           " comes within guard radius of a singular point");
  }
}

inline Matrix checked_inverse(const Matrix& g) {
  Eigen::FullPivLU<Matrix> lu(g);
  const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-300);
  if (!g.allFinite() || !lu.isInvertible() ||
      std::abs(lu.determinant()) < 1e-14 * std::pow(scale, static_cast<double>(g.rows()))) {
    throw SingularMetricError("metric matrix is not invertible");
  }
  return lu.inverse();
}

/// Partial derivatives of the metric: result[l](i, j) = d_l g_ij.
inline std::vector<Matrix> metric_derivatives(const MetricField& metric, const ParamPoint& p,
                                              const Vector& h) {
  std::vector<Matrix> dg;
  dg.reserve(static_cast<std::size_t>(p.dim()));
  for (int l = 0; l < p.dim(); ++l) {
    dg.push_back((metric(p.shifted(l, h[l])) - metric(p.shifted(l, -h[l]))) / (2.0 * h[l]));
  }
  return dg;
}

inline ConnectionCoefficients christoffel_with_steps(const MetricField& metric, const ParamPoint& p,
                                                     const Vector& h) {
  const int d = p.dim();
  const Matrix ginv = checked_inverse(metric(p));
  const auto dg = metric_derivatives(metric, p, h);
  ConnectionCoefficients out{Array3(d), 0.0};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        double sum = 0.0;
        for (int l = 0; l < d; ++l) {
          sum += ginv(k, l) * (dg[i](j, l) + dg[j](l, i) - dg[l](i, j));
        }
        out.gamma(i, j, k) = 0.5 * sum;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Coefficients of the Levi-Civita connection,
/// Gamma_ij^k = 1/2 (d_i g_jl + d_j g_li - d_l g_ij) g^{kl},
/// with central differences of relative step `step`.
inline ConnectionCoefficients christoffel(const MetricField& metric, const ParamPoint& p,
                                          double step = kDefaultStep) {
  const Vector h = detail::axis_steps(p, step);
  detail::require_stencil(metric.chart, p, h, 1);
  return detail::christoffel_with_steps(metric, p, h);
}

/// Gamma^alpha_ij^k = Gamma_ij^k - (alpha / 2) T_ijl g^{kl}.
inline ConnectionCoefficients alpha_connection(const ConnectionCoefficients& gamma,
                                               const Tensor3& t, const Matrix& metric_inv,
                                               double alpha) {
  const int d = gamma.dim();
  if (t.dim() != d || metric_inv.rows() != d || metric_inv.cols() != d) {
    throw DimensionError("alpha_connection: dimension mismatch");
  }
  ConnectionCoefficients out{Array3(d), alpha};
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        double tg = 0.0;
        for (int l = 0; l < d; ++l) {
          tg += t(i, j, l) * metric_inv(k, l);
        }
        out.gamma(i, j, k) = gamma(i, j, k) - 0.5 * alpha * tg;
      }
    }
  }
  return out;
}

/// Central-difference gradient d_i f.
inline Vector gradient(const ScalarField& f, const ParamPoint& p, double step = kDefaultStep,
                       const Chart* chart = nullptr) {
  const Vector h = detail::axis_steps(p, step);
  detail::require_stencil(chart ? *chart : p.chart, p, h, 1);
  detail::require_clear_of_singularities(f, p, h, 1);
  Vector g(p.dim());
  for (int i = 0; i < p.dim(); ++i) {
    g[i] = (f(p.shifted(i, h[i])) - f(p.shifted(i, -h[i]))) / (2.0 * h[i]);
  }
  return g;
}

/// Laplace-Beltrami operator |g|^{-1/2} d_i(|g|^{1/2} g^{ij} d_j f) by nested
/// central differences.
inline double laplace_beltrami(const ScalarField& f, const MetricField& metric, const ParamPoint& p,
                               double step = kDefaultStep) {
  const int d = p.dim();
  if (metric.dim() != d) {
    throw DimensionError("laplace_beltrami: metric and point dimensions differ");
  }
  const Vector h = detail::axis_steps(p, step);
  detail::require_clear_of_singularities(f, p, h, 2);
  detail::require_stencil(metric.chart, p, h, 2);

  // |g|^{1/2} g^{ij} d_j f at q, i-th component.
  auto flux = [&](const ParamPoint& q, int i) {
    const Matrix g = metric(q);
    const Matrix ginv = detail::checked_inverse(g);
    const double vol = std::sqrt(g.determinant());
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      const double df = (f(q.shifted(j, h[j])) - f(q.shifted(j, -h[j]))) / (2.0 * h[j]);
      sum += ginv(i, j) * df;
    }
    return vol * sum;
  };

  double div = 0.0;
  for (int i = 0; i < d; ++i) {
    div += (flux(p.shifted(i, h[i]), i) - flux(p.shifted(i, -h[i]), i)) / (2.0 * h[i]);
  }
  const double det = metric(p).determinant();
  if (!(det > 0.0)) {
    throw SingularMetricError("metric determinant is not positive");
  }
  return div / std::sqrt(det);
}

/// R_ijkl = (d_i Gamma_jk^m - d_j Gamma_ik^m + Gamma_in^m Gamma_jk^n
///           - Gamma_jn^m Gamma_ik^n) g_lm.
inline CurvatureAtPoint curvature_tensor(const MetricField& metric, const ParamPoint& p,
                                         double step = kDefaultStep) {
  const int d = p.dim();
  const Vector h = detail::axis_steps(p, step);
  detail::require_stencil(metric.chart, p, h, 2);
  const Matrix g = metric(p);
  const auto gamma = detail::christoffel_with_steps(metric, p, h);

  std::vector<ConnectionCoefficients> dgamma;  // dgamma[i] = d_i Gamma
  for (int i = 0; i < d; ++i) {
    const auto plus = detail::christoffel_with_steps(metric, p.shifted(i, h[i]), h);
    const auto minus = detail::christoffel_with_steps(metric, p.shifted(i, -h[i]), h);
    ConnectionCoefficients di{Array3(d), 0.0};
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) {
        for (int c = 0; c < d; ++c) {
          di.gamma(a, b, c) = (plus(a, b, c) - minus(a, b, c)) / (2.0 * h[i]);
        }
      }
    }
    dgamma.push_back(std::move(di));
  }

  CurvatureAtPoint r(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        for (int m = 0; m < d; ++m) {
          double rm = dgamma[i](j, k, m) - dgamma[j](i, k, m);
          for (int n = 0; n < d; ++n) {
            rm += gamma(i, n, m) * gamma(j, k, n) - gamma(j, n, m) * gamma(i, k, n);
          }
          for (int l = 0; l < d; ++l) {
            r(i, j, k, l) += rm * g(l, m);
          }
        }
      }
    }
  }
  return r;
}

/// Sectional curvature K(X, Y) of the plane spanned by x and y at p.
inline double sectional_curvature(const MetricField& metric, const ParamPoint& p, const Vector& x,
                                  const Vector& y, double step = kDefaultStep) {
  const int d = p.dim();
  if (x.size() != d || y.size() != d) {
    throw DimensionError("sectional_curvature: tangent vectors have wrong dimension");
  }
  const Matrix g = metric(p);
  const double xx = x.dot(g * x);
  const double yy = y.dot(g * y);
  const double xy = x.dot(g * y);
  const double area2 = xx * yy - xy * xy;
  if (!(area2 > 1e-12 * xx * yy)) {
    throw DegeneratePlaneError("sectional_curvature: tangent vectors are linearly dependent");
  }
  const auto r = curvature_tensor(metric, p, step);
  double num = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        for (int l = 0; l < d; ++l) {
          num += r(i, j, k, l) * x[i] * y[j] * y[k] * x[l];
        }
      }
    }
  }
  return num / area2;
}

/// theta -> {h(theta) / pi_J(theta)}^{2/(d-2)} g(theta).
inline MetricField conformal_transform(const MetricField& g, const ScalarField& h,
                                       const ScalarField& jeffreys, int d) {
  if (d <= 2) {
    throw DimensionError("conformal_transform requires d >= 3, got d = " + std::to_string(d));
  }
  if (g.dim() != d) {
    throw DimensionError("conformal_transform: metric dimension differs from d");
  }
  MetricField out;
  out.chart = g.chart;
  out.description = "conformal(" + g.description + ", " + h.name + "/" + jeffreys.name + ")";
  const double exponent = 2.0 / (d - 2);
  out.evaluate = [g, h, jeffreys, exponent](const ParamPoint& p) -> Matrix {
    const double ratio = h(p) / jeffreys(p);
    if (!(ratio > 0.0) || !std::isfinite(ratio)) {
      throw DomainError("conformal_transform: prior ratio is not positive");
    }
    return std::pow(ratio, exponent) * g(p);
  };
  return out;
}

enum class SuperharmonicVerdict { superharmonic, not_superharmonic, constant };

inline const char* to_string(SuperharmonicVerdict v) {
  switch (v) {
    case SuperharmonicVerdict::superharmonic:
      return "superharmonic";
    case SuperharmonicVerdict::not_superharmonic:
      return "not-superharmonic";
    default:
      return "constant";
  }
}

struct GridValue {
  ParamPoint point;
  double value = 0.0;
  double laplacian = 0.0;
};

struct SuperharmonicReport {
  std::size_t grid_size = 0;
  double tol = kDefaultSuperharmonicTol;
  double max_laplacian = -std::numeric_limits<double>::infinity();
  double max_abs_laplacian = 0.0;
  std::size_t within_tol = 0;
  bool nonconstant = false;
  std::vector<GridValue> points;
  std::vector<ParamPoint> violations;

  [[nodiscard]] double fraction_within_tol() const {
    return grid_size == 0 ? 0.0 : static_cast<double>(within_tol) / static_cast<double>(grid_size);
  }

  [[nodiscard]] SuperharmonicVerdict verdict() const {
    if (!nonconstant) {
      return SuperharmonicVerdict::constant;
    }
    return within_tol == grid_size ? SuperharmonicVerdict::superharmonic
                                   : SuperharmonicVerdict::not_superharmonic;
  }
};

/// Combine reports from disjoint partitions of a grid.
inline SuperharmonicReport merge(const SuperharmonicReport& a, const SuperharmonicReport& b) {
  if (a.tol != b.tol) {
    throw DomainError("cannot merge superharmonic reports with different tolerances");
  }
  SuperharmonicReport out = a;
  out.grid_size += b.grid_size;
  out.max_laplacian = std::max(a.max_laplacian, b.max_laplacian);
  out.max_abs_laplacian = std::max(a.max_abs_laplacian, b.max_abs_laplacian);
  out.within_tol += b.within_tol;
  out.nonconstant = a.nonconstant || b.nonconstant;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  out.violations.insert(out.violations.end(), b.violations.begin(), b.violations.end());
  return out;
}

/// Evaluates the Laplacian of f on every grid point. The verdict is
/// superharmonic iff Delta f <= tol everywhere and f is not constant.
inline SuperharmonicReport superharmonic_scan(const ScalarField& f, const MetricField& metric,
                                              const std::vector<ParamPoint>& grid,
                                              double step = kDefaultStep,
                                              double tol = kDefaultSuperharmonicTol) {
  if (grid.empty()) {
    throw DomainError("superharmonic_scan: empty grid");
  }
  SuperharmonicReport report;
  report.tol = tol;
  double max_value = 0.0;
  double max_slope = 0.0;
  for (const auto& p : grid) {
    const double value = f(p);
    const double lap = laplace_beltrami(f, metric, p, step);
    const Vector grad = gradient(f, p, step, &metric.chart);
    max_value = std::max(max_value, std::abs(value));
    max_slope = std::max(max_slope, grad.cwiseAbs().maxCoeff());
    report.points.push_back({p, value, lap});
    ++report.grid_size;
    report.max_laplacian = std::max(report.max_laplacian, lap);
    report.max_abs_laplacian = std::max(report.max_abs_laplacian, std::abs(lap));
    if (lap <= tol) {
      ++report.within_tol;
    } else {
      report.violations.push_back(p);
    }
  }
  report.nonconstant = max_slope > 1e-9 * std::max(max_value, 1e-300);
  return report;
}

}  // namespace shrinkpred
