#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shrinkpred/errors.hpp"

namespace shrinkpred {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ChartKind {
  euclidean,       // whitened normal mean, R^d
  location_scale,  // (mu, sigma), sigma > 0
  wishart,         // (lambda, rho, theta), rho >= 0, theta periodic
};

/// Coordinate chart identifier with the bounds it imposes.
struct Chart {
  ChartKind kind = ChartKind::euclidean;
  int dim = 1;

  static Chart euclidean(int d) { return {ChartKind::euclidean, d}; }
  static Chart location_scale() { return {ChartKind::location_scale, 2}; }
  static Chart wishart() { return {ChartKind::wishart, 3}; }

  [[nodiscard]] bool contains(const Vector& c) const {
    if (c.size() != dim || !c.allFinite()) {
      return false;
    }
    switch (kind) {
      case ChartKind::location_scale:
        return c[1] > 0.0;
      case ChartKind::wishart:
        return c[1] >= 0.0;
      default:
        return true;
    }
  }

  [[nodiscard]] std::string name() const {
    switch (kind) {
      case ChartKind::location_scale:
        return "location-scale";
      case ChartKind::wishart:
        return "wishart";
      default:
        return "euclidean" + std::to_string(dim);
    }
  }

  friend bool operator==(const Chart&, const Chart&) = default;
};

/// A parameter vector expressed in a named chart.
struct ParamPoint {
  Vector coords;
  Chart chart;

  ParamPoint() = default;
  ParamPoint(Vector c, Chart ch) : coords(std::move(c)), chart(ch) {
    if (coords.size() < 1) {
      throw DimensionError("ParamPoint needs at least one coordinate");
    }
    if (coords.size() != chart.dim) {
      throw DimensionError("ParamPoint has " + std::to_string(coords.size()) +
                           " coordinates but chart " + chart.name() + " has dimension " +
                           std::to_string(chart.dim));
    }
    if (!chart.contains(coords)) {
      throw DomainError("ParamPoint outside chart " + chart.name());
    }
  }

  [[nodiscard]] int dim() const { return static_cast<int>(coords.size()); }
  double operator[](int i) const { return coords[i]; }

  /// Same chart, coordinates displaced; no domain check.
  [[nodiscard]] ParamPoint shifted(int axis, double delta) const {
    ParamPoint out;
    out.coords = coords;
    out.coords[axis] += delta;
    out.chart = chart;
    return out;
  }
};

inline ParamPoint make_point(std::initializer_list<double> values, Chart chart) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) {
    v[i++] = x;
  }
  return {std::move(v), chart};
}

/// Riemannian metric on a chart. Evaluation returns the symmetric matrix g_ij.
struct MetricField {
  std::function<Matrix(const ParamPoint&)> evaluate;
  Chart chart;
  std::string description;

  Matrix operator()(const ParamPoint& p) const { return evaluate(p); }
  [[nodiscard]] int dim() const { return chart.dim; }
  [[nodiscard]] bool in_domain(const ParamPoint& p) const { return chart.contains(p.coords); }
};

/// Real function on a chart with an optional singular set.
///
/// Singular points are listed explicitly; singular sets that are not finite
/// (the rho = 0 submanifold of the Wishart chart) are described by
/// `singular_distance`, the chart-coordinate distance to the set.
struct ScalarField {
  std::function<double(const ParamPoint&)> evaluate;
  std::vector<ParamPoint> singular_points;
  std::function<double(const ParamPoint&)> singular_distance;
  bool positive = true;
  std::string name;
  /// Chart the field is defined on, when known.
  std::optional<Chart> chart;

  double operator()(const ParamPoint& p) const { return evaluate(p); }

  /// Euclidean chart distance from p to the nearest singular point or set.
  [[nodiscard]] double distance_to_singular(const ParamPoint& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : singular_points) {
      best = std::min(best, (s.coords - p.coords).norm());
    }
    if (singular_distance) {
      best = std::min(best, singular_distance(p));
    }
    return best;
  }
};

inline ScalarField constant_field(double value, std::string name = "constant") {
  ScalarField f;
  f.evaluate = [value](const ParamPoint&) { return value; };
  f.positive = value > 0.0;
  f.name = std::move(name);
  return f;
}

/// Dense d x d x d array, row-major in (i, j, k).
class Array3 {
 public:
  Array3() = default;
  explicit Array3(int d) : d_(d), data_(static_cast<std::size_t>(d * d * d), 0.0) {}

  [[nodiscard]] int dim() const { return d_; }
  double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
  [[nodiscard]] const std::vector<double>& values() const { return data_; }

 private:
  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>((i * d_ + j) * d_ + k);
  }
  int d_ = 0;
  std::vector<double> data_;
};

/// Connection coefficients Gamma_ij^k, upper index last.
struct ConnectionCoefficients {
  Array3 gamma;
  double alpha = 0.0;

  [[nodiscard]] int dim() const { return gamma.dim(); }
  double operator()(int i, int j, int k) const { return gamma(i, j, k); }
};

/// Fully symmetric covariant 3-tensor (skewness tensor T_ijk).
struct Tensor3 {
  Array3 values;

  [[nodiscard]] int dim() const { return values.dim(); }
  double operator()(int i, int j, int k) const { return values(i, j, k); }

  /// T_i = T_ijk g^{jk}.
  [[nodiscard]] Vector contract(const Matrix& metric_inv) const {
    const int d = dim();
    Vector t = Vector::Zero(d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        for (int k = 0; k < d; ++k) {
          t[i] += values(i, j, k) * metric_inv(j, k);
        }
      }
    }
    return t;
  }
};

/// Covariant curvature tensor R_ijkl at one point.
class CurvatureAtPoint {
 public:
  CurvatureAtPoint() = default;
  explicit CurvatureAtPoint(int d) : d_(d), data_(static_cast<std::size_t>(d * d * d * d), 0.0) {}

  [[nodiscard]] int dim() const { return d_; }
  double& operator()(int i, int j, int k, int l) { return data_[index(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return data_[index(i, j, k, l)]; }

 private:
  [[nodiscard]] std::size_t index(int i, int j, int k, int l) const {
    return static_cast<std::size_t>(((i * d_ + j) * d_ + k) * d_ + l);
  }
  int d_ = 0;
  std::vector<double> data_;
};

}  // namespace shrinkpred
