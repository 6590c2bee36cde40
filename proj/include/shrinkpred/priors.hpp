#pragma once

// Vague and shrinkage priors as unnormalised fields on a model chart. Every
// downstream use is ratio based, so normalising constants never enter.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "shrinkpred/errors.hpp"
#include "shrinkpred/models.hpp"
#include "shrinkpred/types.hpp"

namespace shrinkpred {

struct PriorDensity {
  ScalarField field;
  std::string name;
  bool proper = false;
  std::string target;  // shrinkage target, empty for vague priors
  Chart chart;

  double operator()(const ParamPoint& p) const { return field(p); }
  [[nodiscard]] double log_value(const ParamPoint& p) const { return std::log(field(p)); }
};

/// log(tanh(x)) without cancellation for large x.
inline double log_tanh(double x) {
  if (x < 1e-8) {
    return std::log(x);
  }
  if (x < 1.0) {
    return std::log(std::tanh(x));
  }
  return std::log1p(-2.0 / (std::exp(2.0 * x) + 1.0));
}

/// pi_J(theta) = |g(theta)|^{1/2}.
inline PriorDensity jeffreys_prior(const Model& model) {
  const MetricField metric = model.fisher_metric();
  PriorDensity prior;
  prior.name = "jeffreys";
  prior.chart = model.chart();
  prior.field.name = "jeffreys";
  prior.field.chart = model.chart();
  prior.field.evaluate = [metric](const ParamPoint& p) {
    return std::sqrt(metric(p).determinant());
  };
  if (model.chart().kind == ChartKind::wishart) {
    // sinh(rho) vanishes on the rho = 0 submanifold.
    prior.field.singular_distance = [](const ParamPoint& p) { return std::abs(p[1]); };
  }
  return prior;
}

/// Green function of the Euclidean Laplacian in d >= 3 dimensions,
/// G(xi, mu) = Gamma(d/2 - 1) / (4 pi^{d/2}) |mu - xi|^{-(d-2)}.
inline ScalarField euclidean_green(int d, const ParamPoint& xi) {
  if (d <= 2) {
    throw DimensionError("no Green function on R^" + std::to_string(d) +
                         ": shrinkage priors do not exist for d <= 2");
  }
  if (xi.dim() != d) {
    throw DimensionError("euclidean_green: base point dimension differs from d");
  }
  const double constant =
      std::tgamma(0.5 * d - 1.0) / (4.0 * std::pow(std::numbers::pi, 0.5 * d));
  ScalarField g;
  g.name = "green-euclidean";
  g.chart = xi.chart;
  g.singular_points = {xi};
  const Vector base = xi.coords;
  g.evaluate = [constant, base, d](const ParamPoint& p) {
    return constant * std::pow((p.coords - base).norm(), -(d - 2.0));
  };
  return g;
}

/// Stein's prior |mu - xi|^{-(d-2)} on the whitened normal mean.
inline PriorDensity stein_prior(int d, const ParamPoint& xi) {
  if (d <= 2) {
    throw DimensionError("stein prior needs d >= 3, got d = " + std::to_string(d));
  }
  if (xi.dim() != d) {
    throw DimensionError("stein_prior: base point dimension differs from d");
  }
  PriorDensity prior;
  prior.name = "stein";
  prior.chart = xi.chart;
  prior.target = "point";
  prior.field.name = "stein";
  prior.field.chart = xi.chart;
  prior.field.singular_points = {xi};
  const Vector base = xi.coords;
  prior.field.evaluate = [base, d](const ParamPoint& p) {
    return std::pow((p.coords - base).norm(), -(d - 2.0));
  };
  return prior;
}

/// pi_G(theta) = G(xi, theta) pi_J(theta).
inline PriorDensity green_prior(const ScalarField& green, const PriorDensity& jeffreys) {
  if (green.chart && *green.chart != jeffreys.chart) {
    throw DomainError("green_prior: Green function chart " + green.chart->name() +
                      " differs from prior chart " + jeffreys.chart.name());
  }
  PriorDensity prior;
  prior.name = "green(" + green.name + ")";
  prior.chart = jeffreys.chart;
  prior.target = "point";
  prior.field.name = prior.name;
  prior.field.chart = jeffreys.chart;
  prior.field.singular_points = green.singular_points;
  prior.field.singular_points.insert(prior.field.singular_points.end(),
                                     jeffreys.field.singular_points.begin(),
                                     jeffreys.field.singular_points.end());
  const auto gd = green.singular_distance;
  const auto jd = jeffreys.field.singular_distance;
  if (gd || jd) {
    prior.field.singular_distance = [gd, jd](const ParamPoint& p) {
      double best = std::numeric_limits<double>::infinity();
      if (gd) best = std::min(best, gd(p));
      if (jd) best = std::min(best, jd(p));
      return best;
    };
  }
  const auto gf = green.evaluate;
  const auto jf = jeffreys.field.evaluate;
  prior.field.evaluate = [gf, jf](const ParamPoint& p) { return gf(p) * jf(p); };
  return prior;
}

/// Riemannian distance under g = (a / sigma^2) I on the upper half plane.
inline double hyperbolic_distance(double a, const ParamPoint& p1, const ParamPoint& p2) {
  if (!(a > 0.0)) {
    throw DomainError("hyperbolic_distance: a must be positive");
  }
  if (!(p1[1] > 0.0) || !(p2[1] > 0.0)) {
    throw DomainError("hyperbolic_distance: sigma coordinates must be positive");
  }
  const double dmu = p1[0] - p2[0];
  const double dsigma = p1[1] - p2[1];
  const double arg = (dmu * dmu + dsigma * dsigma) / (2.0 * p1[1] * p2[1]);
  // acosh(1 + x) = log1p(x + sqrt(x (x + 2))), accurate for small x.
  return std::sqrt(a) * std::log1p(arg + std::sqrt(arg * (arg + 2.0)));
}

/// Green function of H^2(-1/a): -(1/2 pi) log tanh(dist / (2 sqrt a)).
inline ScalarField hyperbolic_green(double a, const ParamPoint& base) {
  if (!(a > 0.0)) {
    throw DomainError("hyperbolic_green: a must be positive");
  }
  ScalarField g;
  g.name = "green-hyperbolic";
  g.chart = Chart::location_scale();
  g.singular_points = {base};
  g.evaluate = [a, base](const ParamPoint& p) {
    const double dist = hyperbolic_distance(a, base, p);
    if (dist == 0.0) {
      throw SingularityError("hyperbolic_green evaluated at its base point");
    }
    return -log_tanh(dist / (2.0 * std::sqrt(a))) / (2.0 * std::numbers::pi);
  };
  return g;
}

/// pi_R(mu, sigma) = 1 / sigma on the location-scale chart.
inline PriorDensity right_invariant_prior_ls() {
  PriorDensity prior;
  prior.name = "right-invariant";
  prior.chart = Chart::location_scale();
  prior.field.name = "right-invariant";
  prior.field.chart = prior.chart;
  prior.field.evaluate = [](const ParamPoint& p) { return 1.0 / p[1]; };
  return prior;
}

/// Green function of the rho-theta leaves H^2(-1/m), based on the rho = 0
/// submanifold: h = -(1/2 pi) log tanh(rho / 2).
inline ScalarField wishart_leaf_green() {
  ScalarField h;
  h.name = "wishart-h";
  h.chart = Chart::wishart();
  h.singular_distance = [](const ParamPoint& p) { return std::abs(p[1]); };
  h.evaluate = [](const ParamPoint& p) {
    if (p[1] < 0.0) {
      throw DomainError("wishart h: rho must be nonnegative");
    }
    return -log_tanh(0.5 * p[1]) / (2.0 * std::numbers::pi);
  };
  return h;
}

/// pi_S = h pi_J, proportional to -(1/2 pi) log tanh(rho / 2) sinh(rho).
inline PriorDensity wishart_shrinkage_prior(double m) {
  if (!(m >= 2.0)) {
    throw DomainError("wishart shrinkage prior needs m >= 2");
  }
  PriorDensity prior;
  prior.name = "wishart-logtanh";
  prior.chart = Chart::wishart();
  prior.target = "rho = 0";
  prior.field.name = prior.name;
  prior.field.chart = prior.chart;
  prior.field.singular_distance = [](const ParamPoint& p) { return std::abs(p[1]); };
  prior.field.evaluate = [](const ParamPoint& p) {
    if (p[1] < 0.0) {
      throw DomainError("wishart shrinkage prior: rho must be nonnegative");
    }
    return -log_tanh(0.5 * p[1]) / (2.0 * std::numbers::pi) * std::sinh(p[1]);
  };
  return prior;
}

/// f / h as a field; singular wherever either is.
inline ScalarField prior_ratio(const PriorDensity& f, const PriorDensity& h) {
  if (f.chart != h.chart) {
    throw DomainError("prior_ratio: priors live on different charts");
  }
  ScalarField r;
  r.name = f.name + "/" + h.name;
  r.chart = f.chart;
  r.singular_points = f.field.singular_points;
  r.singular_points.insert(r.singular_points.end(), h.field.singular_points.begin(),
                           h.field.singular_points.end());
  const auto fd = f.field.singular_distance;
  const auto hd = h.field.singular_distance;
  if (fd || hd) {
    r.singular_distance = [fd, hd](const ParamPoint& p) {
      double best = std::numeric_limits<double>::infinity();
      if (fd) best = std::min(best, fd(p));
      if (hd) best = std::min(best, hd(p));
      return best;
    };
  }
  const auto ff = f.field.evaluate;
  const auto hf = h.field.evaluate;
  r.evaluate = [ff, hf](const ParamPoint& p) { return ff(p) / hf(p); };
  return r;
}

inline ScalarField sqrt_field(ScalarField f) {
  auto inner = f.evaluate;
  f.evaluate = [inner](const ParamPoint& p) { return std::sqrt(inner(p)); };
  f.name = "sqrt(" + f.name + ")";
  return f;
}

inline PriorDensity scale_prior(PriorDensity prior, double factor) {
  if (!(factor > 0.0)) {
    throw DomainError("scale_prior: factor must be positive");
  }
  auto inner = prior.field.evaluate;
  prior.field.evaluate = [inner, factor](const ParamPoint& p) { return factor * inner(p); };
  return prior;
}

inline const std::vector<std::string>& prior_names() {
  static const std::vector<std::string> names{"jeffreys", "stein", "green-hyperbolic",
                                              "right-invariant", "wishart-logtanh"};
  return names;
}

/// Looks up a prior by registered name for the given model.
inline PriorDensity make_prior(const std::string& name, const Model& model) {
  auto incompatible = [&](const std::string& needs) {
    return ConfigError("prior '" + name + "' is defined on " + needs + ", not on model " +
                       model.name());
  };
  const ChartKind kind = model.chart().kind;
  if (name == "jeffreys") {
    return jeffreys_prior(model);
  }
  if (name == "stein") {
    if (kind != ChartKind::euclidean || model.dim() < 3) {
      throw incompatible("normal models with d >= 3");
    }
    return stein_prior(model.dim(), model.origin());
  }
  if (name == "green-hyperbolic") {
    if (kind != ChartKind::location_scale) {
      throw incompatible("the location-scale model");
    }
    auto prior = green_prior(hyperbolic_green(kLocationScaleA, model.origin()), jeffreys_prior(model));
    prior.name = "green-hyperbolic";
    prior.field.name = prior.name;
    return prior;
  }
  if (name == "right-invariant") {
    if (kind != ChartKind::location_scale) {
      throw incompatible("the location-scale model");
    }
    return right_invariant_prior_ls();
  }
  if (name == "wishart-logtanh") {
    if (kind != ChartKind::wishart) {
      throw incompatible("wishart2 models");
    }
    const auto& w = dynamic_cast<const Wishart2Model&>(model);
    return wishart_shrinkage_prior(w.degrees_of_freedom());
  }
  std::string available;
  for (const auto& n : prior_names()) {
    available += (available.empty() ? "" : ", ") + n;
  }
  throw ConfigError("unknown prior '" + name + "'; available: " + available);
}

}  // namespace shrinkpred
