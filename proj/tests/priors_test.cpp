#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "shrinkpred/geometry.hpp"
#include "shrinkpred/models.hpp"
#include "shrinkpred/priors.hpp"

namespace {

using namespace shrinkpred;

constexpr double kPi = std::numbers::pi;

std::vector<ParamPoint> radial_grid(int d, double lo, double hi, int count) {
  std::vector<ParamPoint> grid;
  for (int k = 0; k < count; ++k) {
    const double r = lo + (hi - lo) * k / (count - 1.0);
    grid.emplace_back(Vector::Constant(d, r / std::sqrt(static_cast<double>(d))), Chart::euclidean(d));
  }
  return grid;
}

std::vector<ParamPoint> hyperbolic_ring(double a, double dist_lo, double dist_hi, int count) {
  // Points at distance t from (0, 1) along (0, e^{t / sqrt a}) and around it.
  std::vector<ParamPoint> grid;
  for (int k = 0; k < count; ++k) {
    const double t = dist_lo + (dist_hi - dist_lo) * k / (count - 1.0);
    const double s = std::exp(t / std::sqrt(a));
    grid.push_back(make_point({0.0, s}, Chart::location_scale()));
    grid.push_back(make_point({0.0, 1.0 / s}, Chart::location_scale()));
  }
  return grid;
}

std::vector<ParamPoint> rho_grid(double lo, double hi, int count) {
  std::vector<ParamPoint> grid;
  for (int k = 0; k < count; ++k) {
    grid.push_back(make_point({0.3 * (k % 3), lo + (hi - lo) * k / (count - 1.0), 0.5 * k}, Chart::wishart()));
  }
  return grid;
}

TEST(LogTanh, StableAcrossTheRange) {
  for (double x : {1e-3, 0.1, 0.5, 2.0, 8.0}) {
    EXPECT_NEAR(log_tanh(x), std::log(std::tanh(x)), 1e-14 * std::max(1.0, std::abs(std::log(std::tanh(x)))));
  }
  EXPECT_DOUBLE_EQ(log_tanh(1e-10), std::log(1e-10));
  // log tanh x ~ -2 e^{-2x} for large x, where tanh rounds to 1.
  EXPECT_NEAR(log_tanh(30.0) / (-2.0 * std::exp(-60.0)), 1.0, 1e-12);
}

TEST(JeffreysPrior, NormalIsConstant) {
  NormalModel model(3);
  const auto j = jeffreys_prior(model);
  EXPECT_DOUBLE_EQ(j(make_point({0, 0, 0}, model.chart())), 1.0);
  EXPECT_DOUBLE_EQ(j(make_point({5, -2, 1}, model.chart())), 1.0);
  EXPECT_FALSE(j.proper);
}

TEST(JeffreysPrior, LocationScaleIsInverseSquareScale) {
  LocationScaleModel model;
  const auto j = jeffreys_prior(model);
  EXPECT_NEAR(j(make_point({0, 1}, model.chart())) / j(make_point({3, 2}, model.chart())), 4.0, 1e-12);
  EXPECT_NEAR(j(make_point({0, 1}, model.chart())), kLocationScaleA, 1e-12);
}

TEST(JeffreysPrior, WishartIsProportionalToSinhRho) {
  Wishart2Model model(2.0);
  const auto j = jeffreys_prior(model);
  const double c = j(make_point({0, 1, 0}, model.chart())) / std::sinh(1.0);
  for (const auto& p : rho_grid(0.1, 3.0, 7)) {
    EXPECT_NEAR(j(p) / std::sinh(p[1]), c, 1e-12 * c);
  }
}

TEST(EuclideanGreen, KnownValues) {
  EXPECT_NEAR(euclidean_green(3, make_point({0, 0, 0}, Chart::euclidean(3)))(make_point({0, 1, 0}, Chart::euclidean(3))),
              1.0 / (4.0 * kPi), 1e-15);
  EXPECT_NEAR(euclidean_green(4, ParamPoint(Vector::Zero(4), Chart::euclidean(4)))(ParamPoint(Vector::Unit(4, 2), Chart::euclidean(4))),
              1.0 / (4.0 * kPi * kPi), 1e-15);
  EXPECT_NEAR(1.0 / (4.0 * kPi * kPi), 0.0253303, 1e-7);
}

TEST(EuclideanGreen, HomogeneousOfDegreeTwoMinusD) {
  const auto g = euclidean_green(3, make_point({0, 0, 0}, Chart::euclidean(3)));
  EXPECT_NEAR(g(make_point({2, 0, 0}, Chart::euclidean(3))), 0.5 * g(make_point({1, 0, 0}, Chart::euclidean(3))), 1e-15);
}

TEST(EuclideanGreen, NoGreenFunctionInLowDimension) {
  EXPECT_THROW(euclidean_green(2, make_point({0, 0}, Chart::euclidean(2))), DimensionError);
  EXPECT_THROW(stein_prior(2, make_point({0, 0}, Chart::euclidean(2))), DimensionError);
}

TEST(EuclideanGreen, HarmonicOffThePole) {
  for (int d : {3, 4, 5}) {
    const MetricField flat{[d](const ParamPoint&) -> Matrix { return Matrix::Identity(d, d); }, Chart::euclidean(d), "flat"};
    const auto g = euclidean_green(d, ParamPoint(Vector::Zero(d), Chart::euclidean(d)));
    for (const auto& p : radial_grid(d, 0.5, 4.0, 6)) {
      EXPECT_NEAR(laplace_beltrami(g, flat, p), 0.0, 1e-4) << "d = " << d;
    }
  }
}

TEST(GreenFunctions, StrictlyDecreasingAlongRays) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  const auto ge = euclidean_green(3, make_point({0, 0, 0}, Chart::euclidean(3)));
  const auto gh = hyperbolic_green(kLocationScaleA, make_point({0, 1}, Chart::location_scale()));
  const auto h = wishart_leaf_green();
  for (int ray = 0; ray < 5; ++ray) {
    const Vector dir = Eigen::Vector3d(n(rng), n(rng), n(rng)).normalized();
    const double angle = std::atan2(n(rng), n(rng));
    double prev_e = INFINITY, prev_w = INFINITY;
    for (double t = 0.2; t < 5.0; t += 0.3) {
      const double e = ge(ParamPoint(Vector(t * dir), Chart::euclidean(3)));
      const double w = h(make_point({0.0, t, angle}, Chart::wishart()));
      EXPECT_LT(e, prev_e);
      EXPECT_LT(w, prev_w);
      prev_e = e;
      prev_w = w;
    }
  }
  // Moving away from the base along a fixed direction.
  const auto base = make_point({0, 1}, Chart::location_scale());
  double prev = INFINITY;
  for (double s = 1.1; s < 40.0; s *= 1.3) {
    const auto p = make_point({0.4 * (s - 1.0), s}, Chart::location_scale());
    const double v = gh(p);
    EXPECT_LT(v, prev);
    prev = v;
    EXPECT_GT(hyperbolic_distance(kLocationScaleA, base, p), 0.0);
  }
}

TEST(SteinPrior, KnownValues) {
  EXPECT_NEAR(stein_prior(3, make_point({0, 0, 0}, Chart::euclidean(3)))(make_point({2, 0, 0}, Chart::euclidean(3))), 0.5, 1e-15);
  EXPECT_NEAR(stein_prior(5, ParamPoint(Vector::Zero(5), Chart::euclidean(5)))(ParamPoint(Vector::Unit(5, 4), Chart::euclidean(5))),
              1.0, 1e-15);
}

TEST(SteinPrior, SquareRootRatioIsSuperharmonic) {
  NormalModel model(3);
  const auto ratio = sqrt_field(prior_ratio(make_prior("stein", model), make_prior("jeffreys", model)));
  const auto report = superharmonic_scan(ratio, model.fisher_metric(), radial_grid(3, 0.5, 5.0, 20));
  EXPECT_EQ(report.verdict(), SuperharmonicVerdict::superharmonic);
  EXPECT_LT(report.max_laplacian, 0.0);
}

TEST(GreenPrior, EuclideanCaseIsSteinUpToAConstant) {
  NormalModel model(3);
  const auto pg = green_prior(euclidean_green(3, model.origin()), jeffreys_prior(model));
  const auto ps = stein_prior(3, model.origin());
  const double c = pg(make_point({1, 0, 0}, model.chart())) / ps(make_point({1, 0, 0}, model.chart()));
  for (const auto& p : radial_grid(3, 0.3, 6.0, 8)) {
    EXPECT_NEAR(pg(p) / ps(p), c, 1e-12 * c);
  }
}

TEST(GreenPrior, UnitGreenLeavesJeffreysUnchanged) {
  LocationScaleModel model;
  const auto j = jeffreys_prior(model);
  const auto pg = green_prior(constant_field(1.0), j);
  for (const auto& p : hyperbolic_ring(2.0, 0.5, 2.0, 4)) {
    EXPECT_DOUBLE_EQ(pg(p), j(p));
  }
}

TEST(GreenPrior, HyperbolicCaseFormula) {
  LocationScaleModel model;
  const auto p = make_prior("green-hyperbolic", model);
  const auto base = make_point({0, 1}, model.chart());
  for (const auto& q : {make_point({1.0, 0.5}, model.chart()), make_point({-2.0, 3.0}, model.chart())}) {
    const double rho = hyperbolic_distance(2.0, base, q);
    const double expected = -std::log(std::tanh(rho / (2.0 * std::sqrt(2.0)))) / (2.0 * kPi) / (q[1] * q[1]);
    EXPECT_NEAR(p(q) / expected, kLocationScaleA, 1e-12);
  }
}

TEST(GreenPrior, ChartMismatchThrows) {
  EXPECT_THROW(green_prior(euclidean_green(3, make_point({0, 0, 0}, Chart::euclidean(3))), jeffreys_prior(LocationScaleModel())),
               DomainError);
}

TEST(HyperbolicDistance, KnownValuesAndScaling) {
  const auto base = make_point({0, 1}, Chart::location_scale());
  EXPECT_EQ(hyperbolic_distance(1.0, base, base), 0.0);
  EXPECT_NEAR(hyperbolic_distance(1.0, base, make_point({0, std::exp(1.0)}, Chart::location_scale())), 1.0, 1e-14);
  const auto q = make_point({1.3, 0.4}, Chart::location_scale());
  EXPECT_NEAR(hyperbolic_distance(4.0, base, q), 2.0 * hyperbolic_distance(1.0, base, q), 1e-14);
  EXPECT_THROW(hyperbolic_distance(1.0, base, base.shifted(1, -2.0)), DomainError);
}

TEST(HyperbolicGreen, KnownValueAndDecay) {
  const auto g = hyperbolic_green(1.0, make_point({0, 1}, Chart::location_scale()));
  // dist = 1, so -(1/2 pi) log tanh(1/2).
  EXPECT_NEAR(g(make_point({0, std::exp(1.0)}, Chart::location_scale())), 0.1228575627, 1e-9);
  const double far = g(make_point({0, 1e8}, Chart::location_scale()));
  EXPECT_GT(far, 0.0);
  EXPECT_LT(far, 1e-6);
  EXPECT_THROW(g(make_point({0, 1}, Chart::location_scale())), SingularityError);
}

TEST(HyperbolicGreen, HarmonicOffTheBase) {
  for (double a : {1.0, 2.0}) {
    const MetricField metric{[a](const ParamPoint& p) -> Matrix { return (a / (p[1] * p[1])) * Matrix::Identity(2, 2); },
                             Chart::location_scale(), "a/sigma^2"};
    const auto g = hyperbolic_green(a, make_point({0, 1}, Chart::location_scale()));
    for (const auto& p : hyperbolic_ring(a, 0.5, 3.0, 6)) {
      EXPECT_NEAR(laplace_beltrami(g, metric, p), 0.0, 1e-5) << "a = " << a;
    }
    const auto off_axis = make_point({0.8, 1.4}, Chart::location_scale());
    EXPECT_NEAR(laplace_beltrami(g, metric, off_axis), 0.0, 1e-5);
  }
}

TEST(RightInvariantPrior, ValueRatioAndHarmonicity) {
  LocationScaleModel model;
  const auto pr = right_invariant_prior_ls();
  EXPECT_DOUBLE_EQ(pr(make_point({0, 2}, model.chart())), 0.5);
  const auto ratio = prior_ratio(pr, jeffreys_prior(model));
  std::vector<ParamPoint> grid;
  for (double mu : {-1.0, 0.0, 2.0}) {
    for (double s : {0.5, 1.0, 3.0}) {
      grid.push_back(make_point({mu, s}, model.chart()));
      EXPECT_NEAR(ratio(grid.back()) / s, 1.0 / kLocationScaleA, 1e-12);
    }
  }
  const auto report = superharmonic_scan(ratio, model.fisher_metric(), grid);
  EXPECT_LT(report.max_abs_laplacian, 1e-5);
  EXPECT_EQ(report.verdict(), SuperharmonicVerdict::superharmonic);
}

TEST(WishartShrinkagePrior, LeafGreenValuesAndLimits) {
  const auto h = wishart_leaf_green();
  // tanh(ln 3 / 2) = 1/2.
  EXPECT_NEAR(h(make_point({0, std::log(3.0), 0}, Chart::wishart())), std::log(2.0) / (2.0 * kPi), 1e-14);
  EXPECT_NEAR(std::log(2.0) / (2.0 * kPi), 0.110318, 1e-6);
  EXPECT_LT(h(make_point({0, 40.0, 0}, Chart::wishart())), 1e-15);
  const auto ps = wishart_shrinkage_prior(2.0);
  const auto pj = jeffreys_prior(Wishart2Model(2.0));
  EXPECT_LT(ps(make_point({0, 40.0, 0}, Chart::wishart())) / pj(make_point({0, 40.0, 0}, Chart::wishart())), 1e-15);
  EXPECT_THROW(ps(make_point({0, 1, 0}, Chart::wishart()).shifted(1, -2.0)), DomainError);
  EXPECT_THROW(wishart_shrinkage_prior(1.0), DomainError);
}

TEST(WishartShrinkagePrior, LeafGreenIsHarmonicAwayFromTheAxis) {
  for (double m : {2.0, 4.0}) {
    const auto report = superharmonic_scan(wishart_leaf_green(), Wishart2Model(m).fisher_metric(), rho_grid(0.5, 3.0, 12));
    EXPECT_LT(report.max_abs_laplacian, 1e-4) << "m = " << m;
  }
}

TEST(WishartShrinkagePrior, IsLeafGreenTimesJeffreys) {
  Wishart2Model model(2.0);
  const auto ratio = prior_ratio(wishart_shrinkage_prior(2.0), jeffreys_prior(model));
  const auto h = wishart_leaf_green();
  const auto p0 = make_point({0, 1, 0}, model.chart());
  const double c = ratio(p0) / h(p0);
  for (const auto& p : rho_grid(0.2, 3.0, 6)) {
    EXPECT_NEAR(ratio(p) / h(p), c, 1e-12 * c);
  }
}

TEST(ShrinkagePriors, SquareRootRatiosPassTheSuperharmonicCriterion) {
  struct Case {
    std::string model;
    std::string prior;
    std::vector<ParamPoint> grid;
  };
  const std::vector<Case> cases{
      {"normal3", "stein", radial_grid(3, 0.5, 5.0, 10)},
      {"normal5", "stein", radial_grid(5, 0.5, 5.0, 10)},
      {"location-scale", "green-hyperbolic", hyperbolic_ring(2.0, 0.5, 3.0, 6)},
      {"location-scale", "right-invariant", hyperbolic_ring(2.0, 0.5, 3.0, 6)},
      {"wishart2:m=2", "wishart-logtanh", rho_grid(0.5, 3.0, 10)},
      {"wishart2:m=4", "wishart-logtanh", rho_grid(0.5, 3.0, 10)},
  };
  for (const auto& c : cases) {
    const auto model = make_model(c.model);
    const auto root = sqrt_field(prior_ratio(make_prior(c.prior, *model), jeffreys_prior(*model)));
    for (const auto& p : c.grid) {
      EXPECT_GT(root(p), 0.0);
    }
    const auto report = superharmonic_scan(root, model->fisher_metric(), c.grid);
    EXPECT_EQ(report.verdict(), SuperharmonicVerdict::superharmonic) << c.model << " " << c.prior;
  }
}

TEST(PriorRegistry, UnknownAndIncompatibleNames) {
  const auto normal = make_model("normal3");
  try {
    make_prior("laplace", *normal);
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    for (const auto& name : prior_names()) {
      EXPECT_NE(std::string(e.what()).find(name), std::string::npos);
    }
  }
  EXPECT_THROW(make_prior("right-invariant", *normal), ConfigError);
  EXPECT_THROW(make_prior("stein", *make_model("normal2")), ConfigError);
  EXPECT_THROW(make_prior("wishart-logtanh", *make_model("location-scale")), ConfigError);
}

}  // namespace
