#pragma once

// The five command-line experiments. Each validates its whole config before
// computing, then writes its output once at the end.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkpred/config.hpp"
#include "shrinkpred/errors.hpp"
#include "shrinkpred/fields.hpp"
#include "shrinkpred/geometry.hpp"
#include "shrinkpred/grids.hpp"
#include "shrinkpred/models.hpp"
#include "shrinkpred/parse.hpp"
#include "shrinkpred/predictive.hpp"
#include "shrinkpred/priors.hpp"
#include "shrinkpred/random.hpp"
#include "shrinkpred/report.hpp"
#include "shrinkpred/risk.hpp"

namespace shrinkpred {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

namespace detail {

inline std::pair<int, int> parse_plane(const RunConfig& cfg, const Model& model) {
  if (cfg.plane.empty()) {
    return model.chart().kind == ChartKind::wishart ? std::pair{1, 2} : std::pair{0, 1};
  }
  const auto idx = text::to_sizes(cfg.plane, "plane");
  const auto d = static_cast<std::size_t>(model.dim());
  if (idx.size() != 2 || idx[0] == idx[1] || idx[0] >= d || idx[1] >= d) {
    throw ConfigError("plane must be two distinct coordinate indices below " + std::to_string(d));
  }
  return {static_cast<int>(idx[0]), static_cast<int>(idx[1])};
}

inline std::string format_observation(const Observation& y) {
  std::string out;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    out += (i ? ";" : "") + format_number(y[i]);
  }
  return out;
}

inline int run_risk_compare(const RunConfig& cfg, std::ostream& log) {
  const auto model = make_model(cfg.model);
  const auto f = make_prior(cfg.prior_f, *model);
  const auto h = make_prior(cfg.prior_h, *model);
  const auto grid = parse_grid(*model, cfg.grid);
  IntegrationConfig integration;
  integration.draws = cfg.draws;
  integration.inflation = cfg.inflation;
  RiskOptions opts;
  opts.workers = cfg.workers;
  opts.control_variate = cfg.control_variate;

  const auto report =
      dominance_scan(model, f, h, grid, cfg.n_list, cfg.reps, cfg.n_y, cfg.seed, opts, integration);
  const auto path = cfg.output_path();
  write_atomic(path, risk_csv(report, config_header(cfg)));
  auto svg = path;
  svg.replace_extension(".svg");
  write_atomic(svg, risk_svg(report));

  log << "rows: " << report.rows.size() << "  dominates: " << report.count(Verdict::dominates)
      << "  inconclusive: " << report.count(Verdict::inconclusive)
      << "  h-better: " << report.count(Verdict::h_better) << "  error: " << report.count(Verdict::error)
      << "\nwrote " << path.string() << " and " << svg.string() << "\n";
  return report.count(Verdict::error) > 0 ? kExitNumerical : kExitOk;
}

inline int run_superharmonic(const RunConfig& cfg, std::ostream& log) {
  const auto model = make_model(cfg.model);
  const auto field = parse_field(*model, cfg.field);
  const auto grid = parse_grid(*model, cfg.grid);
  const auto report = superharmonic_scan(field, model->fisher_metric(), grid, cfg.step, cfg.tol);

  std::ostringstream csv;
  csv << config_header(cfg) << "model,field,point,value,laplacian,within_tol\n";
  for (const auto& gv : report.points) {
    csv << model->name() << ',' << cfg.field << ',' << format_theta(gv.point) << ',' << format_number(gv.value)
        << ',' << format_number(gv.laplacian) << ',' << (gv.laplacian <= report.tol ? "true" : "false")
        << "\n";
  }
  const auto path = cfg.output_path();
  write_atomic(path, csv.str());
  log << "field: " << cfg.field << "\npoints: " << report.grid_size
      << "\nmax laplacian: " << format_number(report.max_laplacian)
      << "\nmax |laplacian|: " << format_number(report.max_abs_laplacian)
      << "\nwithin tolerance: " << report.within_tol << "/" << report.grid_size
      << "\nnonconstant: " << (report.nonconstant ? "true" : "false")
      << "\nverdict: " << to_string(report.verdict()) << "\nwrote " << path.string() << "\n";
  return kExitOk;
}

inline int run_curvature(const RunConfig& cfg, std::ostream& log) {
  const auto model = make_model(cfg.model);
  const auto p = parse_point(*model, cfg.point);
  const auto [i, j] = parse_plane(cfg, *model);
  const Vector x = Vector::Unit(model->dim(), i);
  const Vector y = Vector::Unit(model->dim(), j);
  const double k = sectional_curvature(model->fisher_metric(), p, x, y, cfg.step);

  std::ostringstream csv;
  csv << config_header(cfg) << "model,point,plane,K\n"
      << model->name() << ',' << format_theta(p) << ',' << i << ';' << j << ',' << format_number(k) << "\n";
  const auto path = cfg.output_path();
  write_atomic(path, csv.str());
  log << "K = " << format_number(k) << "\nwrote " << path.string() << "\n";
  return kExitOk;
}

inline int run_asymptotic_diff(const RunConfig& cfg, std::ostream& log) {
  const auto model = make_model(cfg.model);
  const auto f = make_prior(cfg.prior_f, *model);
  const auto h = make_prior(cfg.prior_h, *model);
  const auto jeffreys = jeffreys_prior(*model);
  const auto grid = parse_grid(*model, cfg.grid);
  const auto metric = model->fisher_metric();

  std::ostringstream csv;
  csv << config_header(cfg) << "model,prior_f,prior_h,theta,N,diff,scaled_diff,verdict,flags\n";
  std::size_t errors = 0;
  for (const auto& p : grid) {
    for (auto n : cfg.n_list) {
      csv << model->name() << ',' << f.name << ',' << h.name << ',' << format_theta(p) << ',' << n << ',';
      try {
        const double v = asymptotic_risk_difference(metric, f, h, jeffreys, model->dim(), p, n, cfg.step);
        const double nn = static_cast<double>(n);
        const char* verdict = v > 0.0 ? "f-better" : v < 0.0 ? "h-better" : "equal";
        csv << format_number(v) << ',' << format_number(v * nn * nn) << ',' << verdict << ",\n";
      } catch (const NumericalError& e) {
        ++errors;
        csv << "nan,nan,error,error:" << csv_safe(e.what()) << "\n";
      }
    }
  }
  const auto path = cfg.output_path();
  write_atomic(path, csv.str());
  log << "rows: " << grid.size() * cfg.n_list.size() << "  error: " << errors << "\nwrote " << path.string()
      << "\n";
  return errors > 0 ? kExitNumerical : kExitOk;
}

inline int run_predictive_eval(const RunConfig& cfg, std::ostream& log) {
  const auto model = make_model(cfg.model);
  const auto prior = make_prior(cfg.prior, *model);
  const auto theta = parse_point(*model, cfg.point);
  if (cfg.method == "closed" && !has_closed_form(*model, prior)) {
    throw ConfigError("no closed-form predictive for prior " + prior.name + " on " + model->name() +
                      "; closed forms exist for jeffreys on normal and wishart2 models");
  }
  IntegrationConfig integration;
  integration.draws = cfg.draws;
  integration.inflation = cfg.inflation;

  std::vector<std::pair<std::string, PredictiveMethod>> methods;
  if (cfg.method == "all" || cfg.method == "plugin") {
    methods.emplace_back("plugin", PredictiveMethod::plugin);
  }
  if ((cfg.method == "all" && has_closed_form(*model, prior)) || cfg.method == "closed") {
    methods.emplace_back("closed", PredictiveMethod::closed_form);
  }
  if (cfg.method == "all" || cfg.method == "is") {
    methods.emplace_back("is", PredictiveMethod::importance_sampling);
  }

  std::ostringstream csv;
  csv << config_header(cfg) << "model,prior,theta,N,y,true_log,method,log_density,ess\n";
  for (std::size_t k = 0; k < cfg.n_list.size(); ++k) {
    const std::uint64_t s = derive_seed(cfg.seed, {k});
    Rng data_rng = make_rng(stream_seed(s, Stream::data));
    Rng future_rng = make_rng(stream_seed(s, Stream::future));
    const DataSet data = model->sample_data(theta, cfg.n_list[k], data_rng);
    const auto ys = model->sample(theta, cfg.test_points, future_rng);
    std::vector<PredictiveDensity> preds;
    for (const auto& [name, method] : methods) {
      preds.push_back(bayes_builder(model, prior, integration, method)(data, stream_seed(s, Stream::integration)));
    }
    for (const auto& y : ys) {
      for (std::size_t m = 0; m < preds.size(); ++m) {
        const auto& diag = preds[m].diagnostics();
        csv << model->name() << ',' << prior.name << ',' << format_theta(theta) << ',' << cfg.n_list[k] << ','
            << format_observation(y) << ',' << format_number(model->log_density(y, theta)) << ','
            << methods[m].first << ',' << format_number(preds[m].log_density(y)) << ','
            << (diag ? format_number(diag->ess) : "") << "\n";
      }
    }
    for (std::size_t m = 0; m < preds.size(); ++m) {
      if (const auto& diag = preds[m].diagnostics()) {
        log << "N=" << cfg.n_list[k] << " " << methods[m].first << ": ess " << format_number(diag->ess) << " of "
            << diag->draws << " draws\n";
      }
    }
  }
  const auto path = cfg.output_path();
  write_atomic(path, csv.str());
  log << "wrote " << path.string() << "\n";
  return kExitOk;
}

}  // namespace detail

/// Runs the configured experiment. Config problems throw ConfigError before
/// any file is written; numerical failures throw NumericalError.
inline int run(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  if (cfg.subcommand == "risk-compare") {
    return detail::run_risk_compare(cfg, log);
  }
  if (cfg.subcommand == "superharmonic") {
    return detail::run_superharmonic(cfg, log);
  }
  if (cfg.subcommand == "curvature") {
    return detail::run_curvature(cfg, log);
  }
  if (cfg.subcommand == "asymptotic-diff") {
    return detail::run_asymptotic_diff(cfg, log);
  }
  if (cfg.subcommand == "predictive-eval") {
    return detail::run_predictive_eval(cfg, log);
  }
  throw ConfigError("unknown subcommand '" + cfg.subcommand + "'");
}

/// run() with errors mapped to exit codes and reported on `err`.
inline int run_guarded(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    return run(cfg, log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace shrinkpred
