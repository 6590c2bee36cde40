// Command-line front end. Flags override values from --config, which may be
// a plain config file or any output file written by an earlier run.

#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shrinkpred/experiments.hpp"

namespace {

struct Flag {
  CLI::Option* option;
  std::string key;
  std::string value;
};

class FlagSet {
 public:
  void add(CLI::App* app, const std::string& name, const std::string& key, const std::string& help) {
    flags_.push_back(std::make_unique<Flag>());
    Flag& f = *flags_.back();
    f.key = key;
    f.option = app->add_option(name, f.value, help);
  }

  void apply(shrinkpred::RunConfig& cfg) const {
    for (const auto& f : flags_) {
      if (f->option->count() > 0) {
        cfg.set(f->key, f->value);
      }
    }
  }

 private:
  std::vector<std::unique_ptr<Flag>> flags_;
};

}  // namespace

int main(int argc, char** argv) {
  using namespace shrinkpred;
  CLI::App app{"Shrinkage priors and Bayesian predictive densities: risk, harmonicity and curvature experiments"};
  app.require_subcommand(0, 1);

  std::string config_file;
  app.add_option("--config", config_file, "config file, or an output file whose header to reuse");
  FlagSet flags;
  flags.add(&app, "--workers", "output.workers", "worker threads (results do not depend on it)");
  flags.add(&app, "-o,--output", "output.path", "output CSV path (default $SHRINKPRED_OUTPUT_DIR/<subcommand>.csv)");

  auto* risk = app.add_subcommand("risk-compare", "paired risk differences of two priors over a theta grid and N list");
  auto* sh = app.add_subcommand("superharmonic", "Laplace-Beltrami scan of a scalar field");
  auto* curv = app.add_subcommand("curvature", "sectional curvature of the Fisher metric at a point");
  auto* asym = app.add_subcommand("asymptotic-diff", "leading-order risk difference of two priors");
  auto* pred = app.add_subcommand("predictive-eval", "compare predictive densities at sampled points");

  for (auto* sub : {risk, sh, curv, asym, pred}) {
    // --h names the baseline prior, so help is long-form only here.
    sub->set_help_flag("--help", "print this help message and exit");
    sub->add_option("--config", config_file, "config file, or an output file whose header to reuse");
    flags.add(sub, "--model", "model.name", "normal<d>, location-scale or wishart2:m=<m>");
    flags.add(sub, "-o,--output", "output.path", "output CSV path");
    flags.add(sub, "--workers", "output.workers", "worker threads");
  }
  for (auto* sub : {risk, pred}) {
    flags.add(sub, "--seed", "run.seed", "master seed");
    flags.add(sub, "--draws", "budget.draws", "importance-sampling draws K");
    flags.add(sub, "--inflation", "budget.inflation", "proposal covariance inflation");
  }
  for (auto* sub : {risk, asym}) {
    flags.add(sub, "--f", "priors.f", "candidate prior");
    flags.add(sub, "--h", "priors.h", "baseline prior");
    flags.add(sub, "--theta-grid", "grid.theta", "preset, axis sweep name:lo:hi:count, point list or @file");
  }
  for (auto* sub : {risk, asym, pred}) {
    flags.add(sub, "--N", "grid.N", "comma-separated sample sizes");
  }
  for (auto* sub : {sh, curv, asym}) {
    flags.add(sub, "--step", "tolerance.step", "relative finite-difference step");
  }
  flags.add(risk, "--reps", "budget.reps", "data replications");
  flags.add(risk, "--n-y", "budget.n_y", "future draws per replication");
  flags.add(risk, "--control-variate", "budget.control_variate", "true or false");
  flags.add(sh, "--field", "field.spec", "prior:<p>, ratio:<f>/<h>, sqrt-ratio:<f>/<h> or constant:<c>");
  flags.add(sh, "--grid", "grid.theta", "preset, axis sweep name:lo:hi:count, point list or @file");
  flags.add(sh, "--tol", "tolerance.superharmonic", "allowed positive Laplacian");
  flags.add(curv, "--point", "grid.point", "comma-separated coordinates");
  flags.add(curv, "--plane", "grid.plane", "two coordinate indices, e.g. 1,2");
  flags.add(pred, "--point", "grid.point", "true parameter, comma-separated");
  flags.add(pred, "--prior", "priors.prior", "prior of the Bayesian predictives");
  flags.add(pred, "--method", "predictive.method", "all, plugin, closed or is");
  flags.add(pred, "--test-points", "budget.test_points", "number of sampled evaluation points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  RunConfig cfg;
  try {
    if (!config_file.empty()) {
      apply_config_file(cfg, config_file);
    }
    for (auto* sub : app.get_subcommands()) {
      cfg.set("run.subcommand", sub->get_name());
    }
    flags.apply(cfg);
    if (cfg.subcommand.empty()) {
      throw ConfigError("no subcommand; use one of " + text::join(subcommands(), ", ") + " or --config");
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return run_guarded(cfg, std::cout, std::cerr);
}
