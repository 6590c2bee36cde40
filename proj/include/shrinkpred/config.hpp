#pragma once

// Run configuration. Read from a plain-text file of [section] headers and
// key = value lines, overridden by command-line flags, and written back in a
// canonical form that heads every output file.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkpred/errors.hpp"
#include "shrinkpred/parse.hpp"

namespace shrinkpred {

inline constexpr const char* kConfigBegin = "# shrinkpred config";
inline constexpr const char* kConfigEnd = "# end config";
inline constexpr const char* kOutputDirEnv = "SHRINKPRED_OUTPUT_DIR";

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"risk-compare", "superharmonic", "curvature",
                                              "asymptotic-diff", "predictive-eval"};
  return names;
}

struct RunConfig {
  std::string subcommand;
  std::string model = "normal3";
  std::string prior_f = "stein";
  std::string prior_h = "jeffreys";
  std::string prior = "jeffreys";
  std::string method = "all";
  std::string field;
  std::string grid = "origin-rays";
  std::string point;
  std::string plane;
  std::vector<std::size_t> n_list{1, 5, 20};
  std::size_t reps = 2000;
  std::size_t n_y = 200;
  std::size_t draws = 2000;
  double inflation = 4.0;
  bool control_variate = true;
  std::size_t test_points = 5;
  std::uint64_t seed = 1;
  double step = 1e-4;
  double tol = 1e-5;

  // Execution settings; they never change results and are not recorded.
  std::string output;
  unsigned workers = 1;

  /// Sets "section.key" from text.
  void set(const std::string& key, const std::string& value) {
    auto str = [&](std::string& dst) { dst = value; };
    auto size = [&](std::size_t& dst) { dst = static_cast<std::size_t>(text::to_unsigned(value, key)); };
    auto real = [&](double& dst) { dst = text::to_double(value, key); };
    if (key == "run.subcommand") {
      if (std::find(subcommands().begin(), subcommands().end(), value) == subcommands().end()) {
        throw ConfigError("unknown subcommand '" + value + "'; available: " + text::join(subcommands(), ", "));
      }
      subcommand = value;
    } else if (key == "run.seed") {
      seed = text::to_unsigned(value, key);
    } else if (key == "model.name") {
      str(model);
    } else if (key == "priors.f") {
      str(prior_f);
    } else if (key == "priors.h") {
      str(prior_h);
    } else if (key == "priors.prior") {
      str(prior);
    } else if (key == "predictive.method") {
      if (value != "all" && value != "plugin" && value != "closed" && value != "is") {
        throw ConfigError("unknown method '" + value + "'; available: all, plugin, closed, is");
      }
      method = value;
    } else if (key == "field.spec") {
      str(field);
    } else if (key == "grid.theta") {
      str(grid);
    } else if (key == "grid.point") {
      str(point);
    } else if (key == "grid.plane") {
      str(plane);
    } else if (key == "grid.N") {
      n_list = text::to_sizes(value, key);
      for (auto n : n_list) {
        if (n < 1) {
          throw ConfigError("N must be at least 1");
        }
      }
    } else if (key == "budget.reps") {
      size(reps);
    } else if (key == "budget.n_y") {
      size(n_y);
    } else if (key == "budget.draws") {
      size(draws);
    } else if (key == "budget.inflation") {
      real(inflation);
    } else if (key == "budget.control_variate") {
      if (value != "true" && value != "false") {
        throw ConfigError(key + " must be true or false");
      }
      control_variate = value == "true";
    } else if (key == "budget.test_points") {
      size(test_points);
    } else if (key == "tolerance.step") {
      real(step);
    } else if (key == "tolerance.superharmonic") {
      real(tol);
    } else if (key == "output.path") {
      str(output);
    } else if (key == "output.workers") {
      workers = static_cast<unsigned>(text::to_unsigned(value, key));
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  void validate() const {
    if (subcommand.empty()) {
      throw ConfigError("no subcommand given");
    }
    if (reps < 2) {
      throw ConfigError("reps must be at least 2");
    }
    if (n_y < 2) {
      throw ConfigError("n_y must be at least 2");
    }
    if (draws < 20) {
      throw ConfigError("draws must be at least 20");
    }
    if (!(inflation > 0.0)) {
      throw ConfigError("inflation must be positive");
    }
    if (!(step > 0.0)) {
      throw ConfigError("step must be positive");
    }
    if (!(tol >= 0.0)) {
      throw ConfigError("superharmonic tolerance must be nonnegative");
    }
    if (n_list.empty()) {
      throw ConfigError("N list is empty");
    }
    if (subcommand == "superharmonic" && field.empty()) {
      throw ConfigError("superharmonic needs a field");
    }
    if ((subcommand == "curvature" || subcommand == "predictive-eval") && point.empty()) {
      throw ConfigError(subcommand + " needs a point");
    }
  }

  /// Canonical text: the keys the subcommand reads, in fixed order.
  [[nodiscard]] std::string to_text() const {
    const bool risk = subcommand == "risk-compare";
    const bool sh = subcommand == "superharmonic";
    const bool curv = subcommand == "curvature";
    const bool asym = subcommand == "asymptotic-diff";
    const bool pred = subcommand == "predictive-eval";
    std::vector<std::string> sizes;
    for (auto n : n_list) {
      sizes.push_back(std::to_string(n));
    }
    std::ostringstream out;
    out << "[run]\nsubcommand = " << subcommand << "\n";
    if (risk || pred) {
      out << "seed = " << seed << "\n";
    }
    out << "[model]\nname = " << model << "\n";
    if (risk || asym) {
      out << "[priors]\nf = " << prior_f << "\nh = " << prior_h << "\n";
    }
    if (pred) {
      out << "[priors]\nprior = " << prior << "\n[predictive]\nmethod = " << method << "\n";
    }
    if (sh) {
      out << "[field]\nspec = " << field << "\n";
    }
    out << "[grid]\n";
    if (risk || sh || asym) {
      out << "theta = " << grid << "\n";
    }
    if (curv || pred) {
      out << "point = " << point << "\n";
    }
    if (curv) {
      if (!plane.empty()) {
        out << "plane = " << plane << "\n";
      }
    }
    if (risk || asym || pred) {
      out << "N = " << text::join(sizes, ",") << "\n";
    }
    if (risk || pred) {
      out << "[budget]\n";
      if (risk) {
        out << "reps = " << reps << "\nn_y = " << n_y << "\n";
      }
      out << "draws = " << draws << "\ninflation = " << text::shortest(inflation) << "\n";
      if (risk) {
        out << "control_variate = " << (control_variate ? "true" : "false") << "\n";
      }
      if (pred) {
        out << "test_points = " << test_points << "\n";
      }
    }
    if (sh || curv || asym) {
      out << "[tolerance]\nstep = " << text::shortest(step) << "\n";
      if (sh) {
        out << "superharmonic = " << text::shortest(tol) << "\n";
      }
    }
    return out.str();
  }

  /// Output path: explicit, else $SHRINKPRED_OUTPUT_DIR/<subcommand>.csv,
  /// else ./<subcommand>.csv.
  [[nodiscard]] std::filesystem::path output_path() const {
    if (!output.empty()) {
      return output;
    }
    const char* dir = std::getenv(kOutputDirEnv);
    return std::filesystem::path(dir && *dir ? dir : ".") / (subcommand + ".csv");
  }
};

/// Applies "key = value" lines under [section] headers. Lines starting with
/// '#' are comments.
inline void apply_config_text(RunConfig& cfg, const std::string& body) {
  std::istringstream in(body);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section header");
      }
      section = text::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || section.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value inside a section");
    }
    cfg.set(section + "." + text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)));
  }
}

inline RunConfig parse_config_text(const std::string& body) {
  RunConfig cfg;
  apply_config_text(cfg, body);
  return cfg;
}

/// Reads a config file. A previous output file is accepted too: the block
/// between the config markers in its header is used.
inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file '" + path.string() + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string body = buf.str();
  const auto begin = body.find(std::string(kConfigBegin) + "\n");
  if (begin == std::string::npos) {
    apply_config_text(cfg, body);
    return;
  }
  const auto end = body.find(kConfigEnd, begin);
  if (end == std::string::npos) {
    throw ConfigError("config block in '" + path.string() + "' is not terminated");
  }
  std::istringstream block(body.substr(begin, end - begin));
  std::string line;
  std::string stripped;
  std::getline(block, line);
  while (std::getline(block, line)) {
    if (line.rfind("# ", 0) != 0) {
      throw ConfigError("malformed config header line in '" + path.string() + "'");
    }
    stripped += line.substr(2) + "\n";
  }
  apply_config_text(cfg, stripped);
}

/// The canonical config as '#'-prefixed header lines.
inline std::string config_header(const RunConfig& cfg) {
  std::string out = std::string(kConfigBegin) + "\n";
  std::istringstream in(cfg.to_text());
  std::string line;
  while (std::getline(in, line)) {
    out += "# " + line + "\n";
  }
  return out + kConfigEnd + "\n";
}

}  // namespace shrinkpred
