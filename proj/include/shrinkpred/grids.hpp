#pragma once

// Parameter grids from text: named presets per model, axis sweeps
// ("rho:0.5:3:20", products joined by '*'), explicit point lists
// ("0,0,0;1,0,0") and files ("@points.txt", one point per line).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "shrinkpred/errors.hpp"
#include "shrinkpred/models.hpp"
#include "shrinkpred/parse.hpp"
#include "shrinkpred/types.hpp"

namespace shrinkpred {

/// Coordinate names accepted in axis sweeps.
inline std::vector<std::string> axis_names(const Model& model) {
  switch (model.chart().kind) {
    case ChartKind::location_scale:
      return {"mu", "sigma"};
    case ChartKind::wishart:
      return {"lambda", "rho", "theta"};
    default: {
      std::vector<std::string> names{"r"};
      for (int i = 0; i < model.dim(); ++i) {
        names.push_back("x" + std::to_string(i + 1));
      }
      return names;
    }
  }
}

inline std::vector<std::string> grid_presets(const Model& model) {
  switch (model.chart().kind) {
    case ChartKind::location_scale:
      return {"origin-rays"};
    case ChartKind::wishart:
      return {"origin-rays", "rho-slice"};
    default:
      return {"origin-rays"};
  }
}

namespace detail {

inline std::vector<ParamPoint> preset_grid(const Model& model, const std::string& name) {
  const Chart chart = model.chart();
  const int d = model.dim();
  std::vector<Vector> coords;
  if (chart.kind == ChartKind::euclidean && name == "origin-rays") {
    for (double r : {0.0, 1.0, 2.0, 4.0}) {
      Vector v = Vector::Zero(d);
      v[0] = r;
      coords.push_back(v);
    }
    if (d >= 2) {
      Vector v = Vector::Zero(d);
      v[1] = 2.0;
      coords.push_back(v);
    }
    coords.push_back(Vector::Constant(d, 2.0 / std::sqrt(static_cast<double>(d))));
  } else if (chart.kind == ChartKind::location_scale && name == "origin-rays") {
    for (auto [mu, sigma] : {std::pair{0.0, 1.0}, {0.0, 2.0}, {0.0, 4.0}, {1.0, 1.0}, {2.0, 1.0}, {1.0, 0.5}}) {
      coords.push_back((Vector(2) << mu, sigma).finished());
    }
  } else if (chart.kind == ChartKind::wishart && name == "origin-rays") {
    for (double rho : {0.0, 0.5, 1.0, 2.0}) {
      coords.push_back((Vector(3) << 0.0, rho, 0.0).finished());
    }
    coords.push_back((Vector(3) << 0.0, 1.0, std::numbers::pi / 2.0).finished());
    coords.push_back((Vector(3) << 1.0, 1.0, 0.0).finished());
  } else if (chart.kind == ChartKind::wishart && name == "rho-slice") {
    for (double rho : {0.25, 1.0, 2.0}) {
      coords.push_back((Vector(3) << 0.0, rho, 0.0).finished());
    }
  } else {
    return {};
  }
  std::vector<ParamPoint> out;
  for (auto& c : coords) {
    out.emplace_back(std::move(c), chart);
  }
  return out;
}

/// One sweep "name:lo:hi:count" applied to every point of `base`.
inline std::vector<ParamPoint> apply_axis(const Model& model, const std::vector<ParamPoint>& base,
                                          const std::string& spec) {
  const auto parts = text::split(spec, ':');
  if (parts.size() != 4) {
    throw ConfigError("axis grid '" + spec + "' must look like name:lo:hi:count");
  }
  const auto names = axis_names(model);
  const auto it = std::find(names.begin(), names.end(), parts[0]);
  if (it == names.end()) {
    throw ConfigError("axis '" + parts[0] + "' is not a coordinate of " + model.name() +
                      "; available: " + text::join(names, ", "));
  }
  const double lo = text::to_double(parts[1], "axis lower bound");
  const double hi = text::to_double(parts[2], "axis upper bound");
  const auto count = text::to_unsigned(parts[3], "axis point count");
  if (count < 1) {
    throw ConfigError("axis grid '" + spec + "' needs at least one point");
  }
  const bool radial = model.chart().kind == ChartKind::euclidean && parts[0] == "r";
  const int axis = radial ? -1
                   : model.chart().kind == ChartKind::euclidean
                       ? static_cast<int>(it - names.begin()) - 1
                       : static_cast<int>(it - names.begin());
  std::vector<ParamPoint> out;
  for (const auto& p : base) {
    for (std::uint64_t k = 0; k < count; ++k) {
      const double t = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
      Vector c = p.coords;
      if (radial) {
        c += Vector::Constant(c.size(), t / std::sqrt(static_cast<double>(c.size())));
      } else {
        c[axis] = t;
      }
      out.emplace_back(std::move(c), p.chart);
    }
  }
  return out;
}

inline ParamPoint parse_point(const Model& model, const std::string& s) {
  const auto values = text::to_doubles(s, "point coordinate");
  Vector c(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    c[static_cast<Eigen::Index>(i)] = values[i];
  }
  try {
    return {c, model.chart()};
  } catch (const Error& e) {
    throw ConfigError("point '" + s + "': " + e.what());
  }
}

}  // namespace detail

using detail::parse_point;

/// Expands a grid spec for the model. Throws ConfigError on anything it
/// cannot read, listing the presets and axes that exist.
inline std::vector<ParamPoint> parse_grid(const Model& model, const std::string& spec) {
  const std::string s = text::trim(spec);
  if (s.empty()) {
    throw ConfigError("empty grid spec");
  }
  if (s[0] == '@') {
    std::ifstream in(s.substr(1));
    if (!in) {
      throw ConfigError("cannot read grid file '" + s.substr(1) + "'");
    }
    std::vector<ParamPoint> out;
    std::string line;
    while (std::getline(in, line)) {
      line = text::trim(line.substr(0, line.find('#')));
      if (!line.empty()) {
        out.push_back(detail::parse_point(model, line));
      }
    }
    if (out.empty()) {
      throw ConfigError("grid file '" + s.substr(1) + "' has no points");
    }
    return out;
  }
  auto preset = detail::preset_grid(model, s);
  if (!preset.empty()) {
    return preset;
  }
  if (s.find(':') != std::string::npos) {
    std::vector<ParamPoint> points{model.origin()};
    for (const auto& axis : text::split(s, '*')) {
      points = detail::apply_axis(model, points, axis);
    }
    return points;
  }
  if (std::isalpha(static_cast<unsigned char>(s[0]))) {
    throw ConfigError("unknown grid '" + s + "' for " + model.name() +
                      "; presets: " + text::join(grid_presets(model), ", ") +
                      "; or an axis sweep name:lo:hi:count, a point list, or @file");
  }
  std::vector<ParamPoint> out;
  for (const auto& p : text::split(s, ';')) {
    out.push_back(detail::parse_point(model, p));
  }
  return out;
}

}  // namespace shrinkpred
