#pragma once

// Scalar fields named on the command line:
//   prior:<name>          the prior density itself
//   ratio:<f>/<h>         f / h
//   sqrt-ratio:<f>/<h>    (f / h)^{1/2}
//   constant:<value>

#include <string>

#include "shrinkpred/errors.hpp"
#include "shrinkpred/models.hpp"
#include "shrinkpred/parse.hpp"
#include "shrinkpred/priors.hpp"

namespace shrinkpred {

inline ScalarField parse_field(const Model& model, const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("field '" + spec +
                      "' must be prior:<name>, ratio:<f>/<h>, sqrt-ratio:<f>/<h> or constant:<value>");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (kind == "prior") {
    return make_prior(arg, model).field;
  }
  if (kind == "constant") {
    return constant_field(text::to_double(arg, "constant field"));
  }
  if (kind == "ratio" || kind == "sqrt-ratio") {
    const auto slash = arg.find('/');
    if (slash == std::string::npos) {
      throw ConfigError("field '" + spec + "' needs <f>/<h>");
    }
    const auto f = make_prior(arg.substr(0, slash), model);
    const auto h = make_prior(arg.substr(slash + 1), model);
    ScalarField r = prior_ratio(f, h);
    return kind == "ratio" ? r : sqrt_field(r);
  }
  throw ConfigError("unknown field kind '" + kind + "'; available: prior, ratio, sqrt-ratio, constant");
}

}  // namespace shrinkpred
