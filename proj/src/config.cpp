#include "topopt/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace topopt {

namespace {

using nlohmann::json;

std::string lambda_rule_name(LambdaRule rule) { return rule == LambdaRule::fixed ? "fixed" : "area"; }

std::string clamp_name(ResidualClamp c) { return c == ResidualClamp::box ? "box" : "unit"; }

json to_json(const RunConfig& c) {
  const OptimizerConfig& o = c.optimizer;
  json j;
  j["problem"] = {{"type", to_string(c.problem)},
                  {"nx", c.nx},
                  {"ny", c.ny},
                  {"load", c.load},
                  {"k_in", c.k_in},
                  {"k_out", c.k_out}};
  j["material"] = {{"youngs_modulus", c.material.youngs_modulus},
                   {"poisson_ratio", c.material.poisson_ratio},
                   {"penalty", o.penalty},
                   {"delta_rho", o.delta_rho}};
  j["regularization"] = {{"beta", c.beta}};
  j["lambda"] = {{"rule", lambda_rule_name(c.lambda_rule)},
                 {"value", c.lambda_value},
                 {"after_negative", c.lambda_after_negative ? json(*c.lambda_after_negative)
                                                            : json(nullptr)}};
  j["optimizer"] = {{"algorithm", to_string(o.algorithm)},
                    {"hessian", to_string(o.hessian)},
                    {"tau0", o.tau0},
                    {"sigma", o.sigma},
                    {"nu", o.nu},
                    {"backtracking", o.backtracking},
                    {"max_backtracks", o.max_backtracks},
                    {"move_limit", o.move_limit},
                    {"active_epsilon", o.active_epsilon},
                    {"eps1", o.eps1},
                    {"eps2", o.eps2},
                    {"max_iter", o.max_iter},
                    {"hessian_floor", o.hessian_floor},
                    {"alpha", o.alpha},
                    {"filter_radius", o.filter_radius},
                    {"initial_density", o.initial_density},
                    {"qp_tolerance", o.qp_tolerance},
                    {"residual_clamp", clamp_name(o.residual_clamp)}};
  j["output"] = {{"directory", c.output_directory}};
  return j;
}

ProblemType problem_from_string(const std::string& name) {
  if (name == "mbb") return ProblemType::mbb;
  if (name == "inverter") return ProblemType::inverter;
  throw ConfigError("problem.type: unknown problem '" + name + "' (expected mbb or inverter)");
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "': expected key=value");
  }
  const std::string key = assignment.substr(0, eq);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos
                                                                          : dot - start);
    if (part.empty()) {
      throw ConfigError("override '" + assignment + "': empty key component");
    }
    if (!node->is_object()) {
      if (!node->is_null()) {
        throw ConfigError(key + ": not a section");
      }
      *node = json::object();
    }
    node = &(*node)[part];
    if (dot == std::string::npos) {
      break;
    }
    start = dot + 1;
  }
  *node = parse_value(assignment.substr(eq + 1));
}

// Copies user values into the fully populated default tree, rejecting
// unknown sections or keys and kind mismatches.
void merge_checked(const json& user, json& base) {
  if (!user.is_object()) {
    throw ConfigError("configuration root must be an object");
  }
  for (const auto& [section, values] : user.items()) {
    if (!base.contains(section)) {
      throw ConfigError(section + ": unknown section");
    }
    if (!values.is_object()) {
      throw ConfigError(section + ": expected a section (object)");
    }
    for (const auto& [key, value] : values.items()) {
      const std::string name = section + "." + key;
      json& slot = base[section];
      if (!slot.contains(key)) {
        throw ConfigError(name + ": unknown key");
      }
      const json& current = slot[key];
      const bool nullable = name == "lambda.after_negative";
      const bool ok = (current.is_number() && value.is_number()) ||
                      (current.is_boolean() && value.is_boolean()) ||
                      (current.is_string() && value.is_string()) ||
                      (nullable && (value.is_null() || value.is_number()));
      if (!ok) {
        throw ConfigError(name + ": expected " +
                          (nullable ? std::string("number or null") : std::string(current.type_name())));
      }
      slot[key] = value;
    }
  }
}

double number(const json& j, const char* section, const char* key) {
  return j.at(section).at(key).get<double>();
}

int integer(const json& j, const char* section, const char* key) {
  const json& v = j.at(section).at(key);
  const double d = v.get<double>();
  if (std::floor(d) != d || std::abs(d) > 1e9) {
    throw ConfigError(std::string(section) + "." + key + ": expected an integer");
  }
  return static_cast<int>(d);
}

std::string text(const json& j, const char* section, const char* key) {
  return j.at(section).at(key).get<std::string>();
}

RunConfig from_json(const json& j) {
  RunConfig c;
  c.problem = problem_from_string(text(j, "problem", "type"));
  c.nx = integer(j, "problem", "nx");
  c.ny = integer(j, "problem", "ny");
  c.load = number(j, "problem", "load");
  c.k_in = number(j, "problem", "k_in");
  c.k_out = number(j, "problem", "k_out");
  c.material.youngs_modulus = number(j, "material", "youngs_modulus");
  c.material.poisson_ratio = number(j, "material", "poisson_ratio");
  c.beta = number(j, "regularization", "beta");

  const std::string rule = text(j, "lambda", "rule");
  if (rule == "fixed") {
    c.lambda_rule = LambdaRule::fixed;
  } else if (rule == "area") {
    c.lambda_rule = LambdaRule::area;
  } else {
    throw ConfigError("lambda.rule: unknown rule '" + rule + "' (expected fixed or area)");
  }
  c.lambda_value = number(j, "lambda", "value");
  const json& after = j.at("lambda").at("after_negative");
  if (!after.is_null()) {
    c.lambda_after_negative = after.get<double>();
  }

  OptimizerConfig& o = c.optimizer;
  o.penalty = number(j, "material", "penalty");
  o.delta_rho = number(j, "material", "delta_rho");
  try {
    o.algorithm = algorithm_from_string(text(j, "optimizer", "algorithm"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("optimizer.algorithm: ") + e.what());
  }
  try {
    o.hessian = hessian_from_string(text(j, "optimizer", "hessian"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("optimizer.hessian: ") + e.what());
  }
  o.tau0 = number(j, "optimizer", "tau0");
  o.sigma = number(j, "optimizer", "sigma");
  o.nu = number(j, "optimizer", "nu");
  o.backtracking = j.at("optimizer").at("backtracking").get<bool>();
  o.max_backtracks = integer(j, "optimizer", "max_backtracks");
  o.move_limit = number(j, "optimizer", "move_limit");
  o.active_epsilon = number(j, "optimizer", "active_epsilon");
  o.eps1 = number(j, "optimizer", "eps1");
  o.eps2 = number(j, "optimizer", "eps2");
  o.max_iter = integer(j, "optimizer", "max_iter");
  o.hessian_floor = number(j, "optimizer", "hessian_floor");
  o.alpha = number(j, "optimizer", "alpha");
  o.filter_radius = number(j, "optimizer", "filter_radius");
  o.initial_density = number(j, "optimizer", "initial_density");
  o.qp_tolerance = number(j, "optimizer", "qp_tolerance");
  const std::string clamp = text(j, "optimizer", "residual_clamp");
  if (clamp == "box") {
    o.residual_clamp = ResidualClamp::box;
  } else if (clamp == "unit") {
    o.residual_clamp = ResidualClamp::unit;
  } else {
    throw ConfigError("optimizer.residual_clamp: unknown value '" + clamp + "' (expected box or unit)");
  }
  c.output_directory = text(j, "output", "directory");
  o.lambda_after_negative = c.lambda_after_negative;
  return c;
}

void check(bool ok, const std::string& key, const std::string& what) {
  if (!ok) {
    throw ConfigError(key + ": " + what);
  }
}

}  // namespace

std::string to_string(ProblemType type) { return type == ProblemType::mbb ? "mbb" : "inverter"; }

RunConfig default_config(ProblemType type) {
  RunConfig c;
  c.problem = type;
  if (type == ProblemType::inverter) {
    c.nx = 40;
    c.ny = 40;
    c.beta = 3e-4;
    c.lambda_rule = LambdaRule::fixed;
    c.lambda_value = 0.02;
    c.lambda_after_negative = 0.15;
    c.optimizer.lambda_after_negative = 0.15;
    c.optimizer.hessian = HessianKind::reciprocal_absolute;
    c.optimizer.tau0 = 0.1;
    c.optimizer.backtracking = false;
  }
  return c;
}

void validate_config(const RunConfig& c) {
  check(c.nx >= 1, "problem.nx", "must be at least 1");
  check(c.ny >= 1, "problem.ny", "must be at least 1");
  check(c.load > 0.0 && std::isfinite(c.load), "problem.load", "must be positive");
  if (c.problem == ProblemType::inverter) {
    check(c.ny >= 2 && c.ny % 2 == 0, "problem.ny", "must be even and at least 2 for the inverter");
    check(c.k_in > 0.0, "problem.k_in", "must be positive");
    check(c.k_out > 0.0, "problem.k_out", "must be positive");
  }
  check(c.material.youngs_modulus > 0.0, "material.youngs_modulus", "must be positive");
  check(c.material.poisson_ratio >= 0.0 && c.material.poisson_ratio < 0.5,
        "material.poisson_ratio", "must lie in [0, 0.5)");
  check(c.beta >= 0.0 && std::isfinite(c.beta), "regularization.beta", "must be non-negative");
  check(c.lambda_value >= 0.0 && std::isfinite(c.lambda_value), "lambda.value",
        "must be non-negative");
  check(!c.lambda_after_negative || *c.lambda_after_negative >= 0.0, "lambda.after_negative",
        "must be non-negative");
  check(c.problem == ProblemType::inverter || !c.lambda_after_negative, "lambda.after_negative",
        "continuation applies to the inverter only");
  const Algorithm a = c.optimizer.algorithm;
  check(c.problem == ProblemType::mbb || (a != Algorithm::oc && a != Algorithm::sensfilter),
        "optimizer.algorithm", "oc and sensfilter need a compliance problem");
  check(!c.output_directory.empty(), "output.directory", "must not be empty");
  try {
    OptimizerConfig probe = c.optimizer;
    probe.lambda = 0.0;
    validate(probe);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const std::string mapped =
        msg.rfind("optimizer.penalty", 0) == 0     ? "material." + msg.substr(10)
        : msg.rfind("optimizer.delta_rho", 0) == 0 ? "material." + msg.substr(10)
                                                    : msg;
    throw ConfigError(mapped);
  }
}

RunConfig parse_config(const std::string& content, const std::vector<std::string>& overrides) {
  json user;
  bool blank = content.find_first_not_of(" \t\r\n") == std::string::npos;
  if (blank) {
    user = json::object();
  } else {
    try {
      user = json::parse(content);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("parse error: ") + e.what());
    }
  }
  for (const std::string& o : overrides) {
    apply_override(user, o);
  }
  if (!user.is_object()) {
    throw ConfigError("configuration root must be an object");
  }
  if (!user.contains("problem") || !user["problem"].is_object() ||
      !user["problem"].contains("type")) {
    throw ConfigError("problem.type: required key is missing");
  }
  if (!user["problem"]["type"].is_string()) {
    throw ConfigError("problem.type: expected string");
  }
  const ProblemType type = problem_from_string(user["problem"]["type"].get<std::string>());
  json base = to_json(default_config(type));
  merge_checked(user, base);
  RunConfig c = from_json(base);
  validate_config(c);
  return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read configuration file '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string serialize_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace topopt
