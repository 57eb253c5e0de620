#pragma once

#include <optional>
#include <string>
#include <vector>

#include "topopt/assemble.hpp"
#include "topopt/optim.hpp"

namespace topopt {

enum class ProblemType { mbb, inverter };

enum class LambdaRule {
  fixed,  // lambda = value
  area,   // lambda = value / |Omega|, |Omega| the full (extended) domain area
};

/// Complete description of one run. Nested JSON layout:
///
///   problem:        type, nx, ny, load, k_in, k_out
///   material:       youngs_modulus, poisson_ratio, penalty, delta_rho
///   regularization: beta
///   lambda:         rule ("fixed" | "area"), value, after_negative
///   optimizer:      algorithm, hessian, tau0, sigma, nu, backtracking, max_backtracks,
///                   move_limit, active_epsilon, eps1, eps2, max_iter, hessian_floor,
///                   alpha, filter_radius, initial_density, qp_tolerance, residual_clamp
///   output:         directory
///
/// Only problem.type is required. Defaults depend on the problem type: the
/// MBB beam uses lambda = 200 / |Omega|, the inverter lambda = 0.02 switched
/// to 0.15 once J < 0, a fixed step of 0.1 without backtracking and the
/// absolute reciprocal Hessian.
struct RunConfig {
  ProblemType problem = ProblemType::mbb;
  int nx = 60;
  int ny = 20;
  double load = 1.0;  // MBB point load magnitude
  double k_in = 0.1;
  double k_out = 0.1;
  Material material;
  double beta = 0.06;
  LambdaRule lambda_rule = LambdaRule::area;
  double lambda_value = 200.0;
  std::optional<double> lambda_after_negative;
  OptimizerConfig optimizer;  // penalty, delta_rho and lambda are filled from the above
  std::string output_directory = "out";

  bool operator==(const RunConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Defaults for a problem type.
RunConfig default_config(ProblemType type);

/// Parses JSON text; `overrides` are "dotted.key=value" assignments applied
/// before validation (value parsed as JSON, else taken as a string).
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Pretty-printed JSON with every field present.
std::string serialize_config(const RunConfig& config);

/// Throws ConfigError naming the offending key.
void validate_config(const RunConfig& config);

std::string to_string(ProblemType type);

}  // namespace topopt
