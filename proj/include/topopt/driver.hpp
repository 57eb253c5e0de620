#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "topopt/assemble.hpp"
#include "topopt/config.hpp"
#include "topopt/grid.hpp"
#include "topopt/optim.hpp"

namespace topopt {

/// A configured problem ready to optimize.
struct Case {
  RunConfig config;
  Benchmark problem;
  AssembledOperators ops;
  OptimizerConfig optimizer;  // lambda resolved
};

Benchmark build_benchmark(const RunConfig& config);
double resolve_lambda(const RunConfig& config, const Benchmark& problem);
Case build_case(const RunConfig& config);

/// 0 converged, 2 iteration cap, 3 numerical failure.
int exit_code(RunStatus status);

/// Values on the extended (full, unreduced) domain follow from the meshed
/// part by the factor extended_area / meshed_area.
double extended_factor(const Case& c);

std::string summary_json(const Case& c, const RunResult& result);

struct CaseOutcome {
  RunResult result;
  int exit_code = 0;
};

/// Optimizes and, if `write_files`, writes density.pgm, density.csv,
/// iterations.csv and summary.json into config.output_directory.
CaseOutcome run_case(const RunConfig& config, bool write_files = true);

/// Nearest-neighbour resampling of an nx x ny element field onto nx2 x ny2.
Eigen::VectorXd resample_nearest(const Eigen::VectorXd& field, int nx, int ny, int nx2, int ny2);

/// Fraction of elements on which both fields agree after thresholding at `threshold`.
double thresholded_overlap(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                           double threshold = 0.5);

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct RefineLevel {
  int factor = 1;
  int nx = 0;
  int ny = 0;
  bool ok = false;
  std::string error;
  RunStatus status = RunStatus::numerical_failure;
  int iterations = 0;
  double V = 0.0;
  double Jtilde = 0.0;
  double discreteness = 0.0;
  Eigen::VectorXd element_density;
  /// Against the previous successful level, resampled onto this level's grid.
  bool compared = false;
  double overlap = 0.0;
  double correlation = 0.0;
};

struct RefineReport {
  std::vector<RefineLevel> levels;
  std::string to_json() const;
};

/// Solves the same physical problem on meshes refined by each factor. Each
/// level writes into <output>/level_<factor> when `write_files` is set.
RefineReport refine_sweep(const RunConfig& config, const std::vector<int>& factors,
                          bool write_files = true);

}  // namespace topopt
