#include "topopt/driver.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "topopt/output.hpp"

namespace topopt {

namespace {

using nlohmann::json;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

Benchmark build_benchmark(const RunConfig& config) {
  return config.problem == ProblemType::mbb
             ? mbb_problem(config.nx, config.ny, config.load)
             : inverter_problem(config.nx, config.ny, config.k_in, config.k_out);
}

double resolve_lambda(const RunConfig& config, const Benchmark& problem) {
  return config.lambda_rule == LambdaRule::fixed ? config.lambda_value
                                                 : config.lambda_value / problem.extended_area;
}

Case build_case(const RunConfig& config) {
  validate_config(config);
  Case c;
  c.config = config;
  c.problem = build_benchmark(config);
  c.ops = assemble_operators(c.problem.mesh, c.problem.bc, config.beta, config.material);
  c.optimizer = config.optimizer;
  c.optimizer.lambda = resolve_lambda(config, c.problem);
  c.optimizer.lambda_after_negative = config.lambda_after_negative;
  return c;
}

int exit_code(RunStatus status) {
  switch (status) {
    case RunStatus::converged: return 0;
    case RunStatus::iteration_cap: return 2;
    case RunStatus::numerical_failure: return 3;
  }
  return 3;
}

double extended_factor(const Case& c) { return c.problem.extended_area / c.ops.meshed_area; }

std::string summary_json(const Case& c, const RunResult& result) {
  const RunSummary& s = result.summary;
  const double f = extended_factor(c);
  json j;
  j["status"] = to_string(s.status);
  j["exit_code"] = exit_code(s.status);
  j["iterations"] = s.iterations;
  j["backtracks"] = s.total_backtracks;
  j["exhausted_backtracks"] = s.exhausted_backtracks;
  j["qp_fallbacks"] = s.qp_fallbacks;
  j["negative_filter_flags"] = s.negative_filter_flags;
  j["state_solves"] = s.state_solves;
  j["lambda"] = s.lambda;
  j["structural"] = finite_or_null(s.structural);
  j["J"] = finite_or_null(s.J);
  j["R"] = finite_or_null(s.R);
  j["V"] = finite_or_null(s.V);
  j["Jtilde"] = finite_or_null(s.Jtilde);
  j["E1"] = finite_or_null(s.E1);
  j["E2"] = finite_or_null(s.E2);
  j["discreteness_percent"] = finite_or_null(s.discreteness);
  j["extended_factor"] = f;
  j["extended"] = {{"structural", finite_or_null(f * s.structural)},
                   {"R", finite_or_null(f * s.R)},
                   {"Jtilde", finite_or_null(f * s.Jtilde)}};
  if (!s.failure.empty()) {
    j["failure"] = s.failure;
  }
  j["config"] = json::parse(serialize_config(c.config));
  return j.dump(2) + "\n";
}

CaseOutcome run_case(const RunConfig& config, bool write_files) {
  const Case c = build_case(config);
  CaseOutcome outcome;
  outcome.result = run(c.problem, c.ops, c.optimizer);
  outcome.exit_code = exit_code(outcome.result.summary.status);
  if (write_files) {
    const std::filesystem::path dir(config.output_directory);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
      throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    const RunResult& r = outcome.result;
    const int nx = c.problem.mesh.nx;
    const int ny = c.problem.mesh.ny;
    Eigen::VectorXd rho = r.element_density;
    if (rho.size() == 0) {
      rho = element_densities(c.ops, r.z);
    }
    write_pgm((dir / "density.pgm").string(), nx, ny, rho);
    write_density_csv((dir / "density.csv").string(), nx, ny, rho);
    write_iterations_csv((dir / "iterations.csv").string(), r.history);
    write_text((dir / "summary.json").string(), summary_json(c, r));
  }
  return outcome;
}

Eigen::VectorXd resample_nearest(const Eigen::VectorXd& field, int nx, int ny, int nx2, int ny2) {
  if (field.size() != static_cast<Eigen::Index>(nx) * ny || nx2 < 1 || ny2 < 1) {
    throw std::invalid_argument("resample_nearest: inconsistent sizes");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(nx2) * ny2);
  for (int i = 0; i < nx2; ++i) {
    const int ci = std::min(nx - 1, static_cast<int>((2LL * i + 1) * nx / (2LL * nx2)));
    for (int j = 0; j < ny2; ++j) {
      const int cj = std::min(ny - 1, static_cast<int>((2LL * j + 1) * ny / (2LL * ny2)));
      out[static_cast<Eigen::Index>(i) * ny2 + j] = field[static_cast<Eigen::Index>(ci) * ny + cj];
    }
  }
  return out;
}

double thresholded_overlap(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double threshold) {
  if (a.size() != b.size() || a.size() == 0) {
    throw std::invalid_argument("thresholded_overlap: size mismatch");
  }
  Eigen::Index agree = 0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    agree += ((a[k] >= threshold) == (b[k] >= threshold)) ? 1 : 0;
  }
  return static_cast<double>(agree) / static_cast<double>(a.size());
}

double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw std::invalid_argument("pearson_correlation: size mismatch");
  }
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double denom = std::sqrt((da * da).sum() * (db * db).sum());
  return denom > 0.0 ? (da * db).sum() / denom : std::numeric_limits<double>::quiet_NaN();
}

std::string RefineReport::to_json() const {
  json j = json::array();
  for (const RefineLevel& l : levels) {
    json e = {{"factor", l.factor}, {"nx", l.nx}, {"ny", l.ny}, {"ok", l.ok}};
    if (l.ok) {
      e["status"] = topopt::to_string(l.status);
      e["iterations"] = l.iterations;
      e["V"] = finite_or_null(l.V);
      e["Jtilde"] = finite_or_null(l.Jtilde);
      e["discreteness_percent"] = finite_or_null(l.discreteness);
      if (l.compared) {
        e["overlap_with_previous"] = finite_or_null(l.overlap);
        e["correlation_with_previous"] = finite_or_null(l.correlation);
      }
    } else {
      e["error"] = l.error;
    }
    j.push_back(e);
  }
  return json({{"levels", j}}).dump(2) + "\n";
}

RefineReport refine_sweep(const RunConfig& config, const std::vector<int>& factors,
                          bool write_files) {
  for (const int f : factors) {
    if (f < 1) {
      throw std::invalid_argument("refine_sweep: factors must be positive integers");
    }
  }
  RefineReport report;
  report.levels.reserve(factors.size());
  const RefineLevel* previous = nullptr;
  for (const int f : factors) {
    RefineLevel level;
    level.factor = f;
    level.nx = config.nx * f;
    level.ny = config.ny * f;
    try {
      RunConfig cfg = config;
      cfg.nx = level.nx;
      cfg.ny = level.ny;
      cfg.output_directory =
          (std::filesystem::path(config.output_directory) / ("level_" + std::to_string(f)))
              .string();
      const CaseOutcome outcome = run_case(cfg, write_files);
      const RunSummary& s = outcome.result.summary;
      level.status = s.status;
      level.ok = s.status != RunStatus::numerical_failure;
      if (!level.ok) {
        level.error = s.failure;
      }
      level.iterations = s.iterations;
      level.V = s.V;
      level.Jtilde = s.Jtilde;
      level.discreteness = s.discreteness;
      level.element_density = outcome.result.element_density;
    } catch (const std::exception& e) {
      level.ok = false;
      level.error = e.what();
    }
    if (level.ok && previous != nullptr) {
      const Eigen::VectorXd coarse = resample_nearest(previous->element_density, previous->nx,
                                                      previous->ny, level.nx, level.ny);
      level.compared = true;
      level.overlap = thresholded_overlap(coarse, level.element_density);
      level.correlation = pearson_correlation(coarse, level.element_density);
    }
    report.levels.push_back(std::move(level));
    if (report.levels.back().ok) {
      previous = &report.levels.back();
    }
  }
  return report;
}

}  // namespace topopt
