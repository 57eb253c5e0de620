#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "topopt/assemble.hpp"
#include "topopt/boxqp.hpp"
#include "topopt/grid.hpp"
#include "topopt/model.hpp"

namespace topopt {

enum class Algorithm { fbs, tmp, gp, oc, sensfilter };

/// Lower clamp used by the E2 residual: the feasible box [delta_rho, 1] or
/// the unit interval [0, 1].
enum class ResidualClamp { box, unit };

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::tmp;
  HessianKind hessian = HessianKind::reciprocal;
  double penalty = 3.0;
  double delta_rho = 1e-3;
  double lambda = 0.0;
  /// Continuation: switch to this lambda at the first iteration with J < 0.
  std::optional<double> lambda_after_negative;
  double tau0 = 1.0;
  double sigma = 0.6;
  double nu = 1e-3;
  bool backtracking = true;
  int max_backtracks = 30;
  double move_limit = 1.0;
  double active_epsilon = 1e-3;
  double eps1 = 1e-5;
  double eps2 = 1e-4;
  int max_iter = 1000;
  /// Reciprocal Hessian floor; 0 selects 1e-3 lambda A.
  double hessian_floor = 0.0;
  /// Identity-scaled Hessian and gradient-projection scale; 0 selects 4 lambda A.
  double alpha = 0.0;
  /// Helmholtz radius for the sensitivity filter; 0 selects 2a.
  double filter_radius = 0.0;
  double initial_density = 0.5;
  double qp_tolerance = 1e-9;
  ResidualClamp residual_clamp = ResidualClamp::box;

  bool operator==(const OptimizerConfig&) const = default;
};

/// Throws std::invalid_argument naming the first out-of-range field.
void validate(const OptimizerConfig& config);

std::string to_string(Algorithm algorithm);
Algorithm algorithm_from_string(const std::string& name);
std::string to_string(HessianKind kind);
HessianKind hessian_from_string(const std::string& name);

struct Bounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// [z_L]_k = max(delta, z_k - m), [z_U]_k = min(1, z_k + m).
Bounds move_bounds(const Eigen::VectorXd& z, double move_limit, double delta_rho);

struct ActiveSet {
  std::vector<Eigen::Index> lower;  // z_k <= delta + eps and g_k > 0
  std::vector<Eigen::Index> upper;  // z_k >= 1 - eps and g_k < 0
  std::vector<char> mask;           // 1 on lower and upper

  std::size_t size() const { return lower.size() + upper.size(); }
  bool contains(Eigen::Index k) const { return mask[static_cast<std::size_t>(k)] != 0; }
};

ActiveSet tmp_active_set(const Eigen::VectorXd& z, const Eigen::VectorXd& gradient,
                         double delta_rho, double epsilon);

/// H + tau G with H diagonal.
SparseMatrix step_metric(const Eigen::VectorXd& h, double tau, const SparseMatrix& g);

/// H + tau G with the off-diagonal entries of active rows and columns removed.
SparseMatrix build_scaling(const Eigen::VectorXd& h, double tau, const SparseMatrix& g,
                           const ActiveSet& active);

struct StepResult {
  Eigen::VectorXd candidate;
  Eigen::VectorXd interim;
  /// Armijo descent term: d^T grad with d = z_n - candidate (fbs, gp) or the
  /// two-metric direction (tmp). Zero for the OC-type updates.
  double descent = 0.0;
  int qp_iterations = 0;
  bool qp_converged = true;
  bool qp_fallback = false;
  BoundStatus qp_status;
  bool negative_filtered = false;
};

StepResult fbs_step(const AssembledOperators& ops, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& h, double tau, const Eigen::VectorXd& gradient,
                    const Bounds& bounds, double qp_tolerance = 1e-9,
                    const BoundStatus* warm_start = nullptr);

StepResult tmp_step(const AssembledOperators& ops, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& h, double tau, const Eigen::VectorXd& gradient,
                    const Bounds& bounds, const ActiveSet& active);

/// clamp(z - (tau / alpha) grad) onto [delta, 1].
StepResult gp_step(const Eigen::VectorXd& z, double tau, double alpha,
                   const Eigen::VectorXd& gradient, double delta_rho);

/// Nodal e_lambda = [P^T E]_k / (lambda v_k).
Eigen::VectorXd oc_ratio(const AssembledOperators& ops, const Eigen::VectorXd& energy,
                         double lambda);

/// clamp(z sqrt(e_lambda), z_L, z_U). Throws for the mechanism problem.
StepResult oc_step(const AssembledOperators& ops, ProblemKind kind, const Eigen::VectorXd& z,
                   const Eigen::VectorXd& energy, double lambda, const Bounds& bounds);

/// clamp(sqrt(z F[z e_lambda]), z_L, z_U); negative filtered values are set to
/// zero and flagged.
StepResult sensfilter_step(const AssembledOperators& ops, ProblemKind kind,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& energy, double lambda,
                           const HelmholtzFilter& filter, const Bounds& bounds);

struct Convergence {
  double E1 = 0.0;
  double E2 = 0.0;
  bool converged = false;
};

/// E1 = |J~_next - J~_prev| / |J~_prev|;
/// E2 = ||clamp(z - grad J~(z), lower, 1) - z|| / ||z|| at z = z_next.
Convergence convergence(const Eigen::VectorXd& z_next, const Eigen::VectorXd& gradient_next,
                        double jtilde_prev, double jtilde_next, double eps1, double eps2,
                        double clamp_lower);

struct BacktrackResult {
  std::size_t accepted = 0;  // index into the trial list, or trials.size() if none
  double tau = 0.0;
  int backtracks = 0;
  bool exhausted = false;
};

/// Armijo backtracking on tau = sigma^k tau0. `trial(tau)` returns the
/// candidate's J~ and the Armijo descent term; acceptance requires
/// J~_n - J~_trial >= nu * descent. On exhaustion the trial with the lowest
/// J~ not above J~_n is returned (accepted == trials when none qualifies).
BacktrackResult backtrack(const std::function<std::pair<double, double>(double)>& trial,
                          double jtilde_n, double tau0, double sigma, double nu,
                          int max_backtracks);

struct IterationRecord {
  int n = 0;
  double tau = 0.0;
  int backtracks = 0;
  double structural = 0.0;
  double J = 0.0;
  double R = 0.0;
  double V = 0.0;
  double Jtilde = 0.0;
  double E1 = 0.0;
  double E2 = 0.0;
  std::size_t active = 0;
  double lambda = 0.0;
  int phase = 0;
  bool backtracks_exhausted = false;
  bool majorized = true;
  double max_change = 0.0;
};

enum class RunStatus { converged, iteration_cap, numerical_failure };

std::string to_string(RunStatus status);

struct RunSummary {
  RunStatus status = RunStatus::iteration_cap;
  int iterations = 0;
  int total_backtracks = 0;
  int exhausted_backtracks = 0;
  int qp_fallbacks = 0;
  int negative_filter_flags = 0;
  double structural = 0.0;
  double R = 0.0;
  double V = 0.0;
  double J = 0.0;
  double Jtilde = 0.0;
  double E1 = 0.0;
  double E2 = 0.0;
  double discreteness = 0.0;
  double lambda = 0.0;
  std::uint64_t state_solves = 0;
  std::string failure;
};

struct RunResult {
  Eigen::VectorXd z;
  Eigen::VectorXd element_density;
  std::vector<IterationRecord> history;
  RunSummary summary;
};

/// Resolved defaults for one problem.
double default_hessian_floor(const AssembledOperators& ops, double lambda);
double default_alpha(const AssembledOperators& ops, double lambda);

/// Iterates from z = initial_density until E1 <= eps1 and E2 <= eps2 (for OC
/// and the sensitivity filter: E1 <= eps1 and ||z_{n+1} - z_n|| / ||z_n|| <= eps2)
/// or max_iter. Linear-algebra failures end the run with the history so far.
RunResult run(const Benchmark& problem, const AssembledOperators& ops,
              const OptimizerConfig& config, const Eigen::VectorXd* start = nullptr);

}  // namespace topopt
