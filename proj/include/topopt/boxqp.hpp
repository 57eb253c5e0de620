#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "topopt/solve.hpp"

namespace topopt {

/// minimize 1/2 (x - target)^T Q (x - target) subject to lower <= x <= upper,
/// Q symmetric positive definite (both triangles stored).
struct BoxQp {
  SparseMatrix metric;
  Eigen::VectorXd target;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Per-component bound status: -1 at the lower bound, +1 at the upper, 0 free.
using BoundStatus = std::vector<std::int8_t>;

struct BoxQpOptions {
  double tolerance = 1e-9;
  int max_iterations = 200;
  /// Working set of a previous, similar problem.
  const BoundStatus* warm_start = nullptr;
};

struct BoxQpResult {
  Eigen::VectorXd x;
  BoundStatus status;
  int iterations = 0;
  /// Largest projected-KKT violation, relative to max(1, max_k Q_kk) max(1, |target|_inf).
  double kkt_residual = 0.0;
  bool converged = false;
  bool used_fallback = false;
};

/// Primal-dual active-set iteration (one sparse SPD solve on the free block
/// per working set). If the working set cycles, which cannot happen when Q
/// is an M-matrix but can for general SPD Q, a primal active-set method
/// takes over from the best feasible iterate. Throws NotPositiveDefinite if
/// a free block fails to factor.
BoxQpResult solve_box_qp(const BoxQp& qp, const BoxQpOptions& options = {});

double box_qp_objective(const BoxQp& qp, const Eigen::VectorXd& x);

/// Projected-KKT violation of x, scaled as in BoxQpResult::kkt_residual.
double box_qp_kkt_residual(const BoxQp& qp, const Eigen::VectorXd& x);

}  // namespace topopt
