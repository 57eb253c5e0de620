#include "topopt/boxqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace topopt {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

void validate(const BoxQp& qp, const BoxQpOptions& options) {
  const Index m = qp.target.size();
  if (qp.metric.rows() != m || qp.metric.cols() != m || qp.lower.size() != m ||
      qp.upper.size() != m) {
    throw std::invalid_argument("solve_box_qp: inconsistent dimensions");
  }
  for (Index k = 0; k < m; ++k) {
    if (!(qp.lower[k] <= qp.upper[k])) {
      throw std::invalid_argument("solve_box_qp: lower > upper at component " + std::to_string(k));
    }
  }
  if (!(options.tolerance > 0.0)) {
    throw std::invalid_argument("solve_box_qp: tolerance must be positive");
  }
}

VectorXd clamp(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

double kkt_scale(const BoxQp& qp) {
  const double dmax = qp.metric.diagonal().cwiseAbs().maxCoeff();
  const double tmax = qp.target.size() > 0 ? qp.target.cwiseAbs().maxCoeff() : 0.0;
  return std::max(1.0, dmax) * std::max(1.0, tmax);
}

// Free components of `status` and their positions (-1 for bound components).
std::vector<Index> free_indices(const BoundStatus& status, std::vector<Index>& position) {
  std::vector<Index> free;
  position.assign(status.size(), -1);
  for (std::size_t k = 0; k < status.size(); ++k) {
    if (status[k] == 0) {
      position[k] = static_cast<Index>(free.size());
      free.push_back(static_cast<Index>(k));
    }
  }
  return free;
}

SparseMatrix free_block(const SparseMatrix& q, const std::vector<Index>& free,
                        const std::vector<Index>& position) {
  const auto nf = static_cast<Index>(free.size());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(nf) * 9);
  for (Index c = 0; c < nf; ++c) {
    for (SparseMatrix::InnerIterator it(q, free[static_cast<std::size_t>(c)]); it; ++it) {
      const Index r = position[static_cast<std::size_t>(it.row())];
      if (r >= 0) {
        entries.emplace_back(r, c, it.value());
      }
    }
  }
  SparseMatrix block(nf, nf);
  block.setFromTriplets(entries.begin(), entries.end());
  return block;
}

// Minimizer over the free components with the bound components fixed.
VectorXd subspace_minimizer(const BoxQp& qp, const BoundStatus& status) {
  const Index m = qp.target.size();
  VectorXd x = qp.target;
  VectorXd w = VectorXd::Zero(m);
  for (Index k = 0; k < m; ++k) {
    if (status[static_cast<std::size_t>(k)] < 0) {
      x[k] = qp.lower[k];
    } else if (status[static_cast<std::size_t>(k)] > 0) {
      x[k] = qp.upper[k];
    }
    w[k] = x[k] - qp.target[k];
  }
  std::vector<Index> position;
  const std::vector<Index> free = free_indices(status, position);
  if (free.empty()) {
    return x;
  }
  const VectorXd qw = qp.metric * w;
  VectorXd rhs(static_cast<Index>(free.size()));
  bool zero_rhs = true;
  for (std::size_t i = 0; i < free.size(); ++i) {
    rhs[static_cast<Index>(i)] = -qw[free[i]];
    zero_rhs = zero_rhs && rhs[static_cast<Index>(i)] == 0.0;
  }
  if (zero_rhs) {
    return x;
  }
  const Factorization f(free_block(qp.metric, free, position));
  const VectorXd d = f.solve(rhs);
  for (std::size_t i = 0; i < free.size(); ++i) {
    x[free[i]] = qp.target[free[i]] + d[static_cast<Index>(i)];
  }
  return x;
}

BoundStatus initial_status(const BoxQp& qp, const BoxQpOptions& options) {
  const Index m = qp.target.size();
  BoundStatus status(static_cast<std::size_t>(m), 0);
  if (options.warm_start != nullptr && options.warm_start->size() == status.size()) {
    status = *options.warm_start;
    for (Index k = 0; k < m; ++k) {
      if (qp.lower[k] == qp.upper[k]) {
        status[static_cast<std::size_t>(k)] = -1;
      }
    }
    return status;
  }
  for (Index k = 0; k < m; ++k) {
    if (qp.target[k] <= qp.lower[k]) {
      status[static_cast<std::size_t>(k)] = -1;
    } else if (qp.target[k] >= qp.upper[k]) {
      status[static_cast<std::size_t>(k)] = 1;
    }
  }
  return status;
}

BoundStatus status_of(const BoxQp& qp, const VectorXd& x) {
  BoundStatus status(static_cast<std::size_t>(x.size()), 0);
  for (Index k = 0; k < x.size(); ++k) {
    if (x[k] <= qp.lower[k]) {
      status[static_cast<std::size_t>(k)] = -1;
    } else if (x[k] >= qp.upper[k]) {
      status[static_cast<std::size_t>(k)] = 1;
    }
  }
  return status;
}

struct Best {
  VectorXd x;
  double objective = std::numeric_limits<double>::infinity();

  void offer(const BoxQp& qp, const VectorXd& candidate) {
    const double f = box_qp_objective(qp, candidate);
    if (f < objective) {
      objective = f;
      x = candidate;
    }
  }
};

// Classical primal active-set method started from a feasible point.
bool primal_active_set(const BoxQp& qp, double tol_abs, int max_iterations, VectorXd& x,
                       BoundStatus& status, int& iterations) {
  const Index m = x.size();
  status = status_of(qp, x);
  for (int it = 0; it < max_iterations; ++it) {
    ++iterations;
    const VectorXd g = qp.metric * (x - qp.target);
    std::vector<Index> position;
    const std::vector<Index> free = free_indices(status, position);

    VectorXd step = VectorXd::Zero(m);
    double step_norm = 0.0;
    if (!free.empty()) {
      VectorXd rhs(static_cast<Index>(free.size()));
      for (std::size_t i = 0; i < free.size(); ++i) {
        rhs[static_cast<Index>(i)] = -g[free[i]];
      }
      if (rhs.cwiseAbs().maxCoeff() > 0.0) {
        const Factorization f(free_block(qp.metric, free, position));
        const VectorXd d = f.solve(rhs);
        for (std::size_t i = 0; i < free.size(); ++i) {
          step[free[i]] = d[static_cast<Index>(i)];
        }
        step_norm = d.cwiseAbs().maxCoeff();
      }
    }

    if (step_norm <= 1e-15 * (1.0 + x.cwiseAbs().maxCoeff())) {
      Index release = -1;
      double worst = -tol_abs;
      for (Index k = 0; k < m; ++k) {
        const auto s = status[static_cast<std::size_t>(k)];
        if (s == 0 || qp.lower[k] == qp.upper[k]) {
          continue;
        }
        const double multiplier = s < 0 ? g[k] : -g[k];
        if (multiplier < worst) {
          worst = multiplier;
          release = k;
        }
      }
      if (release < 0) {
        return true;
      }
      status[static_cast<std::size_t>(release)] = 0;
      continue;
    }

    double alpha = 1.0;
    Index blocking = -1;
    std::int8_t blocking_side = 0;
    for (const Index k : free) {
      if (step[k] < 0.0) {
        const double a = (qp.lower[k] - x[k]) / step[k];
        if (a < alpha) {
          alpha = a;
          blocking = k;
          blocking_side = -1;
        }
      } else if (step[k] > 0.0) {
        const double a = (qp.upper[k] - x[k]) / step[k];
        if (a < alpha) {
          alpha = a;
          blocking = k;
          blocking_side = 1;
        }
      }
    }
    alpha = std::max(alpha, 0.0);
    x = clamp(x + alpha * step, qp.lower, qp.upper);
    if (blocking >= 0) {
      x[blocking] = blocking_side < 0 ? qp.lower[blocking] : qp.upper[blocking];
      status[static_cast<std::size_t>(blocking)] = blocking_side;
    }
  }
  return false;
}

}  // namespace

double box_qp_objective(const BoxQp& qp, const VectorXd& x) {
  const VectorXd d = x - qp.target;
  return 0.5 * d.dot(qp.metric * d);
}

double box_qp_kkt_residual(const BoxQp& qp, const VectorXd& x) {
  const VectorXd g = qp.metric * (x - qp.target);
  double worst = 0.0;
  for (Index k = 0; k < x.size(); ++k) {
    const double qkk = std::max(qp.metric.coeff(k, k), std::numeric_limits<double>::min());
    const double projected = std::clamp(x[k] - g[k] / qkk, qp.lower[k], qp.upper[k]);
    const double infeasible = std::max({qp.lower[k] - x[k], x[k] - qp.upper[k], 0.0});
    worst = std::max({worst, qkk * std::abs(x[k] - projected), qkk * infeasible});
  }
  return worst / kkt_scale(qp);
}

BoxQpResult solve_box_qp(const BoxQp& qp, const BoxQpOptions& options) {
  validate(qp, options);
  BoxQpResult result;
  const Index m = qp.target.size();
  if (m == 0) {
    result.x = VectorXd(0);
    result.converged = true;
    return result;
  }

  Best best;
  const VectorXd clamped = clamp(qp.target, qp.lower, qp.upper);
  if (clamped == qp.target) {
    // Feasible target: it is the minimizer, provided the metric is SPD.
    factorize(qp.metric);
    result.x = qp.target;
    result.status.assign(static_cast<std::size_t>(m), 0);
    for (Index k = 0; k < m; ++k) {
      if (qp.lower[k] == qp.upper[k]) result.status[static_cast<std::size_t>(k)] = -1;
    }
    result.converged = true;
    return result;
  }
  best.offer(qp, clamped);

  BoundStatus status = initial_status(qp, options);
  std::vector<BoundStatus> visited;
  while (result.iterations < options.max_iterations) {
    ++result.iterations;
    const VectorXd x = subspace_minimizer(qp, status);
    const VectorXd g = qp.metric * (x - qp.target);

    BoundStatus next(status.size(), 0);
    for (Index k = 0; k < m; ++k) {
      const auto s = status[static_cast<std::size_t>(k)];
      std::int8_t n = 0;
      if (qp.lower[k] == qp.upper[k]) {
        n = -1;
      } else if (s == 0) {
        n = x[k] < qp.lower[k] ? -1 : (x[k] > qp.upper[k] ? 1 : 0);
      } else if (s < 0) {
        n = g[k] > 0.0 ? -1 : 0;
      } else {
        n = g[k] < 0.0 ? 1 : 0;
      }
      next[static_cast<std::size_t>(k)] = n;
    }

    const VectorXd feasible = clamp(x, qp.lower, qp.upper);
    best.offer(qp, feasible);
    if (next == status) {
      result.x = feasible;
      result.status = std::move(status);
      result.kkt_residual = box_qp_kkt_residual(qp, result.x);
      result.converged = result.kkt_residual <= options.tolerance;
      if (result.converged) {
        return result;
      }
      break;
    }
    visited.push_back(status);
    if (std::find(visited.begin(), visited.end(), next) != visited.end()) {
      break;
    }
    status = std::move(next);
  }

  // Working-set cycling, cap reached or an inaccurate terminal solve.
  result.used_fallback = true;
  VectorXd x = best.x;
  BoundStatus fallback_status;
  int extra = 0;
  const int budget = std::max(options.max_iterations, 4 * static_cast<int>(m) + 20);
  primal_active_set(qp, options.tolerance * kkt_scale(qp), budget, x, fallback_status, extra);
  result.iterations += extra;
  best.offer(qp, x);
  result.x = best.x;
  result.status = status_of(qp, result.x);
  result.kkt_residual = box_qp_kkt_residual(qp, result.x);
  result.converged = result.kkt_residual <= options.tolerance;
  return result;
}

}  // namespace topopt
