#include "topopt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "topopt/kernels.hpp"

namespace topopt {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

VectorXd clamp(const VectorXd& x, const VectorXd& lo, const VectorXd& hi) {
  VectorXd out(x.size());
  kernels::active().clamp(x.data(), lo.data(), hi.data(), static_cast<std::size_t>(x.size()),
                          out.data());
  return out;
}

SparseMatrix diagonal_matrix(const VectorXd& d) {
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(d.size()));
  for (Index k = 0; k < d.size(); ++k) {
    entries.emplace_back(k, k, d[k]);
  }
  SparseMatrix out(d.size(), d.size());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) {
    throw std::invalid_argument(std::string("optimizer.") + field + ": " + what);
  }
}

std::size_t count_at_bounds(const VectorXd& z, double lower) {
  std::size_t n = 0;
  for (Index k = 0; k < z.size(); ++k) {
    n += (z[k] <= lower || z[k] >= 1.0) ? 1 : 0;
  }
  return n;
}

}  // namespace

void validate(const OptimizerConfig& c) {
  require(c.penalty >= 1.0, "penalty", "must be at least 1");
  require(c.delta_rho > 0.0 && c.delta_rho < 1.0, "delta_rho", "must lie in (0, 1)");
  require(c.lambda >= 0.0 && std::isfinite(c.lambda), "lambda", "must be finite and non-negative");
  require(!c.lambda_after_negative || (*c.lambda_after_negative >= 0.0 &&
                                       std::isfinite(*c.lambda_after_negative)),
          "lambda_after_negative", "must be finite and non-negative");
  require(c.tau0 > 0.0 && std::isfinite(c.tau0), "tau0", "must be positive");
  require(c.sigma > 0.0 && c.sigma < 1.0, "sigma", "must lie in (0, 1)");
  require(c.nu > 0.0 && c.nu < 1.0, "nu", "must lie in (0, 1)");
  require(c.max_backtracks >= 0, "max_backtracks", "must be non-negative");
  require(c.move_limit > 0.0 && c.move_limit <= 1.0, "move_limit", "must lie in (0, 1]");
  require(c.active_epsilon >= 0.0 && c.delta_rho + c.active_epsilon < 1.0 - c.active_epsilon,
          "active_epsilon", "must be non-negative with delta_rho + eps < 1 - eps");
  require(c.eps1 >= 0.0, "eps1", "must be non-negative");
  require(c.eps2 >= 0.0, "eps2", "must be non-negative");
  require(c.max_iter >= 1, "max_iter", "must be at least 1");
  require(c.hessian_floor >= 0.0, "hessian_floor", "must be non-negative");
  require(c.alpha >= 0.0, "alpha", "must be non-negative");
  require(c.filter_radius >= 0.0, "filter_radius", "must be non-negative");
  require(c.initial_density >= c.delta_rho && c.initial_density <= 1.0, "initial_density",
          "must lie in [delta_rho, 1]");
  require(c.qp_tolerance > 0.0, "qp_tolerance", "must be positive");
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::fbs: return "fbs";
    case Algorithm::tmp: return "tmp";
    case Algorithm::gp: return "gp";
    case Algorithm::oc: return "oc";
    case Algorithm::sensfilter: return "sensfilter";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (const Algorithm a : {Algorithm::fbs, Algorithm::tmp, Algorithm::gp, Algorithm::oc,
                            Algorithm::sensfilter}) {
    if (to_string(a) == name) {
      return a;
    }
  }
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::string to_string(HessianKind kind) {
  switch (kind) {
    case HessianKind::identity: return "identity";
    case HessianKind::reciprocal: return "reciprocal";
    case HessianKind::reciprocal_absolute: return "reciprocal_absolute";
  }
  return "?";
}

HessianKind hessian_from_string(const std::string& name) {
  for (const HessianKind k :
       {HessianKind::identity, HessianKind::reciprocal, HessianKind::reciprocal_absolute}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw std::invalid_argument("unknown hessian kind '" + name + "'");
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::converged: return "converged";
    case RunStatus::iteration_cap: return "iteration_cap";
    case RunStatus::numerical_failure: return "numerical_failure";
  }
  return "?";
}

Bounds move_bounds(const VectorXd& z, double move_limit, double delta_rho) {
  Bounds b;
  b.lower = (z.array() - move_limit).max(delta_rho).matrix();
  b.upper = (z.array() + move_limit).min(1.0).matrix();
  return b;
}

ActiveSet tmp_active_set(const VectorXd& z, const VectorXd& gradient, double delta_rho,
                         double epsilon) {
  ActiveSet set;
  set.mask.assign(static_cast<std::size_t>(z.size()), 0);
  for (Index k = 0; k < z.size(); ++k) {
    if (z[k] <= delta_rho + epsilon && gradient[k] > 0.0) {
      set.lower.push_back(k);
      set.mask[static_cast<std::size_t>(k)] = 1;
    } else if (z[k] >= 1.0 - epsilon && gradient[k] < 0.0) {
      set.upper.push_back(k);
      set.mask[static_cast<std::size_t>(k)] = 1;
    }
  }
  return set;
}

SparseMatrix step_metric(const VectorXd& h, double tau, const SparseMatrix& g) {
  SparseMatrix q = tau * g;
  q += diagonal_matrix(h);
  q.makeCompressed();
  return q;
}

SparseMatrix build_scaling(const VectorXd& h, double tau, const SparseMatrix& g,
                           const ActiveSet& active) {
  const Index m = h.size();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(g.nonZeros() + m));
  for (Index c = 0; c < g.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(g, c); it; ++it) {
      const Index r = it.row();
      if (r == c || (!active.contains(r) && !active.contains(c))) {
        entries.emplace_back(r, c, tau * it.value());
      }
    }
  }
  for (Index k = 0; k < m; ++k) {
    entries.emplace_back(k, k, h[k]);
  }
  SparseMatrix d(m, m);
  d.setFromTriplets(entries.begin(), entries.end());
  return d;
}

StepResult fbs_step(const AssembledOperators& ops, const VectorXd& z, const VectorXd& h,
                    double tau, const VectorXd& gradient, const Bounds& bounds,
                    double qp_tolerance, const BoundStatus* warm_start) {
  StepResult step;
  BoxQp qp;
  qp.metric = step_metric(h, tau, ops.tikhonov);
  if (gradient.cwiseAbs().maxCoeff() == 0.0) {
    step.interim = z;
  } else {
    const Factorization f(qp.metric);
    step.interim = z - tau * f.solve(gradient);
  }
  qp.target = step.interim;
  qp.lower = bounds.lower;
  qp.upper = bounds.upper;
  BoxQpOptions options;
  options.tolerance = qp_tolerance;
  options.warm_start = warm_start;
  BoxQpResult sol = solve_box_qp(qp, options);
  step.candidate = std::move(sol.x);
  step.qp_iterations = sol.iterations;
  step.qp_converged = sol.converged;
  step.qp_fallback = sol.used_fallback;
  step.qp_status = std::move(sol.status);
  step.descent = (z - step.candidate).dot(gradient);
  return step;
}

StepResult tmp_step(const AssembledOperators& ops, const VectorXd& z, const VectorXd& h,
                    double tau, const VectorXd& gradient, const Bounds& bounds,
                    const ActiveSet& active) {
  StepResult step;
  VectorXd direction = VectorXd::Zero(z.size());
  if (gradient.cwiseAbs().maxCoeff() != 0.0) {
    const Factorization f(build_scaling(h, tau, ops.tikhonov, active));
    direction = tau * f.solve(gradient);
  }
  step.interim = z - direction;
  step.candidate = clamp(step.interim, bounds.lower, bounds.upper);
  double descent = 0.0;
  for (Index k = 0; k < z.size(); ++k) {
    const double d = active.contains(k) ? z[k] - step.candidate[k] : direction[k];
    descent += d * gradient[k];
  }
  step.descent = descent;
  return step;
}

StepResult gp_step(const VectorXd& z, double tau, double alpha, const VectorXd& gradient,
                   double delta_rho) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("gp_step: alpha must be positive");
  }
  StepResult step;
  step.interim = z - (tau / alpha) * gradient;
  const VectorXd lo = VectorXd::Constant(z.size(), delta_rho);
  const VectorXd hi = VectorXd::Ones(z.size());
  step.candidate = clamp(step.interim, lo, hi);
  step.descent = (z - step.candidate).dot(gradient);
  return step;
}

VectorXd oc_ratio(const AssembledOperators& ops, const VectorXd& energy, double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("oc_ratio: lambda must be positive");
  }
  const VectorXd pte = ops.projection.transpose() * energy;
  return (pte.array() / (lambda * ops.volume.array())).matrix();
}

StepResult oc_step(const AssembledOperators& ops, ProblemKind kind, const VectorXd& z,
                   const VectorXd& energy, double lambda, const Bounds& bounds) {
  if (kind != ProblemKind::compliance) {
    throw std::invalid_argument("oc_step: only defined for compliance problems");
  }
  StepResult step;
  const VectorXd e = oc_ratio(ops, energy, lambda);
  step.interim = (z.array() * e.array().max(0.0).sqrt()).matrix();
  step.candidate = clamp(step.interim, bounds.lower, bounds.upper);
  return step;
}

StepResult sensfilter_step(const AssembledOperators& ops, ProblemKind kind, const VectorXd& z,
                           const VectorXd& energy, double lambda, const HelmholtzFilter& filter,
                           const Bounds& bounds) {
  if (kind != ProblemKind::compliance) {
    throw std::invalid_argument("sensfilter_step: only defined for compliance problems");
  }
  StepResult step;
  const VectorXd e = oc_ratio(ops, energy, lambda);
  VectorXd smoothed =
      filter.radius() > 0.0 ? filter.apply((z.array() * e.array()).matrix())
                            : VectorXd((z.array() * e.array()).matrix());
  if (smoothed.minCoeff() < 0.0) {
    step.negative_filtered = true;
    smoothed = smoothed.cwiseMax(0.0);
  }
  step.interim = (z.array() * smoothed.array()).sqrt().matrix();
  step.candidate = clamp(step.interim, bounds.lower, bounds.upper);
  return step;
}

Convergence convergence(const VectorXd& z_next, const VectorXd& gradient_next, double jtilde_prev,
                        double jtilde_next, double eps1, double eps2, double clamp_lower) {
  Convergence c;
  const double diff = std::abs(jtilde_next - jtilde_prev);
  c.E1 = diff == 0.0 ? 0.0 : diff / std::abs(jtilde_prev);
  const double zn = z_next.norm();
  const double rn = std::sqrt(kernels::active().projected_residual_sq(
      z_next.data(), gradient_next.data(), clamp_lower, 1.0, static_cast<std::size_t>(z_next.size())));
  c.E2 = rn == 0.0 ? 0.0 : rn / zn;
  c.converged = c.E1 <= eps1 && c.E2 <= eps2;
  return c;
}

BacktrackResult backtrack(const std::function<std::pair<double, double>(double)>& trial,
                          double jtilde_n, double tau0, double sigma, double nu,
                          int max_backtracks) {
  BacktrackResult result;
  std::size_t best = static_cast<std::size_t>(max_backtracks) + 1;
  double best_value = jtilde_n;
  double best_tau = 0.0;
  double tau = tau0;
  for (int k = 0; k <= max_backtracks; ++k) {
    const auto [jtilde, descent] = trial(tau);
    if (jtilde_n - jtilde >= nu * descent) {
      result.accepted = static_cast<std::size_t>(k);
      result.tau = tau;
      result.backtracks = k;
      return result;
    }
    if (jtilde <= best_value) {
      best_value = jtilde;
      best = static_cast<std::size_t>(k);
      best_tau = tau;
    }
    tau *= sigma;
  }
  result.accepted = best;
  result.tau = best_tau;
  result.backtracks = max_backtracks;
  result.exhausted = true;
  return result;
}

double default_hessian_floor(const AssembledOperators& ops, double lambda) {
  return std::max(1e-3 * lambda * ops.element_area, 1e-12);
}

double default_alpha(const AssembledOperators& ops, double lambda) {
  return std::max(4.0 * lambda * ops.element_area, 1e-12);
}

RunResult run(const Benchmark& problem, const AssembledOperators& ops,
              const OptimizerConfig& config, const VectorXd* start) {
  validate(config);
  const Index m = ops.node_count;
  const Algorithm alg = config.algorithm;
  const bool oc_type = alg == Algorithm::oc || alg == Algorithm::sensfilter;
  const double clamp_lower = config.residual_clamp == ResidualClamp::box ? config.delta_rho : 0.0;

  RunResult out;
  RunSummary& summary = out.summary;
  out.z = start != nullptr ? *start : VectorXd::Constant(m, config.initial_density);
  if (out.z.size() != m) {
    throw std::invalid_argument("run: start vector has wrong size");
  }

  Model model(ops, problem.kind, config.penalty);
  std::optional<HelmholtzFilter> filter;
  double lambda = config.lambda;
  int phase = 0;
  BoundStatus warm;

  auto finish = [&](const Evaluation& ev) {
    summary.iterations = static_cast<int>(out.history.size());
    summary.structural = ev.structural;
    summary.R = ev.R;
    summary.V = ev.V;
    summary.J = ev.J;
    summary.Jtilde = ev.Jtilde;
    summary.lambda = lambda;
    summary.discreteness = discreteness(ops, out.z, config.delta_rho);
    summary.state_solves = model.state_solves();
    out.element_density = ev.state.element_density;
    if (!out.history.empty()) {
      summary.E1 = out.history.back().E1;
      summary.E2 = out.history.back().E2;
    }
  };

  Evaluation ev;
  try {
    if (alg == Algorithm::sensfilter) {
      const double r =
          config.filter_radius > 0.0 ? config.filter_radius : 2.0 * problem.mesh.element_size;
      filter.emplace(problem.mesh, r);
    }
    ev = model.evaluate(out.z, lambda);
    if (!std::isfinite(ev.Jtilde)) {
      throw std::runtime_error("objective is not finite at the initial density");
    }
  } catch (const std::exception& e) {
    summary.status = RunStatus::numerical_failure;
    summary.failure = e.what();
    summary.state_solves = model.state_solves();
    return out;
  }

  summary.status = RunStatus::iteration_cap;
  for (int n = 1; n <= config.max_iter; ++n) {
    IterationRecord rec;
    rec.n = n;
    rec.lambda = lambda;
    rec.phase = phase;
    try {
      const double floor =
          config.hessian_floor > 0.0 ? config.hessian_floor : default_hessian_floor(ops, lambda);
      const double alpha = config.alpha > 0.0 ? config.alpha : default_alpha(ops, lambda);
      const Bounds bounds = move_bounds(out.z, config.move_limit, config.delta_rho);
      VectorXd h;
      if (alg == Algorithm::fbs || alg == Algorithm::tmp) {
        h = hessian_model(ops, config.hessian, out.z, ev.state.energy, floor, alpha).diag;
      }
      ActiveSet active;
      if (alg == Algorithm::tmp) {
        active = tmp_active_set(out.z, ev.grad_Jtilde, config.delta_rho, config.active_epsilon);
      }

      auto make_step = [&](double tau) -> StepResult {
        switch (alg) {
          case Algorithm::fbs:
            return fbs_step(ops, out.z, h, tau, ev.grad_Jtilde, bounds, config.qp_tolerance,
                            warm.empty() ? nullptr : &warm);
          case Algorithm::tmp:
            return tmp_step(ops, out.z, h, tau, ev.grad_Jtilde, bounds, active);
          case Algorithm::gp:
            return gp_step(out.z, tau, alpha, ev.grad_Jtilde, config.delta_rho);
          case Algorithm::oc:
            return oc_step(ops, problem.kind, out.z, ev.state.energy, lambda, bounds);
          case Algorithm::sensfilter:
            return sensfilter_step(ops, problem.kind, out.z, ev.state.energy, lambda, *filter,
                                   bounds);
        }
        throw std::logic_error("unknown algorithm");
      };

      std::vector<StepResult> steps;
      std::vector<Evaluation> evals;
      auto trial = [&](double tau) -> std::pair<double, double> {
        steps.push_back(make_step(tau));
        evals.push_back(model.evaluate(steps.back().candidate, lambda));
        return {evals.back().Jtilde, steps.back().descent};
      };

      std::size_t accepted = 0;
      if (oc_type || !config.backtracking) {
        trial(config.tau0);
        rec.tau = oc_type ? 0.0 : config.tau0;
      } else {
        const BacktrackResult bt = backtrack(trial, ev.Jtilde, config.tau0, config.sigma,
                                             config.nu, config.max_backtracks);
        accepted = bt.accepted;
        rec.tau = bt.tau;
        rec.backtracks = bt.backtracks;
        rec.backtracks_exhausted = bt.exhausted;
        summary.exhausted_backtracks += bt.exhausted ? 1 : 0;
      }
      summary.total_backtracks += rec.backtracks;
      for (const StepResult& s : steps) {
        summary.qp_fallbacks += s.qp_fallback ? 1 : 0;
        summary.negative_filter_flags += s.negative_filtered ? 1 : 0;
      }

      const bool moved = accepted < steps.size();
      VectorXd z_next = moved ? steps[accepted].candidate : out.z;
      Evaluation ev_next = moved ? std::move(evals[accepted]) : ev;
      if (!std::isfinite(ev_next.Jtilde)) {
        throw std::runtime_error("objective is not finite at iteration " + std::to_string(n));
      }
      if (moved && alg == Algorithm::fbs) {
        warm = steps[accepted].qp_status;
      }
      if (moved && (alg == Algorithm::fbs || alg == Algorithm::tmp)) {
        const VectorXd dz = z_next - out.z;
        const double model_value = ev.J + ev.grad_J.dot(dz) +
                                   0.5 / rec.tau * dz.dot(h.cwiseProduct(dz));
        rec.majorized = ev_next.J <= model_value + 1e-12 * std::abs(ev.J);
      }

      const Convergence conv = convergence(z_next, ev_next.grad_Jtilde, ev.Jtilde, ev_next.Jtilde,
                                           config.eps1, config.eps2, clamp_lower);
      rec.E1 = conv.E1;
      rec.E2 = conv.E2;
      rec.max_change = (z_next - out.z).cwiseAbs().maxCoeff();
      rec.structural = ev_next.structural;
      rec.J = ev_next.J;
      rec.R = ev_next.R;
      rec.V = ev_next.V;
      rec.Jtilde = ev_next.Jtilde;
      rec.active = alg == Algorithm::tmp ? active.size() : count_at_bounds(z_next, config.delta_rho);

      bool converged = conv.converged;
      if (oc_type) {
        const double zn = out.z.norm();
        const double rel = zn > 0.0 ? (z_next - out.z).norm() / zn : 0.0;
        converged = conv.E1 <= config.eps1 && rel <= config.eps2;
      }

      out.z = std::move(z_next);
      ev = std::move(ev_next);
      out.history.push_back(rec);

      if (config.lambda_after_negative && phase == 0 && ev.J < 0.0) {
        lambda = *config.lambda_after_negative;
        ++phase;
        warm.clear();
        ev = model.evaluate(out.z, lambda);
        continue;
      }
      if (converged) {
        summary.status = RunStatus::converged;
        break;
      }
    } catch (const std::exception& e) {
      summary.status = RunStatus::numerical_failure;
      summary.failure = e.what();
      break;
    }
  }
  finish(ev);
  return out;
}

}  // namespace topopt
