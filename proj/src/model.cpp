#include "topopt/model.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <string>

#include "topopt/kernels.hpp"

namespace topopt {

namespace {

Eigen::VectorXd padded(const Eigen::VectorXd& x) {
  Eigen::VectorXd out(x.size() + 1);
  out.head(x.size()) = x;
  out[x.size()] = 0.0;
  return out;
}

// Unique across models so a state is never matched to a foreign factorization.
std::uint64_t next_solve_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace

Model::Model(const AssembledOperators& ops, ProblemKind kind, double penalty)
    : ops_(&ops), kind_(kind), penalty_(penalty) {
  if (!(penalty >= 1.0)) {
    throw std::invalid_argument("Model: SIMP exponent must be at least 1");
  }
  if (kind == ProblemKind::mechanism && !ops.has_output) {
    throw std::invalid_argument("Model: mechanism problem needs an output functional");
  }
}

void Model::factor_at(const Eigen::VectorXd& element_density) {
  Eigen::VectorXd coef(element_density.size());
  for (Eigen::Index e = 0; e < coef.size(); ++e) {
    const double rho = element_density[e];
    if (!(rho > 0.0)) {
      throw std::domain_error("element density " + std::to_string(rho) + " in element " +
                              std::to_string(e) + " is not positive");
    }
    coef[e] = std::pow(rho, penalty_);
  }
  assemble_system(*ops_, coef, true, system_);
  if (factorization_) {
    factorization_->refactorize(system_);
  } else {
    factorization_.emplace(system_);
  }
}

Eigen::VectorXd Model::element_energy(const Eigen::VectorXd& element_density,
                                      const Eigen::VectorXd& left,
                                      const Eigen::VectorXd& right) const {
  const auto l = static_cast<std::size_t>(ops_->element_count);
  Eigen::VectorXd scale(element_density.size());
  for (Eigen::Index e = 0; e < scale.size(); ++e) {
    scale[e] = penalty_ * std::pow(element_density[e], penalty_ - 1.0);
  }
  const Eigen::VectorXd lp = padded(left);
  const Eigen::VectorXd rp = padded(right);
  Eigen::VectorXd out(scale.size());
  kernels::active().element_energy(lp.data(), rp.data(), ops_->element_dofs.data(),
                                   ops_->ke.data(), scale.data(), l, out.data());
  return out;
}

StateSolution Model::solve_state(const Eigen::VectorXd& z) {
  StateSolution state;
  state.element_density = element_densities(*ops_, z);
  factor_at(state.element_density);
  ++solves_;
  state.solve_id = next_solve_id();
  factored_id_ = state.solve_id;

  state.displacement = factorization_->solve(ops_->load);
  if (kind_ == ProblemKind::compliance) {
    state.structural = ops_->load.dot(state.displacement);
    state.energy = element_energy(state.element_density, state.displacement, state.displacement);
  } else {
    state.adjoint = factorization_->solve(ops_->output);
    state.structural = -ops_->output.dot(state.displacement);
    state.energy = element_energy(state.element_density, state.adjoint, state.displacement);
  }
  return state;
}

Eigen::VectorXd Model::solve_adjoint(const StateSolution& state) {
  if (!ops_->has_output) {
    throw std::logic_error("solve_adjoint: problem has no output functional");
  }
  if (!factorization_ || factored_id_ != state.solve_id) {
    factor_at(state.element_density);
    factored_id_ = state.solve_id;
  }
  return factorization_->solve(ops_->output);
}

Evaluation Model::evaluate(const Eigen::VectorXd& z, double lambda) {
  Evaluation ev;
  ev.state = solve_state(z);
  ev.lambda = lambda;
  ev.structural = ev.state.structural;
  ev.volume_term = lambda * z.dot(ops_->volume);
  ev.J = ev.structural + ev.volume_term;

  const Eigen::VectorXd gz = ops_->tikhonov * z;
  ev.R = 0.5 * z.dot(gz);
  ev.Jtilde = ev.J + ev.R;
  ev.V = ev.state.element_density.sum() * ops_->element_area / ops_->meshed_area;

  // d(F^T U)/dz = -P^T E; d(-L^T U)/dz = +P^T Ebar with [K + K_s] Ubar = L.
  const Eigen::VectorXd pte = ops_->projection.transpose() * ev.state.energy;
  const double sign = kind_ == ProblemKind::compliance ? -1.0 : 1.0;
  ev.grad_J = sign * pte + lambda * ops_->volume;
  ev.grad_Jtilde = ev.grad_J + gz;
  return ev;
}

StateSolution solve_state(const AssembledOperators& ops, const Eigen::VectorXd& z, double penalty,
                          ProblemKind kind) {
  Model model(ops, kind, penalty);
  return model.solve_state(z);
}

Eigen::VectorXd solve_adjoint(const AssembledOperators& ops, const Eigen::VectorXd& z,
                              double penalty, const StateSolution& state) {
  Model model(ops, ProblemKind::mechanism, penalty);
  StateSolution local = state;
  if (local.element_density.size() == 0) {
    local.element_density = element_densities(ops, z);
  }
  return model.solve_adjoint(local);
}

Evaluation objective_and_gradient(const AssembledOperators& ops, const Eigen::VectorXd& z,
                                  double penalty, double lambda, ProblemKind kind) {
  Model model(ops, kind, penalty);
  return model.evaluate(z, lambda);
}

HessianModel hessian_model(const AssembledOperators& ops, HessianKind kind,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& energy, double floor,
                           double alpha) {
  HessianModel h;
  h.kind = kind;
  const auto m = static_cast<Eigen::Index>(ops.node_count);
  if (kind == HessianKind::identity) {
    if (!(alpha > 0.0)) {
      throw std::invalid_argument("hessian_model: alpha must be positive");
    }
    h.diag = Eigen::VectorXd::Constant(m, alpha);
    return h;
  }
  if (!(floor > 0.0)) {
    throw std::invalid_argument("hessian_model: floor must be positive");
  }
  const Eigen::VectorXd pte = ops.projection.transpose() * energy;
  h.diag.resize(m);
  kernels::active().reciprocal_diag(pte.data(), z.data(), floor,
                                    kind == HessianKind::reciprocal_absolute,
                                    static_cast<std::size_t>(m), h.diag.data());
  return h;
}

double discreteness(const AssembledOperators& ops, const Eigen::VectorXd& z, double delta_rho) {
  const Eigen::VectorXd rho = element_densities(ops, z);
  const double sum = kernels::active().discreteness_sum(rho.data(), delta_rho,
                                                        static_cast<std::size_t>(rho.size()));
  return 100.0 * ops.element_area * sum / ops.meshed_area;
}

}  // namespace topopt
