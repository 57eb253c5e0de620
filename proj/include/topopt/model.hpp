#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "topopt/assemble.hpp"
#include "topopt/grid.hpp"
#include "topopt/solve.hpp"

namespace topopt {

struct StateSolution {
  Eigen::VectorXd element_density;  // P z
  Eigen::VectorXd displacement;     // U on the free dofs
  Eigen::VectorXd adjoint;          // mechanism only
  /// Compliance: E_e = p rho_e^(p-1) U^T k_e U (non-negative).
  /// Mechanism:  Ebar_e = p rho_e^(p-1) Ubar^T k_e U.
  Eigen::VectorXd energy;
  /// F^T U for compliance, -L^T U for the mechanism.
  double structural = 0.0;
  std::uint64_t solve_id = 0;
};

/// Objective terms and gradients at one density vector.
struct Evaluation {
  StateSolution state;
  double lambda = 0.0;
  double structural = 0.0;   // l(u)
  double volume_term = 0.0;  // lambda z^T v
  double J = 0.0;            // structural + volume_term
  double R = 0.0;            // 1/2 z^T G z
  double Jtilde = 0.0;       // J + R
  double V = 0.0;            // volume fraction of the meshed domain
  Eigen::VectorXd grad_J;
  Eigen::VectorXd grad_Jtilde;
};

/// Evaluates the state, adjoint and objective for one problem. The symbolic
/// factorization of the stiffness matrix is computed once and reused, so a
/// Model is not meant to be shared between threads.
class Model {
 public:
  Model(const AssembledOperators& ops, ProblemKind kind, double penalty);

  StateSolution solve_state(const Eigen::VectorXd& z);
  /// Solves [K(z) + K_s] Ubar = L, reusing the factorization of `state`.
  Eigen::VectorXd solve_adjoint(const StateSolution& state);
  Evaluation evaluate(const Eigen::VectorXd& z, double lambda);

  const AssembledOperators& operators() const { return *ops_; }
  ProblemKind kind() const { return kind_; }
  double penalty() const { return penalty_; }
  std::uint64_t state_solves() const { return solves_; }

 private:
  void factor_at(const Eigen::VectorXd& element_density);
  Eigen::VectorXd element_energy(const Eigen::VectorXd& element_density,
                                 const Eigen::VectorXd& left, const Eigen::VectorXd& right) const;

  const AssembledOperators* ops_;
  ProblemKind kind_;
  double penalty_;
  SparseMatrix system_;
  std::optional<Factorization> factorization_;
  std::uint64_t solves_ = 0;
  std::uint64_t factored_id_ = 0;
};

StateSolution solve_state(const AssembledOperators& ops, const Eigen::VectorXd& z, double penalty,
                          ProblemKind kind);
Eigen::VectorXd solve_adjoint(const AssembledOperators& ops, const Eigen::VectorXd& z,
                              double penalty, const StateSolution& state);
Evaluation objective_and_gradient(const AssembledOperators& ops, const Eigen::VectorXd& z,
                                  double penalty, double lambda, ProblemKind kind);

enum class HessianKind { identity, reciprocal, reciprocal_absolute };

struct HessianModel {
  HessianKind kind = HessianKind::identity;
  Eigen::VectorXd diag;  // entries h_k, all >= the floor
};

/// Diagonal curvature model. identity: alpha everywhere; reciprocal:
/// max(2 [P^T E]_k / z_k, floor); reciprocal_absolute: max(|2 [P^T E]_k / z_k|, floor).
HessianModel hessian_model(const AssembledOperators& ops, HessianKind kind,
                           const Eigen::VectorXd& z, const Eigen::VectorXd& energy, double floor,
                           double alpha);

/// Measure of non-discreteness in percent: 100 / |Omega| * sum_e A 4 (rho_e - delta)(1 - rho_e).
double discreteness(const AssembledOperators& ops, const Eigen::VectorXd& z, double delta_rho);

}  // namespace topopt
