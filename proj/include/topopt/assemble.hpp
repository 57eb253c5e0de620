#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "topopt/grid.hpp"
#include "topopt/solve.hpp"

namespace topopt {

using Matrix8d = Eigen::Matrix<double, 8, 8, Eigen::RowMajor>;

struct Material {
  double youngs_modulus = 1.0;
  double poisson_ratio = 0.3;

  bool operator==(const Material&) const = default;
};

/// Plane-stress stiffness of a square bilinear element, dofs ordered
/// (x0, y0, x1, y1, x2, y2, x3, y3) over the counterclockwise nodes. The
/// result does not depend on the side length.
Matrix8d element_stiffness(double element_size, double youngs_modulus, double poisson_ratio);

/// Design-independent operators, built once per problem.
///
/// Displacements live on the free (unconstrained) dofs; constrained dofs are
/// eliminated. Densities are nodal, m = mesh.node_count().
struct AssembledOperators {
  int node_count = 0;
  int element_count = 0;
  int free_dof_count = 0;
  double element_area = 0.0;
  double meshed_area = 0.0;

  Matrix8d ke;
  SparseMatrix projection;  // l x m, [P]_ek = phi_k(x_e)
  SparseMatrix tikhonov;    // m x m, beta * int grad(phi_k) . grad(phi_l)
  Eigen::VectorXd volume;   // m, int phi_k
  SparseMatrix springs;     // free x free
  Eigen::VectorXd load;     // free
  Eigen::VectorXd output;   // free, zero unless outputs were given
  bool has_output = false;

  std::vector<int> free_dof_map;             // full dof -> free index, -1 if fixed
  std::vector<std::int32_t> element_nodes;   // 4 per element
  std::vector<std::int32_t> element_dofs;    // 8 per element, fixed dofs -> free_dof_count

  // Stiffness sparsity pattern on the free dofs (both triangles) and, per
  // element, the 64 value slots its k_e entries accumulate into (-1 = fixed).
  SparseMatrix stiffness_pattern;
  std::vector<int> stiffness_slots;
};

AssembledOperators assemble_operators(const Mesh& mesh, const BoundaryConditions& bc,
                                      double beta, const Material& material = {});

/// Elemental (centroidal) densities P z.
Eigen::VectorXd element_densities(const AssembledOperators& ops, const Eigen::VectorXd& z);

/// K(z) = sum_e ([P z]_e)^p k_e on the free dofs. Springs are not included.
SparseMatrix assemble_stiffness(const AssembledOperators& ops, const Eigen::VectorXd& z,
                                double penalty);

/// Writes sum_e coefficient[e] k_e (+ springs) into a copy of the stored
/// pattern. The element summation order is fixed.
void assemble_system(const AssembledOperators& ops, const Eigen::VectorXd& coefficient,
                     bool with_springs, SparseMatrix& out);

/// Helmholtz filter (I - r^2 Laplacian)^-1 with homogeneous Neumann
/// conditions on nodal fields: solves (M + r^2 L) y = M x.
class HelmholtzFilter {
 public:
  HelmholtzFilter(const Mesh& mesh, double radius);

  Eigen::VectorXd apply(const Eigen::VectorXd& field) const;
  double radius() const { return radius_; }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& operator_matrix() const { return lhs_; }

 private:
  double radius_;
  SparseMatrix mass_;
  SparseMatrix lhs_;
  Factorization factorization_;
};

HelmholtzFilter assemble_filter(const Mesh& mesh, double radius);

/// Consistent mass and scalar Laplacian stiffness of the bilinear nodal space.
SparseMatrix nodal_mass_matrix(const Mesh& mesh);
SparseMatrix nodal_laplacian(const Mesh& mesh);

}  // namespace topopt
