#include "topopt/assemble.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "topopt/kernels.hpp"

namespace topopt {

namespace {

using Triplet = Eigen::Triplet<double>;

// Exact integrals over the unit square, counterclockwise nodes from the
// lower-left corner: k_e = E / (24 (1 - nu^2)) (A + nu B).
constexpr int kStiffA[8][8] = {
    {12, 3, -6, -3, -6, -3, 0, 3},  {3, 12, 3, 0, -3, -6, -3, -6},
    {-6, 3, 12, -3, 0, -3, -6, 3},  {-3, 0, -3, 12, 3, -6, 3, -6},
    {-6, -3, 0, 3, 12, 3, -6, -3},  {-3, -6, -3, -6, 3, 12, 3, 0},
    {0, -3, -6, 3, -6, 3, 12, -3},  {3, -6, 3, -6, -3, 0, -3, 12}};
constexpr int kStiffB[8][8] = {
    {-4, 3, -2, 9, 2, -3, 4, -9},  {3, -4, -9, 4, -3, 2, 9, -2},
    {-2, -9, -4, -3, 4, 9, 2, 3},  {9, 4, -3, -4, -9, -2, 3, 2},
    {2, -3, 4, -9, -4, 3, -2, 9},  {-3, 2, 9, -2, 3, -4, -9, 4},
    {4, 9, 2, 3, -2, -9, -4, -3},  {-9, -2, 3, 2, 9, 4, -3, -4}};

// Scalar Laplacian (times 6) and mass (times 36 / a^2) on a square element.
constexpr int kLaplace6[4][4] = {{4, -1, -2, -1}, {-1, 4, -1, -2}, {-2, -1, 4, -1}, {-1, -2, -1, 4}};
constexpr int kMass36[4][4] = {{4, 2, 1, 2}, {2, 4, 2, 1}, {1, 2, 4, 2}, {2, 1, 2, 4}};

SparseMatrix nodal_operator(const Mesh& mesh, const int (&pattern)[4][4], double factor) {
  std::vector<Triplet> triplets;
  triplets.reserve(16 * mesh.element_count());
  for (const auto& quad : mesh.elements) {
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        triplets.emplace_back(quad[r], quad[c], factor * pattern[r][c]);
      }
    }
  }
  const auto m = static_cast<Eigen::Index>(mesh.node_count());
  SparseMatrix out(m, m);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

int value_slot(const SparseMatrix& a, int row, int col) {
  const int* begin = a.innerIndexPtr() + a.outerIndexPtr()[col];
  const int* end = a.innerIndexPtr() + a.outerIndexPtr()[col + 1];
  const int* it = std::lower_bound(begin, end, row);
  if (it == end || *it != row) {
    throw std::logic_error("stiffness pattern is missing an entry");
  }
  return static_cast<int>(it - a.innerIndexPtr());
}

}  // namespace

Matrix8d element_stiffness(double element_size, double youngs_modulus, double poisson_ratio) {
  if (!(element_size > 0.0)) {
    throw std::invalid_argument("element_stiffness: element size must be positive");
  }
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
    throw std::invalid_argument("element_stiffness: Poisson ratio must lie in [0, 0.5), got " +
                                std::to_string(poisson_ratio));
  }
  const double factor = youngs_modulus / (24.0 * (1.0 - poisson_ratio * poisson_ratio));
  Matrix8d ke;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      ke(r, c) = factor * (kStiffA[r][c] + poisson_ratio * kStiffB[r][c]);
    }
  }
  return ke;
}

SparseMatrix nodal_mass_matrix(const Mesh& mesh) {
  return nodal_operator(mesh, kMass36, mesh.element_area() / 36.0);
}

SparseMatrix nodal_laplacian(const Mesh& mesh) { return nodal_operator(mesh, kLaplace6, 1.0 / 6.0); }

AssembledOperators assemble_operators(const Mesh& mesh, const BoundaryConditions& bc,
                                      double beta, const Material& material) {
  if (!(beta >= 0.0)) {
    throw std::invalid_argument("assemble_operators: beta must be non-negative");
  }
  AssembledOperators ops;
  ops.node_count = static_cast<int>(mesh.node_count());
  ops.element_count = static_cast<int>(mesh.element_count());
  ops.element_area = mesh.element_area();
  ops.meshed_area = mesh.area();
  ops.ke = element_stiffness(mesh.element_size, material.youngs_modulus, material.poisson_ratio);

  const int m = ops.node_count;
  const int l = ops.element_count;
  const int ndof = 2 * m;

  // Dirichlet elimination.
  ops.free_dof_map.assign(ndof, 0);
  for (int d : bc.fixed_dofs) {
    if (d < 0 || d >= ndof) {
      throw std::out_of_range("assemble_operators: fixed dof " + std::to_string(d) + " out of range");
    }
    ops.free_dof_map[d] = -1;
  }
  int next = 0;
  for (int d = 0; d < ndof; ++d) {
    if (ops.free_dof_map[d] == 0) {
      ops.free_dof_map[d] = next++;
    }
  }
  ops.free_dof_count = next;
  const int nfree = next;

  auto free_index = [&](int dof, const char* what) {
    const int f = ops.free_dof_map.at(dof);
    if (f < 0) {
      throw std::invalid_argument(std::string("assemble_operators: ") + what + " on constrained dof " +
                                  std::to_string(dof));
    }
    return f;
  };

  ops.load = Eigen::VectorXd::Zero(nfree);
  for (const auto& f : bc.loads) {
    ops.load[free_index(f.dof, "load")] += f.magnitude;
  }
  ops.output = Eigen::VectorXd::Zero(nfree);
  ops.has_output = !bc.outputs.empty();
  for (const auto& o : bc.outputs) {
    ops.output[free_index(o.dof, "output weight")] += o.weight;
  }
  {
    std::vector<Triplet> triplets;
    for (const auto& s : bc.springs) {
      const int f = free_index(s.dof, "spring");
      triplets.emplace_back(f, f, s.stiffness);
    }
    ops.springs.resize(nfree, nfree);
    ops.springs.setFromTriplets(triplets.begin(), triplets.end());
  }

  // Element connectivity in node and free-dof numbering.
  ops.element_nodes.resize(4 * static_cast<std::size_t>(l));
  ops.element_dofs.resize(8 * static_cast<std::size_t>(l));
  for (int e = 0; e < l; ++e) {
    for (int a = 0; a < 4; ++a) {
      const int node = mesh.elements[e][a];
      ops.element_nodes[4 * e + a] = node;
      for (int comp = 0; comp < 2; ++comp) {
        const int f = ops.free_dof_map[2 * node + comp];
        ops.element_dofs[8 * e + 2 * a + comp] = f < 0 ? nfree : f;
      }
    }
  }

  // Centroid interpolation: every bilinear shape function is 1/4 there.
  {
    std::vector<Triplet> triplets;
    triplets.reserve(4 * static_cast<std::size_t>(l));
    for (int e = 0; e < l; ++e) {
      for (int a = 0; a < 4; ++a) {
        triplets.emplace_back(e, ops.element_nodes[4 * e + a], 0.25);
      }
    }
    ops.projection.resize(l, m);
    ops.projection.setFromTriplets(triplets.begin(), triplets.end());
  }

  ops.volume = Eigen::VectorXd::Zero(m);
  for (int e = 0; e < l; ++e) {
    for (int a = 0; a < 4; ++a) {
      ops.volume[ops.element_nodes[4 * e + a]] += 0.25 * ops.element_area;
    }
  }

  ops.tikhonov = beta * nodal_laplacian(mesh);

  // Stiffness pattern on free dofs.
  {
    std::vector<Triplet> triplets;
    triplets.reserve(64 * static_cast<std::size_t>(l) + bc.springs.size());
    for (int e = 0; e < l; ++e) {
      for (int r = 0; r < 8; ++r) {
        const int fr = ops.element_dofs[8 * e + r];
        if (fr == nfree) continue;
        for (int c = 0; c < 8; ++c) {
          const int fc = ops.element_dofs[8 * e + c];
          if (fc == nfree) continue;
          triplets.emplace_back(fr, fc, 0.0);
        }
      }
    }
    for (int d = 0; d < nfree; ++d) {
      triplets.emplace_back(d, d, 0.0);
    }
    ops.stiffness_pattern.resize(nfree, nfree);
    ops.stiffness_pattern.setFromTriplets(triplets.begin(), triplets.end());
    ops.stiffness_pattern.makeCompressed();

    ops.stiffness_slots.assign(64 * static_cast<std::size_t>(l), -1);
    for (int e = 0; e < l; ++e) {
      for (int r = 0; r < 8; ++r) {
        const int fr = ops.element_dofs[8 * e + r];
        if (fr == nfree) continue;
        for (int c = 0; c < 8; ++c) {
          const int fc = ops.element_dofs[8 * e + c];
          if (fc == nfree) continue;
          ops.stiffness_slots[64 * e + 8 * r + c] = value_slot(ops.stiffness_pattern, fr, fc);
        }
      }
    }
  }
  return ops;
}

Eigen::VectorXd element_densities(const AssembledOperators& ops, const Eigen::VectorXd& z) {
  if (z.size() != ops.node_count) {
    throw std::invalid_argument("element_densities: density vector has wrong size");
  }
  Eigen::VectorXd rho(ops.element_count);
  kernels::active().element_density(z.data(), ops.element_nodes.data(),
                                    static_cast<std::size_t>(ops.element_count), rho.data());
  return rho;
}

void assemble_system(const AssembledOperators& ops, const Eigen::VectorXd& coefficient,
                     bool with_springs, SparseMatrix& out) {
  if (coefficient.size() != ops.element_count) {
    throw std::invalid_argument("assemble_system: one coefficient per element expected");
  }
  if (out.rows() != ops.free_dof_count || out.nonZeros() != ops.stiffness_pattern.nonZeros()) {
    out = ops.stiffness_pattern;
  }
  double* values = out.valuePtr();
  std::fill(values, values + out.nonZeros(), 0.0);
  const double* ke = ops.ke.data();
  for (int e = 0; e < ops.element_count; ++e) {
    const double coef = coefficient[e];
    const int* slots = ops.stiffness_slots.data() + 64 * static_cast<std::size_t>(e);
    for (int k = 0; k < 64; ++k) {
      if (slots[k] >= 0) {
        values[slots[k]] += coef * ke[k];
      }
    }
  }
  if (with_springs) {
    for (int col = 0; col < ops.springs.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(ops.springs, col); it; ++it) {
        values[value_slot(out, static_cast<int>(it.row()), col)] += it.value();
      }
    }
  }
}

SparseMatrix assemble_stiffness(const AssembledOperators& ops, const Eigen::VectorXd& z,
                                double penalty) {
  const Eigen::VectorXd rho = element_densities(ops, z);
  Eigen::VectorXd coef(rho.size());
  for (Eigen::Index e = 0; e < rho.size(); ++e) {
    if (!(rho[e] > 0.0)) {
      throw std::domain_error("assemble_stiffness: non-positive element density " +
                              std::to_string(rho[e]) + " in element " + std::to_string(e));
    }
    coef[e] = std::pow(rho[e], penalty);
  }
  SparseMatrix k;
  assemble_system(ops, coef, false, k);
  return k;
}

namespace {

SparseMatrix helmholtz_lhs(const Mesh& mesh, double radius) {
  if (!(radius >= 0.0)) {
    throw std::invalid_argument("assemble_filter: radius must be non-negative");
  }
  return nodal_mass_matrix(mesh) + (radius * radius) * nodal_laplacian(mesh);
}

}  // namespace

HelmholtzFilter::HelmholtzFilter(const Mesh& mesh, double radius)
    : radius_(radius),
      mass_(nodal_mass_matrix(mesh)),
      lhs_(helmholtz_lhs(mesh, radius)),
      factorization_(lhs_) {}

Eigen::VectorXd HelmholtzFilter::apply(const Eigen::VectorXd& field) const {
  if (field.size() != mass_.rows()) {
    throw std::invalid_argument("HelmholtzFilter::apply: field has wrong size");
  }
  return factorization_.solve(mass_ * field);
}

HelmholtzFilter assemble_filter(const Mesh& mesh, double radius) {
  return HelmholtzFilter(mesh, radius);
}

}  // namespace topopt
