#include "topopt/grid.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace topopt {

Mesh build_grid(int nx, int ny, double element_size) {
  if (nx < 1 || ny < 1) {
    throw std::invalid_argument("build_grid: element counts must be positive, got " +
                                std::to_string(nx) + "x" + std::to_string(ny));
  }
  if (!(element_size > 0.0)) {
    throw std::invalid_argument("build_grid: element size must be positive");
  }

  Mesh mesh;
  mesh.nx = nx;
  mesh.ny = ny;
  mesh.element_size = element_size;

  const std::size_t node_count = static_cast<std::size_t>(nx + 1) * (ny + 1);
  mesh.nodes.reserve(node_count);
  for (int i = 0; i <= nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      mesh.nodes.push_back({i * element_size, j * element_size});
    }
  }

  const std::size_t element_count = static_cast<std::size_t>(nx) * ny;
  mesh.elements.reserve(element_count);
  mesh.centroids.reserve(element_count);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const std::array<int, 4> quad{mesh.node_index(i, j), mesh.node_index(i + 1, j),
                                    mesh.node_index(i + 1, j + 1), mesh.node_index(i, j + 1)};
      mesh.elements.push_back(quad);
      double cx = 0.0;
      double cy = 0.0;
      for (int n : quad) {
        cx += mesh.nodes[n][0];
        cy += mesh.nodes[n][1];
      }
      mesh.centroids.push_back({0.25 * cx, 0.25 * cy});
    }
  }
  return mesh;
}

namespace {

void normalize(BoundaryConditions& bc) {
  std::sort(bc.fixed_dofs.begin(), bc.fixed_dofs.end());
  bc.fixed_dofs.erase(std::unique(bc.fixed_dofs.begin(), bc.fixed_dofs.end()),
                      bc.fixed_dofs.end());
}

}  // namespace

Benchmark mbb_problem(int nx, int ny, double load) {
  if (ny < 1) {
    throw std::invalid_argument("mbb_problem: ny must be positive");
  }
  Benchmark b;
  b.kind = ProblemKind::compliance;
  b.mesh = build_grid(nx, ny, 1.0 / ny);
  const Mesh& m = b.mesh;

  for (int j = 0; j <= ny; ++j) {
    b.bc.fixed_dofs.push_back(dof_x(m.node_index(0, j)));
  }
  b.bc.fixed_dofs.push_back(dof_y(m.node_index(nx, 0)));
  b.bc.loads.push_back({dof_y(m.node_index(0, ny)), -load});
  normalize(b.bc);

  b.extended_area = 2.0 * m.area();
  return b;
}

Benchmark inverter_problem(int nx, int ny, double k_in, double k_out) {
  if (ny < 2 || ny % 2 != 0) {
    throw std::invalid_argument("inverter_problem: ny must be even and at least 2");
  }
  if (!(k_in > 0.0) || !(k_out > 0.0)) {
    throw std::invalid_argument("inverter_problem: spring stiffnesses must be positive");
  }
  Benchmark b;
  b.kind = ProblemKind::mechanism;
  const int half = ny / 2;
  b.mesh = build_grid(nx, half, 1.0 / ny);
  const Mesh& m = b.mesh;

  for (int i = 0; i <= nx; ++i) {
    b.bc.fixed_dofs.push_back(dof_y(m.node_index(i, 0)));
  }
  // Keep the clamp off the input node on very coarse meshes.
  for (int j = half >= 2 ? half - 1 : half; j <= half; ++j) {
    b.bc.fixed_dofs.push_back(dof_x(m.node_index(0, j)));
    b.bc.fixed_dofs.push_back(dof_y(m.node_index(0, j)));
  }

  const int input = dof_x(m.node_index(0, 0));
  const int output = dof_x(m.node_index(nx, 0));
  b.bc.loads.push_back({input, 1.0});
  b.bc.springs.push_back({input, k_in});
  b.bc.springs.push_back({output, k_out});
  // The workpiece spring points against the input force; its stiffness
  // vector weights the output functional.
  b.bc.outputs.push_back({output, -k_out});
  normalize(b.bc);

  b.extended_area = static_cast<double>(nx) * ny * m.element_area();
  return b;
}

}  // namespace topopt
