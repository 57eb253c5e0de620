#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace topopt {

/// Structured grid of bilinear quadrilaterals on [0, nx*a] x [0, ny*a].
///
/// Nodes are numbered column-major, bottom-to-top: node (i, j) with
/// 0 <= i <= nx, 0 <= j <= ny has index i*(ny+1) + j. Elements follow the
/// same convention, element (i, j) has index i*ny + j, and its four nodes
/// are listed counterclockwise starting at the lower-left corner.
struct Mesh {
  int nx = 0;
  int ny = 0;
  double element_size = 0.0;
  std::vector<std::array<double, 2>> nodes;
  std::vector<std::array<int, 4>> elements;
  std::vector<std::array<double, 2>> centroids;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t element_count() const { return elements.size(); }
  int node_index(int i, int j) const { return i * (ny + 1) + j; }
  int element_index(int i, int j) const { return i * ny + j; }
  double element_area() const { return element_size * element_size; }
  double area() const { return static_cast<double>(nx) * ny * element_area(); }
};

inline int dof_x(int node) { return 2 * node; }
inline int dof_y(int node) { return 2 * node + 1; }

struct PointLoad {
  int dof;
  double magnitude;
};

/// Grounded linear spring acting on a single displacement dof.
struct Spring {
  int dof;
  double stiffness;
};

struct OutputWeight {
  int dof;
  double weight;
};

struct BoundaryConditions {
  std::vector<int> fixed_dofs;  // sorted, unique
  std::vector<PointLoad> loads;
  std::vector<Spring> springs;
  std::vector<OutputWeight> outputs;
};

enum class ProblemKind { compliance, mechanism };

/// A meshed benchmark: geometry, supports and the objective it is posed for.
struct Benchmark {
  Mesh mesh;
  BoundaryConditions bc;
  ProblemKind kind = ProblemKind::compliance;
  /// Area of the full (unreduced) design domain; the meshed part is
  /// mesh.area(), the remainder follows from symmetry.
  double extended_area = 0.0;
};

Mesh build_grid(int nx, int ny, double element_size);

/// Half MBB beam of nx x ny elements with element size 1/ny. Symmetry
/// rollers on the left edge, vertical roller at the bottom-right corner,
/// downward load of the given magnitude at the top-left corner.
Benchmark mbb_problem(int nx, int ny, double load = 1.0);

/// Force inverter on a square design domain of nx x ny elements (side 1).
/// Only the top half (nx x ny/2 elements) is meshed; the bottom edge of the
/// mesh is the symmetry line. Input spring and unit force act horizontally
/// at the left end of the symmetry line, the output spring and output
/// functional at the right end; the top two nodes of the left edge are
/// clamped.
Benchmark inverter_problem(int nx, int ny, double k_in, double k_out);

}  // namespace topopt
