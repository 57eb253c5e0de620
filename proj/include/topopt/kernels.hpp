#pragma once

// Data-parallel inner loops over elements and nodes. Every kernel has a
// portable scalar reference implementation; an AVX2/FMA variant is compiled
// into a separate translation unit and picked at runtime when the CPU
// supports it. The two are checked against each other in the test suite.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace topopt::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
  Backend backend;

  /// out[e] = (z[c0] + z[c1] + z[c2] + z[c3]) / 4 with c = conn[4e .. 4e+3].
  void (*element_density)(const double* z, const std::int32_t* conn, std::size_t n_elem,
                          double* out);

  /// out[e] = scale[e] * u_e^T K w_e, u_e and w_e gathered through the 8
  /// dof indices dofs[8e .. 8e+7]; K is 8x8 row-major. Callers map
  /// constrained dofs to a slot holding zero.
  void (*element_energy)(const double* u, const double* w, const std::int32_t* dofs,
                         const double* k, const double* scale, std::size_t n_elem,
                         double* out);

  /// out[i] = min(max(lo[i], x[i]), hi[i]).
  void (*clamp)(const double* x, const double* lo, const double* hi, std::size_t n,
                double* out);

  /// out[i] = max(2 g[i] / z[i], floor), or max(|2 g[i] / z[i]|, floor).
  void (*reciprocal_diag)(const double* g, const double* z, double floor, bool absolute,
                          std::size_t n, double* out);

  /// sum_i 4 (rho[i] - delta) (1 - rho[i]).
  double (*discreteness_sum)(const double* rho, double delta, std::size_t n);

  /// sum_i (min(max(lo, z[i] - g[i]), hi) - z[i])^2.
  double (*projected_residual_sq)(const double* z, const double* g, double lo, double hi,
                                  std::size_t n);
};

bool available(Backend backend);
const KernelTable& table(Backend backend);

/// Kernels used by the solver. Defaults to the best backend the CPU supports.
const KernelTable& active();
void select(Backend backend);
Backend detect_best();
std::string_view name(Backend backend);

namespace detail {
extern const KernelTable scalar_table;
#if defined(TOPOPT_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace topopt::kernels
