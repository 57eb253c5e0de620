#include <algorithm>
#include <cmath>

#include "topopt/kernels.hpp"

namespace topopt::kernels {
namespace {

void element_density(const double* z, const std::int32_t* conn, std::size_t n_elem,
                     double* out) {
  for (std::size_t e = 0; e < n_elem; ++e) {
    const std::int32_t* c = conn + 4 * e;
    out[e] = 0.25 * (((z[c[0]] + z[c[1]]) + z[c[2]]) + z[c[3]]);
  }
}

void element_energy(const double* u, const double* w, const std::int32_t* dofs,
                    const double* k, const double* scale, std::size_t n_elem, double* out) {
  for (std::size_t e = 0; e < n_elem; ++e) {
    const std::int32_t* d = dofs + 8 * e;
    double ue[8];
    double we[8];
    for (int r = 0; r < 8; ++r) {
      ue[r] = u[d[r]];
      we[r] = w[d[r]];
    }
    double acc = 0.0;
    for (int r = 0; r < 8; ++r) {
      double kw = 0.0;
      for (int c = 0; c < 8; ++c) {
        kw += k[8 * r + c] * we[c];
      }
      acc += ue[r] * kw;
    }
    out[e] = scale[e] * acc;
  }
}

void clamp(const double* x, const double* lo, const double* hi, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::min(std::max(lo[i], x[i]), hi[i]);
  }
}

void reciprocal_diag(const double* g, const double* z, double floor, bool absolute,
                     std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    double h = 2.0 * g[i] / z[i];
    if (absolute) {
      h = std::fabs(h);
    }
    out[i] = std::max(h, floor);
  }
}

double discreteness_sum(const double* rho, double delta, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += 4.0 * (rho[i] - delta) * (1.0 - rho[i]);
  }
  return sum;
}

double projected_residual_sq(const double* z, const double* g, double lo, double hi,
                             std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::min(std::max(lo, z[i] - g[i]), hi) - z[i];
    sum += r * r;
  }
  return sum;
}

}  // namespace

namespace detail {
const KernelTable scalar_table{Backend::scalar,  element_density,  element_energy,       clamp,
                               reciprocal_diag, discreteness_sum, projected_residual_sq};
}  // namespace detail

}  // namespace topopt::kernels
