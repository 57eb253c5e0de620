#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "topopt/assemble.hpp"
#include "topopt/grid.hpp"
#include "topopt/kernels.hpp"
#include "topopt/optim.hpp"

using namespace topopt;
using kernels::Backend;

namespace {

std::vector<double> random_vector(std::size_t n, double lo, double hi, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double rel_diff(double a, double b) {
  const double s = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / s;
}

struct BackendGuard {
  Backend previous;
  explicit BackendGuard(Backend b) : previous(kernels::active().backend) { kernels::select(b); }
  ~BackendGuard() { kernels::select(previous); }
};

}  // namespace

TEST_CASE("scalar backend is always available and selectable") {
  CHECK(kernels::available(Backend::scalar));
  CHECK(kernels::table(Backend::scalar).backend == Backend::scalar);
  CHECK(kernels::name(Backend::scalar) == "scalar");
  CHECK(kernels::name(Backend::avx2) == "avx2");
  const BackendGuard guard(Backend::scalar);
  CHECK(kernels::active().backend == Backend::scalar);
}

TEST_CASE("scalar reference kernels on hand inputs") {
  const auto& k = kernels::table(Backend::scalar);
  const double z[4] = {0.2, 0.4, 0.6, 1.0};
  const std::int32_t conn[4] = {0, 1, 2, 3};
  double rho = 0.0;
  k.element_density(z, conn, 1, &rho);
  CHECK(rho == doctest::Approx(0.55));

  const double x[3] = {-1.0, 0.5, 2.0};
  const double lo[3] = {0.0, 0.0, 0.0};
  const double hi[3] = {1.0, 1.0, 1.0};
  double c[3];
  k.clamp(x, lo, hi, 3, c);
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 0.5);
  CHECK(c[2] == 1.0);

  const double g[3] = {1.0, -3.0, 0.0};
  const double zz[3] = {0.5, 0.5, 1.0};
  double h[3];
  k.reciprocal_diag(g, zz, 0.1, false, 3, h);
  CHECK(h[0] == doctest::Approx(4.0));
  CHECK(h[1] == doctest::Approx(0.1));
  CHECK(h[2] == doctest::Approx(0.1));
  k.reciprocal_diag(g, zz, 0.1, true, 3, h);
  CHECK(h[1] == doctest::Approx(12.0));

  const double r[2] = {1.0, 0.5};
  CHECK(k.discreteness_sum(r, 0.0, 2) == doctest::Approx(1.0));

  const double zr[2] = {0.5, 0.5};
  const double gr[2] = {0.1, -0.1};
  CHECK(k.projected_residual_sq(zr, gr, 0.0, 1.0, 2) == doctest::Approx(0.02));
}

TEST_CASE("avx2 kernels match the scalar reference") {
  if (!kernels::available(Backend::avx2)) {
    MESSAGE("avx2 not available; equivalence not exercised");
    return;
  }
  const auto& s = kernels::table(Backend::scalar);
  const auto& v = kernels::table(Backend::avx2);
  CHECK(v.backend == Backend::avx2);
  std::mt19937 rng(2024);

  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 13u, 64u, 101u}) {
    CAPTURE(n);
    // element densities over a real mesh connectivity
    const std::size_t nx = std::max<std::size_t>(n, 1);
    const Mesh mesh = build_grid(static_cast<int>(nx), 2, 0.1);
    std::vector<std::int32_t> conn;
    for (const auto& q : mesh.elements)
      for (int node : q) conn.push_back(node);
    const auto z = random_vector(mesh.node_count(), 1e-3, 1.0, rng);
    const std::size_t ne = std::min(n, mesh.element_count());
    std::vector<double> a(ne + 1, -1.0), b(ne + 1, -1.0);
    s.element_density(z.data(), conn.data(), ne, a.data());
    v.element_density(z.data(), conn.data(), ne, b.data());
    for (std::size_t e = 0; e <= ne; ++e) CHECK(rel_diff(a[e], b[e]) <= 1e-15);

    // element energies
    const Matrix8d ke = element_stiffness(0.1, 1.0, 0.3);
    const std::size_t ndof = 40;
    std::vector<std::int32_t> dofs(8 * n);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(ndof));
    for (auto& d : dofs) d = pick(rng);
    auto u = random_vector(ndof + 1, -1.0, 1.0, rng);
    auto w = random_vector(ndof + 1, -1.0, 1.0, rng);
    u[ndof] = 0.0;
    w[ndof] = 0.0;
    const auto scale = random_vector(n, 0.0, 3.0, rng);
    std::vector<double> ea(n), eb(n);
    s.element_energy(u.data(), w.data(), dofs.data(), ke.data(), scale.data(), n, ea.data());
    v.element_energy(u.data(), w.data(), dofs.data(), ke.data(), scale.data(), n, eb.data());
    for (std::size_t e = 0; e < n; ++e) {
      CHECK(std::abs(ea[e] - eb[e]) <= 1e-13 * (1.0 + std::abs(ea[e])));
    }

    // clamp is exact
    const auto x = random_vector(n, -1.0, 2.0, rng);
    const auto lo = random_vector(n, -0.5, 0.3, rng);
    const auto hi = random_vector(n, 0.6, 1.5, rng);
    std::vector<double> ca(n), cb(n);
    s.clamp(x.data(), lo.data(), hi.data(), n, ca.data());
    v.clamp(x.data(), lo.data(), hi.data(), n, cb.data());
    CHECK(ca == cb);

    // reciprocal diagonal
    const auto g = random_vector(n, -2.0, 2.0, rng);
    const auto zz = random_vector(n, 1e-3, 1.0, rng);
    for (bool absolute : {false, true}) {
      std::vector<double> ha(n), hb(n);
      s.reciprocal_diag(g.data(), zz.data(), 0.05, absolute, n, ha.data());
      v.reciprocal_diag(g.data(), zz.data(), 0.05, absolute, n, hb.data());
      for (std::size_t k = 0; k < n; ++k) CHECK(rel_diff(ha[k], hb[k]) <= 1e-15);
    }

    // reductions
    const auto rho = random_vector(n, 1e-3, 1.0, rng);
    CHECK(rel_diff(s.discreteness_sum(rho.data(), 1e-3, n), v.discreteness_sum(rho.data(), 1e-3, n)) <=
          1e-13);
    CHECK(rel_diff(s.projected_residual_sq(zz.data(), g.data(), 0.0, 1.0, n),
                   v.projected_residual_sq(zz.data(), g.data(), 0.0, 1.0, n)) <= 1e-13);
  }
}

TEST_CASE("optimizer runs agree across backends") {
  if (!kernels::available(Backend::avx2)) {
    MESSAGE("avx2 not available; equivalence not exercised");
    return;
  }
  const Benchmark b = mbb_problem(24, 8);
  const AssembledOperators ops = assemble_operators(b.mesh, b.bc, 0.06);
  OptimizerConfig cfg;
  cfg.lambda = 200.0 / b.extended_area;
  cfg.max_iter = 60;
  RunResult rs, rv;
  {
    const BackendGuard guard(Backend::scalar);
    rs = run(b, ops, cfg);
  }
  {
    const BackendGuard guard(Backend::avx2);
    rv = run(b, ops, cfg);
  }
  REQUIRE(rs.history.size() == rv.history.size());
  CHECK(rel_diff(rs.summary.Jtilde, rv.summary.Jtilde) <= 1e-9);
  CHECK((rs.z - rv.z).cwiseAbs().maxCoeff() <= 1e-7);
}
