// Acceptance suite: runs criteria 1 to 12 and prints one PASS/FAIL line each.
// Exit status is the number of failing binding criteria.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "topopt/assemble.hpp"
#include "topopt/config.hpp"
#include "topopt/driver.hpp"
#include "topopt/grid.hpp"
#include "topopt/model.hpp"
#include "topopt/optim.hpp"

using namespace topopt;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  bool binding = true;
  std::string detail;
};

RunConfig mbb_config(int nx, int ny, double beta) {
  RunConfig c = default_config(ProblemType::mbb);
  c.nx = nx;
  c.ny = ny;
  c.beta = beta;
  return c;
}

struct Solved {
  Case c;
  RunResult r;
};

Solved solve(const RunConfig& cfg) {
  Solved s{build_case(cfg), {}};
  s.r = run(s.c.problem, s.c.ops, s.c.optimizer);
  return s;
}

RunConfig with(RunConfig c, Algorithm a, HessianKind h, double tau0) {
  c.optimizer.algorithm = a;
  c.optimizer.hessian = h;
  c.optimizer.tau0 = tau0;
  return c;
}

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[1024];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

std::string describe(const char* label, const RunSummary& s) {
  return fmt("%s: %s it=%d bt=%d Jt=%.4f V=%.3f M=%.2f%%", label, to_string(s.status).c_str(),
             s.iterations, s.total_backtracks, s.Jtilde, s.V, s.discreteness);
}

Eigen::VectorXd random_interior(int m, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Eigen::VectorXd z(m);
  for (auto& v : z) v = u(rng);
  return z;
}

double worst_gradient_error(const AssembledOperators& ops, ProblemKind kind, double lambda,
                            int samples, std::mt19937& rng) {
  double worst = 0.0;
  const double h = 1e-6;
  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd z = random_interior(ops.node_count, rng);
    const Evaluation ev = objective_and_gradient(ops, z, 3.0, lambda, kind);
    Eigen::VectorXd fd(z.size());
    for (Eigen::Index k = 0; k < z.size(); ++k) {
      Eigen::VectorXd zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      fd[k] = (objective_and_gradient(ops, zp, 3.0, lambda, kind).Jtilde -
               objective_and_gradient(ops, zm, 3.0, lambda, kind).Jtilde) /
              (2 * h);
    }
    worst = std::max(worst, (ev.grad_Jtilde - fd).norm() / ev.grad_Jtilde.norm());
  }
  return worst;
}

// Connected components (4-neighbour) of elements with density below 0.5.
int void_components(const Eigen::VectorXd& rho, int nx, int ny) {
  std::vector<int> label(static_cast<std::size_t>(nx * ny), -1);
  auto is_void = [&](int i, int j) { return rho[static_cast<Eigen::Index>(i) * ny + j] < 0.5; };
  int count = 0;
  std::vector<std::pair<int, int>> stack;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      if (!is_void(i, j) || label[static_cast<std::size_t>(i * ny + j)] >= 0) continue;
      stack.push_back({i, j});
      label[static_cast<std::size_t>(i * ny + j)] = count;
      while (!stack.empty()) {
        const auto [a, b] = stack.back();
        stack.pop_back();
        const int nb[4][2] = {{a + 1, b}, {a - 1, b}, {a, b + 1}, {a, b - 1}};
        for (const auto& n : nb) {
          if (n[0] < 0 || n[0] >= nx || n[1] < 0 || n[1] >= ny) continue;
          const auto idx = static_cast<std::size_t>(n[0] * ny + n[1]);
          if (label[idx] < 0 && is_void(n[0], n[1])) {
            label[idx] = count;
            stack.push_back({n[0], n[1]});
          }
        }
      }
      ++count;
    }
  }
  return count;
}

// Elements with 0.1 < rho < 0.9 inside square windows of side ny/2 at the four domain corners.
int corner_intermediate(const Eigen::VectorXd& rho, int nx, int ny) {
  const int w = std::max(1, ny / 2);
  int count = 0;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const bool near_x = i < w || i >= nx - w;
      const bool near_y = j < w || j >= ny - w;
      if (!(near_x && near_y)) continue;
      const double r = rho[static_cast<Eigen::Index>(i) * ny + j];
      count += (r > 0.1 && r < 0.9) ? 1 : 0;
    }
  }
  return count;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::mt19937 rng(1);
  const Benchmark mbb = mbb_problem(6, 2);
  const AssembledOperators mops = assemble_operators(mbb.mesh, mbb.bc, 0.06);
  const double e_mbb = worst_gradient_error(mops, mbb.kind, 200.0 / mbb.extended_area, 20, rng);
  const Benchmark inv = inverter_problem(8, 8, 0.1, 0.1);
  const AssembledOperators iops = assemble_operators(inv.mesh, inv.bc, 3e-4);
  const double e_inv = worst_gradient_error(iops, inv.kind, 0.02, 20, rng);
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = e_mbb <= 1e-6 && e_inv <= 1e-6 && t < 10.0;
  o.detail = fmt("worst relative error MBB 6x2 %.2e, inverter 8x8 %.2e; %.2f s", e_mbb, e_inv, t);
  return o;
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  std::mt19937 rng(2);
  double worst = 0.0;
  int missing = 0, active = 0;
  for (int k = 0; k < 50; ++k) {
    const oracle::RandomQp r = oracle::random_box_qp(10, rng);
    const auto ref = oracle::enumerate_box_qp(r.q, r.qp.target, r.qp.lower, r.qp.upper);
    const BoxQpResult res = solve_box_qp(r.qp);
    if (!ref || !res.converged) {
      ++missing;
      continue;
    }
    for (auto s : res.status) active += s != 0 ? 1 : 0;
    worst = std::max(worst, (res.x - *ref).cwiseAbs().maxCoeff());
  }
  const double t = seconds_since(t0);
  Outcome o;
  o.pass = missing == 0 && worst <= 1e-8 && t < 30.0;
  o.detail = fmt("50 instances, %d active bounds in total, max deviation %.2e, %d unresolved; %.2f s",
                 active, worst, missing, t);
  return o;
}

struct Table {
  Solved fbs_id, fbs_rec, tmp_id, tmp_rec;
  std::vector<Solved> tau2;
};

int monotonicity_violations(const RunResult& r) {
  int v = 0;
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    if (r.history[i].phase == r.history[i - 1].phase && r.history[i].Jtilde > r.history[i - 1].Jtilde) {
      ++v;
    }
  }
  return v;
}

Outcome criterion3(const Table& t) {
  int violations = 0;
  int runs = 0;
  for (const Solved* s : {&t.fbs_id, &t.fbs_rec, &t.tmp_id, &t.tmp_rec}) {
    violations += monotonicity_violations(s->r);
    ++runs;
  }
  for (const Solved& s : t.tau2) {
    violations += monotonicity_violations(s.r);
    ++runs;
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = fmt("%d MBB 60x20 runs (fbs/tmp x identity/reciprocal x tau0 1, 2): %d increases of Jtilde",
                 runs, violations);
  return o;
}

Outcome criterion4() {
  // tau fixed at 1: near the optimum Armijo comparisons drown in roundoff and stall near E2 ~ 5e-7
  RunConfig cfg = mbb_config(60, 20, 0.06);
  cfg.optimizer.backtracking = false;
  cfg.optimizer.eps1 = 1.0;
  cfg.optimizer.eps2 = 1e-8;
  cfg.optimizer.max_iter = 5000;
  const Solved s = solve(cfg);
  Outcome o;
  if (s.r.summary.status != RunStatus::converged) {
    o.detail = "tmp run did not reach E2 <= 1e-8: " + describe("run", s.r.summary);
    return o;
  }
  const Case& c = s.c;
  const Eigen::VectorXd& z = s.r.z;
  const double lambda = c.optimizer.lambda;
  const Evaluation ev = objective_and_gradient(c.ops, z, 3.0, lambda, c.problem.kind);
  const Eigen::VectorXd h = hessian_model(c.ops, HessianKind::reciprocal, z, ev.state.energy,
                                          default_hessian_floor(c.ops, lambda), 1.0)
                                .diag;
  const Bounds bounds = move_bounds(z, 1.0, c.optimizer.delta_rho);
  const StepResult f = fbs_step(c.ops, z, h, 1.0, ev.grad_Jtilde, bounds);
  const ActiveSet a = tmp_active_set(z, ev.grad_Jtilde, c.optimizer.delta_rho, c.optimizer.active_epsilon);
  const StepResult t = tmp_step(c.ops, z, h, 1.0, ev.grad_Jtilde, bounds, a);
  const double df = (f.candidate - z).cwiseAbs().maxCoeff();
  const double dt = (t.candidate - z).cwiseAbs().maxCoeff();
  o.pass = df <= 1e-6 && dt <= 1e-6;
  o.detail = fmt("E2 %.2e after %d iterations; fbs step moves %.2e, tmp step moves %.2e (max-norm)",
                 s.r.summary.E2, s.r.summary.iterations, df, dt);
  return o;
}

Outcome criterion5(const Table& t, double seconds) {
  const RunSummary& fi = t.fbs_id.r.summary;
  const RunSummary& fr = t.fbs_rec.r.summary;
  const RunSummary& ti = t.tmp_id.r.summary;
  const RunSummary& tr = t.tmp_rec.r.summary;
  bool all_converged = true;
  for (const RunSummary* s : {&fi, &fr, &ti, &tr}) all_converged &= s->status == RunStatus::converged;
  const bool a = fi.total_backtracks == 0 && fr.total_backtracks == 0 && ti.total_backtracks == 0 &&
                 tr.total_backtracks == 0;
  const bool b = fr.iterations < fi.iterations && tr.iterations < ti.iterations;
  const double d_id = std::abs(fi.Jtilde - ti.Jtilde) / std::abs(ti.Jtilde);
  const double d_rec = std::abs(fr.Jtilde - tr.Jtilde) / std::abs(tr.Jtilde);
  const bool c = d_id <= 5e-3 && d_rec <= 5e-3;
  Outcome o;
  o.pass = all_converged && a && b && c && seconds < 300.0;
  o.detail = fmt("(a) %s (b) %s iterations fbs rec/id %d/%d, tmp rec/id %d/%d (c) %s Jtilde gaps "
                 "%.3f%%/%.3f%%; %.1f s",
                 a ? "ok" : "FAIL", b ? "ok" : "FAIL", fr.iterations, fi.iterations, tr.iterations,
                 ti.iterations, c ? "ok" : "FAIL", 100 * d_id, 100 * d_rec, seconds);
  return o;
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  // load 0.2 puts the extended compliance near the reported scale of about 100
  RunConfig cfg = mbb_config(300, 50, 0.06);
  cfg.load = 0.2;
  const Solved s = solve(cfg);
  const RunSummary& r = s.r.summary;
  const double ext = extended_factor(s.c) * r.Jtilde;
  Outcome o;
  o.binding = false;
  const bool v_ok = std::abs(r.V - 0.512) <= 0.03;
  const bool m_ok = std::abs(r.discreteness - 15.0) <= 4.0;
  const bool j_ok = std::abs(ext - 211.0) <= 0.1 * 211.0;
  o.pass = r.status == RunStatus::converged && v_ok && m_ok && j_ok;
  o.detail = fmt("%s; V %.3f (%s) M %.1f%% (%s) extended Jtilde %.1f (%s) violations %d; %.0f s",
                 describe("300x50 tmp", r).c_str(), r.V, v_ok ? "ok" : "off", r.discreteness,
                 m_ok ? "ok" : "off", ext, j_ok ? "ok" : "off", monotonicity_violations(s.r),
                 seconds_since(t0));
  return o;
}

Outcome criterion7(const Solved& coarse_beta) {
  const Solved fine = solve(mbb_config(60, 20, 0.01));
  const int nx = 60, ny = 20;
  const int c01 = void_components(fine.r.element_density, nx, ny);
  const int c06 = void_components(coarse_beta.r.element_density, nx, ny);
  const double m01 = fine.r.summary.discreteness;
  const double m06 = coarse_beta.r.summary.discreteness;
  Outcome o;
  o.pass = c01 > c06 && m01 < m06;
  o.detail = fmt("void regions beta 0.01: %d vs beta 0.06: %d; M %.2f%% vs %.2f%%", c01, c06, m01, m06);
  return o;
}

Outcome criterion8(const Solved& p3) {
  RunConfig c4 = mbb_config(60, 20, 0.06);
  c4.optimizer.penalty = 4.0;
  RunConfig c5 = c4;
  c5.optimizer.penalty = 5.0;
  const Solved p4 = solve(c4);
  const Solved p5 = solve(c5);
  const double m3 = p3.r.summary.discreteness, m4 = p4.r.summary.discreteness,
               m5 = p5.r.summary.discreteness;
  Outcome o;
  o.pass = m3 > m4 && m4 > m5;
  o.detail = fmt("M for p = 3, 4, 5: %.2f%%, %.2f%%, %.2f%% (iterations %d, %d, %d)", m3, m4, m5,
                 p3.r.summary.iterations, p4.r.summary.iterations, p5.r.summary.iterations);
  return o;
}

Outcome criterion9() {
  const auto t0 = Clock::now();
  RunConfig cfg = mbb_config(60, 20, 0.01);
  cfg.optimizer.backtracking = false;  // tau fixed at 1
  cfg.optimizer.tau0 = 1.0;
  const RefineReport rep = refine_sweep(cfg, {1, 2, 4}, false);
  bool ok = true;
  std::string d;
  for (std::size_t k = 0; k < rep.levels.size(); ++k) {
    const RefineLevel& l = rep.levels[k];
    d += fmt("%dx%d %s it=%d V=%.3f", l.nx, l.ny, l.ok ? to_string(l.status).c_str() : "failed",
             l.iterations, l.V);
    if (l.compared) {
      const double dv = std::abs(l.V - rep.levels[k - 1].V);
      d += fmt(" overlap=%.3f dV=%.3f", l.overlap, dv);
      ok &= l.overlap >= 0.9 && dv <= 0.02;
    } else if (k > 0) {
      ok = false;
    }
    ok &= l.ok;
    d += "; ";
  }
  Outcome o;
  o.pass = ok && rep.levels.size() == 3;
  o.detail = d + fmt("%.0f s", seconds_since(t0));
  return o;
}

Outcome criterion10(const Table& t) {
  RunConfig cfg = with(mbb_config(60, 20, 0.06), Algorithm::gp, HessianKind::identity, 1.0);
  const Solved gp = solve(cfg);
  const RunSummary& g = gp.r.summary;
  const RunSummary& f = t.fbs_id.r.summary;
  Outcome o;
  o.pass = g.iterations > f.iterations && f.status == RunStatus::converged;
  o.detail = fmt("GP %d iterations (%s, Jtilde %.4f) vs FBS identity %d (%s, Jtilde %.4f), tau0 = 1",
                 g.iterations, to_string(g.status).c_str(), g.Jtilde, f.iterations,
                 to_string(f.status).c_str(), f.Jtilde);
  return o;
}

Outcome criterion11() {
  const RunConfig cfg = default_config(ProblemType::inverter);
  const Solved s = solve(cfg);
  const RunSummary& r = s.r.summary;
  const double max_rho = s.r.element_density.maxCoeff();
  const bool trivial = max_rho < 0.5;
  Outcome o;
  o.pass = r.status == RunStatus::converged && r.J < 0.0 && !trivial && r.iterations <= 400;
  o.detail = fmt("40x40 inverter: %s after %d iterations, J %.4g, l(u) %.4g, V %.3f, max rho %.3f, final lambda %.3g",
                 to_string(r.status).c_str(), r.iterations, r.J, r.structural, r.V, max_rho, r.lambda);
  return o;
}

Outcome criterion12(const Table& t) {
  RunConfig cfg = mbb_config(60, 20, 0.06);
  cfg.optimizer.algorithm = Algorithm::sensfilter;
  cfg.optimizer.move_limit = 0.25;
  const Solved sf = solve(cfg);
  const int nx = 60, ny = 20;
  const int n_sf = corner_intermediate(sf.r.element_density, nx, ny);
  const int n_fbs = corner_intermediate(t.fbs_rec.r.element_density, nx, ny);
  Outcome o;
  o.pass = sf.r.summary.status == RunStatus::converged && n_sf >= 1.2 * n_fbs && n_sf > 0;
  o.detail = fmt("%s; corner intermediate elements sensfilter %d vs FBS reciprocal %d",
                 describe("sensfilter r=2a", sf.r.summary).c_str(), n_sf, n_fbs);
  return o;
}

int failures = 0;

void report(int number, const Outcome& o) {
  std::printf("Criterion %2d: %s%s - %s\n", number, o.pass ? "PASS" : "FAIL",
              o.binding ? "" : " (non-binding)", o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass && o.binding) ++failures;
}

}  // namespace

int main() {
  report(1, criterion1());
  report(2, criterion2());

  const auto t5 = Clock::now();
  Table t;
  const RunConfig base = mbb_config(60, 20, 0.06);
  t.fbs_id = solve(with(base, Algorithm::fbs, HessianKind::identity, 1.0));
  t.fbs_rec = solve(with(base, Algorithm::fbs, HessianKind::reciprocal, 1.0));
  t.tmp_id = solve(with(base, Algorithm::tmp, HessianKind::identity, 1.0));
  t.tmp_rec = solve(with(base, Algorithm::tmp, HessianKind::reciprocal, 1.0));
  const double table_seconds = seconds_since(t5);
  for (Algorithm a : {Algorithm::fbs, Algorithm::tmp}) {
    for (HessianKind h : {HessianKind::identity, HessianKind::reciprocal}) {
      t.tau2.push_back(solve(with(base, a, h, 2.0)));
    }
  }

  report(3, criterion3(t));
  report(4, criterion4());
  report(5, criterion5(t, table_seconds));
  report(6, criterion6());
  report(7, criterion7(t.tmp_rec));
  report(8, criterion8(t.tmp_rec));
  report(9, criterion9());
  report(10, criterion10(t));
  report(11, criterion11());
  report(12, criterion12(t));
  std::printf("%d binding criteria failed\n", failures);
  return failures;
}
