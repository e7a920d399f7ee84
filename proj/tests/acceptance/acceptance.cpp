// Acceptance suite: one PASS/FAIL line per criterion. Exit code 1 if any fail.

#include "afemmg/experiments.hpp"

#include "helpers.hpp"
#include "oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace afemmg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const Problem& lshape() {
  static const Problem p = make_problem("lshape_poisson");
  return p;
}

const Problem& checker() {
  static const Problem p = make_problem("checkerboard");
  return p;
}

// 1. Per-step contraction of MG and GPCG+MG on level-10 L-shape hierarchies.
Outcome contraction() {
  StudyConfig cfg;
  cfg.solvers = {SolverKind::kMg, SolverKind::kGpcgMg};
  cfg.degrees = {1, 2, 3, 4};
  cfg.levels = {10};
  cfg.energy_tol = 1e-11;
  cfg.max_iter = 200;
  const auto rows = run_contraction(lshape(), cfg);
  std::map<std::string, std::map<int, double>> qmax;
  std::map<std::string, std::map<int, double>> last_err;
  for (const auto& r : rows) {
    double& q = qmax[r.solver][r.p];
    if (r.k > 0) q = std::max(q, r.q_k);
    last_err[r.solver][r.p] = r.energy_error;
  }
  Outcome o{true, ""};
  for (const auto& [solver, by_p] : qmax) {
    double lo = 1e300, hi = 0.0;
    o.detail += solver + " qmax";
    for (const auto& [p, q] : by_p) {
      o.detail += fmt(" p%d=%.3f", p, q);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
      if (!(q <= 0.95) || !(last_err[solver][p] < 1e-11)) o.pass = false;
    }
    if (hi - lo > 0.15) o.pass = false;
    o.detail += fmt(" (spread %.3f); ", hi - lo);
  }
  return o;
}

// 2. Step counts of GPCG+MG and PCG+BPX to 1e-13.
Outcome robustness() {
  StudyConfig cfg;
  cfg.solvers = {SolverKind::kGpcgMg, SolverKind::kPcgBpx};
  cfg.degrees = {1, 2, 4, 6};
  cfg.levels = {5, 10};
  cfg.energy_tol = 1e-13;
  cfg.max_iter = 3000;
  const auto rows = run_robustness(lshape(), cfg);
  Outcome o{true, ""};
  std::map<std::pair<int, int>, int> bpx;
  std::string gp = "GPCG+MG";
  for (const auto& r : rows) {
    if (r.solver == "GPCG+MG") {
      gp += fmt(" (%d,%d)=%d", r.level, r.p, r.steps);
      if (!r.converged || r.steps < 20 || r.steps > 60) o.pass = false;
    } else {
      bpx[{r.level, r.p}] = r.converged ? r.steps : -1;
    }
  }
  const int a = bpx[{5, 1}], b = bpx[{10, 4}];
  if (a <= 0 || b <= 0 || b < 3 * a) o.pass = false;
  o.detail = gp + fmt("; PCG+BPX (5,1)=%d (10,4)=%d ratio %.2f", a, b, a > 0 ? double(b) / a : 0.0);
  return o;
}

// 3. PCG with the non-linear MG preconditioner stalls; GPCG does not.
Outcome failure() {
  StudyConfig cfg;
  cfg.solvers = {SolverKind::kPcgMg, SolverKind::kGpcgMg};
  cfg.degrees = {1, 2};
  cfg.levels = {10};
  cfg.energy_tol = 1e-13;
  cfg.max_iter = 100;
  const auto rows = run_failure(lshape(), cfg);
  Outcome o{true, ""};
  for (const auto& r : rows) {
    o.detail += fmt("%s p=%d err=%.3e steps=%d; ", r.solver.c_str(), r.p, r.final_error, r.steps);
    if (r.solver == "PCG+MG" && r.final_error < 1e-13) o.pass = false;
    if (r.solver == "GPCG+MG" && !(r.final_error < 1e-13 && r.steps <= 60)) o.pass = false;
  }
  return o;
}

// 4. Estimator rates against cumulative dofs.
Outcome afem_rates() {
  struct Run {
    const Problem* problem;
    int p;
    double theta, lambda;
  };
  const std::vector<Run> runs{{&lshape(), 1, 0.5, 0.05},  {&lshape(), 2, 0.5, 0.05},
                              {&lshape(), 3, 0.5, 0.05},  {&checker(), 1, 0.3, 0.01},
                              {&checker(), 3, 0.3, 0.01}};
  std::vector<std::string> lines(runs.size());
  std::vector<char> ok(runs.size(), 0);
  parallel_for(static_cast<int>(runs.size()), [&](int i) {
    const Run& r = runs[i];
    AfemConfig cfg;
    cfg.theta = r.theta;
    cfg.lambda_stop = r.lambda;
    cfg.p = r.p;
    cfg.solver = SolverKind::kGpcgMg;
    cfg.max_cum_dofs = 100000;
    const AfemResult res = adaptive_loop(*r.problem, cfg);
    std::vector<double> x, y;
    for (const auto& lv : res.log.levels) {
      x.push_back(static_cast<double>(lv.cum_dofs));
      y.push_back(lv.eta);
    }
    const double slope = rate_fit(x, y);
    const double target = -0.5 * r.p;
    ok[i] = std::abs(slope - target) <= 0.15 * std::abs(target) && x.back() >= 3e4 &&
            res.log.stop_reason == "cumulative dof budget";
    lines[i] = fmt("%s p=%d slope %.3f (target %.2f, %zu levels, %.0f cum dofs); ", r.problem->name.c_str(),
                   r.p, slope, target, x.size(), x.back());
  });
  Outcome o{true, ""};
  for (std::size_t i = 0; i < runs.size(); ++i) {
    o.pass = o.pass && ok[i];
    o.detail += lines[i];
  }
  return o;
}

// 5. Number of elements on level 8.
Outcome mesh_cardinality() {
  const int lshape_t8 = generate_hierarchy(lshape(), 1, 8).level(8).num_triangles();
  const int checker_t8 = generate_hierarchy(checker(), 1, 8).level(8).num_triangles();
  const bool a = std::abs(lshape_t8 - 2490) <= 0.3 * 2490;
  const bool b = std::abs(checker_t8 - 1242) <= 0.3 * 1242;
  return {a && b, fmt("L-shape #T_8=%d (target 2490 +-30%%: %s); checkerboard #T_8=%d (target 1242 +-30%%: %s)",
                      lshape_t8, a ? "ok" : "miss", checker_t8, b ? "ok" : "miss")};
}

// 6. Operator identities against explicit dense operators.
Outcome identities() {
  double ns = 0.0, sym = 0.0, func = 0.0, tele = 0.0;
  int max_n = 0;
  std::mt19937_64 rng(2024);
  for (int p : {1, 2, 3}) {
    for (int which = 0; which < 2; ++which) {
      const MeshLevel m0 = which == 0 ? lshape_mesh() : checkerboard_mesh();
      const DiffusionField K =
          which == 0 ? DiffusionField::identity() : checkerboard_coefficient(m0, 1.0, 100.0);
      const MeshHierarchy h = which == 0 ? test::graded_hierarchy(m0, 5, 0.0, 0.0)
                                         : test::graded_hierarchy(m0, 5, 0.5, 0.5);
      const auto space = std::make_shared<const FeSpace>(h.level_ptr(h.top()), p);
      const SparseMatrix A = assemble_stiffness(*space, K);
      const auto ws = std::make_shared<const MgWorkspace>(h, *space, A, K);
      const auto ex = test::build_explicit(h, *space, A, p == 1);
      const int n = ex.n();
      max_n = std::max(max_n, n);
      const DenseMatrix I = DenseMatrix::Identity(n, n);
      const DenseMatrix E = ex.ns_error(ws->fixed_step());
      const DenseMatrix Bns = materialize(make_preconditioner(ws, PrecondKind::kNsMg), n);
      ns = std::max(ns, ((I - Bns * ex.A) - E).cwiseAbs().maxCoeff());
      const DenseMatrix Bs = materialize(make_preconditioner(ws, PrecondKind::kSMg), n);
      const DenseMatrix Eadj = ex.A.llt().solve(E.transpose() * ex.A);
      sym = std::max(sym, ((I - Bs * ex.A) - E * Eadj).cwiseAbs().maxCoeff());
      for (int t = 0; t < 5; ++t) {
        const Vector x = test::random_vector(n, rng);
        // Functional side: successive level corrections of the error x.
        Vector sigma = ex.S(0) * x;
        for (int l = 1; l <= ex.top; ++l) {
          const Vector rho = ex.S(l) * (x - sigma);
          const double den = rho.dot(ex.A * rho);
          if (den <= 1e-20 * (x - sigma).dot(ex.A * (x - sigma))) continue;  // residual at roundoff level
          const double nu = rho.dot(ex.A * (x - sigma)) / den;
          sigma += ((l == ex.top || nu <= 3.0) ? nu : ws->fixed_step()) * rho;
        }
        func = std::max(func, test::rel_diff(ws->mg(ex.A * x), sigma));
      }
    }
  }
  std::normal_distribution<double> g;
  for (int fam = 0; fam < 100; ++fam) {
    const int count = 2 + fam % 7;
    const DenseMatrix I = DenseMatrix::Identity(8, 8);
    DenseMatrix sum = DenseMatrix::Zero(8, 8), prefix = I;
    for (int l = 0; l < count; ++l) {
      const DenseMatrix M = DenseMatrix::NullaryExpr(8, 8, [&] { return 0.3 * g(rng); });
      sum += M * prefix;
      prefix = (I - M) * prefix;
    }
    tele = std::max(tele, (sum - (I - prefix)).cwiseAbs().maxCoeff());
  }
  const bool pass = max_n <= 500 && ns <= 1e-11 && sym <= 1e-10 && func <= 1e-11 && tele <= 1e-12;
  return {pass, fmt("max dofs %d; nsMG %.2e (tol 1e-11), sMG %.2e (1e-10), MG functional %.2e (1e-11), "
                    "telescoping %.2e (1e-12)",
                    max_n, ns, sym, func, tele)};
}

// 7. Probes of the symmetric variants and GPCG/PCG agreement.
Outcome probes() {
  double lin = 0.0, sym = 0.0, rmin = 1e300, gdiff = 0.0;
  for (int p : {1, 2, 3}) {
    const MeshHierarchy h = generate_hierarchy(checker(), p, 6);
    const LevelSystem sys = build_level_system(h, checker(), p);
    const int n = sys.space->num_dofs();
    for (PrecondKind kind : {PrecondKind::kSMg, PrecondKind::kAs, PrecondKind::kBpx}) {
      const auto B = make_preconditioner(sys.workspace, kind);
      const ProbeResult pr = probe_preconditioner(B, n, 100, 31 + p);
      lin = std::max(lin, pr.linearity);
      sym = std::max(sym, pr.symmetry);
      rmin = std::min(rmin, pr.min_rayleigh);
      IterativeSolver a(KrylovMethod::kPcg, *sys.A, *sys.b, Vector::Zero(n), B);
      IterativeSolver b(KrylovMethod::kGpcg, *sys.A, *sys.b, Vector::Zero(n), B);
      for (int k = 0; k < 20; ++k) {
        a.step();
        b.step();
        gdiff = std::max(gdiff, test::rel_diff(a.x(), b.x()));
      }
    }
  }
  const bool pass = lin <= 1e-11 && sym <= 1e-11 && rmin > 0.0 && gdiff <= 1e-12;
  return {pass, fmt("linearity %.2e, symmetry %.2e, min Rayleigh %.3e, GPCG-PCG iterate diff %.2e", lin, sym,
                    rmin, gdiff)};
}

// 8. Condition number of the additive Schwarz preconditioner.
Outcome as_condition() {
  StudyConfig cfg;
  cfg.degrees = {1, 3};
  cfg.levels = {4, 8, 12};
  cfg.lanczos_steps = 60;
  cfg.seed = 7;
  const auto rows = run_condition(lshape(), {PrecondKind::kAs}, cfg);
  std::map<std::pair<int, int>, double> cond;
  for (const auto& r : rows) cond[{r.p, r.level}] = r.cond;
  const double g_level = cond[{1, 12}] / cond[{1, 4}];
  const double g_degree = cond[{3, 8}] / cond[{1, 8}];

  // Dense generalized eigenvalue oracle where the system is small enough.
  double worst = 0.0;
  int checked = 0;
  for (int p : cfg.degrees) {
    const MeshHierarchy h = generate_hierarchy(lshape(), p, 12);
    for (int l : cfg.levels) {
      const LevelSystem sys = build_level_system(h.prefix(l), lshape(), p);
      const int n = sys.space->num_dofs();
      if (n > 2000) continue;
      const DenseMatrix B = materialize(make_preconditioner(sys.workspace, PrecondKind::kAs), n);
      const EigenEstimate d = dense_extreme_eigs(DenseMatrix(*sys.A), B);
      worst = std::max(worst, std::abs(cond[{p, l}] - d.cond()) / d.cond());
      ++checked;
    }
  }
  const bool pass = g_level <= 1.3 && g_degree <= 1.3 && checked > 0 && worst <= 0.05;
  return {pass, fmt("cond p1: l4 %.3f l8 %.3f l12 %.3f (growth %.3f); p3 l8 %.3f (growth vs p1 %.3f); dense "
                    "oracle worst rel diff %.2e over %d cases",
                    cond[{1, 4}], cond[{1, 8}], cond[{1, 12}], g_level, cond[{3, 8}], g_degree, worst,
                    checked)};
}

// 9. V-cycle work and V^+ bookkeeping per element.
Outcome complexity() {
  const MeshHierarchy h = generate_hierarchy(lshape(), 1, 12);
  double lo = 1e300, hi = 0.0, cmax = 0.0;
  std::string detail;
  std::mt19937_64 rng(9);
  for (int l = 4; l <= 12; ++l) {
    const MeshHierarchy hl = h.prefix(l);
    const LevelSystem sys = build_level_system(hl, lshape(), 1);
    ApplyStats stats;
    sys.workspace->mg(test::random_vector(sys.space->num_dofs(), rng), &stats);
    const double nt = hl.finest().num_triangles();
    const double w = static_cast<double>(stats.work) / nt;
    long long vplus = 0;
    for (int j = 0; j <= l; ++j) vplus += static_cast<long long>(hl.v_plus(j).size());
    cmax = std::max(cmax, vplus / nt);
    lo = std::min(lo, w);
    hi = std::max(hi, w);
    detail += fmt(" l%d=%.1f", l, w);
  }
  return {hi <= 2.0 * lo, "work/#T:" + detail + fmt(" (max/min %.2f); sum |V+| <= C #T with C=%.3f", hi / lo, cmax)};
}

// 10. Uniform-refinement rates on a smooth solution and CG termination.
Outcome discretization() {
  const Problem pr = make_problem("manufactured_sine");
  Outcome o{true, ""};
  for (int p : {1, 2, 3}) {
    MeshHierarchy h(*pr.mesh);
    std::vector<double> dofs, err;
    for (int l = 0; l <= 8 - p; ++l) {
      if (l > 0) h.refine(test::all_elements(h.finest()), RefineRule::kAllEdges);
      const FeSpace space(h.level_ptr(l), p);
      const SparseMatrix A = assemble_stiffness(space, pr.K);
      const Vector u = direct_solve(A, assemble_load(space, pr.f));
      dofs.push_back(space.num_dofs());
      err.push_back(std::sqrt(energy_error_squared(space, pr.K, u, pr.exact_grad, 4)));
    }
    const double slope = rate_fit(dofs, err);
    if (std::abs(slope + 0.5 * p) > 0.1 * 0.5 * p) o.pass = false;
    o.detail += fmt("p=%d energy slope %.3f; ", p, slope);
  }
  std::mt19937_64 rng(50);
  DenseMatrix G = DenseMatrix::NullaryExpr(50, 50, [&] { return std::normal_distribution<double>()(rng); });
  Eigen::HouseholderQR<DenseMatrix> qr(G);
  const DenseMatrix Q = qr.householderQ();
  Vector d = Vector::LinSpaced(50, 1.0, 100.0);
  const SparseMatrix A = DenseMatrix(Q * d.asDiagonal() * Q.transpose()).sparseView();
  const Vector b = test::random_vector(50, rng);
  Vector x = Vector::Zero(50);
  SolveOptions opts;
  opts.tau = 1e-20 * b.squaredNorm();  // |r| < 1e-10 |b|
  opts.max_iter = 50;
  opts.throw_on_cap = false;
  const SolveReport rep = cg(A, b, x, opts);
  const double rel = (b - A * x).norm() / b.norm();
  if (!(rep.converged && rel < 1e-10)) o.pass = false;
  o.detail += fmt("CG 50x50: %d steps, rel residual %.2e", rep.iterations, rel);
  return o;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "contraction robustness", 120, contraction},
      {2, "robustness table", 600, robustness},
      {3, "failure study", 180, failure},
      {4, "AFEM rates", 600, afem_rates},
      {5, "mesh cardinality", 60, mesh_cardinality},
      {6, "operator identities", 30, identities},
      {7, "SPD and flag probes", 30, probes},
      {8, "AS condition plateau", 120, as_condition},
      {9, "complexity scaling", 120, complexity},
      {10, "discretization sanity", 60, discretization},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = s <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << (pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail
              << fmt(" (%.1f s, budget %.0f s%s)", s, c.budget_s, in_time ? "" : " EXCEEDED") << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
