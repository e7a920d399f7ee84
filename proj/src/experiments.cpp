#include "afemmg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

namespace afemmg {

int worker_count() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("AFEMMG_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return n;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

MeshHierarchy generate_hierarchy(const Problem& problem, int p, int level, double theta,
                                 double lambda_stop, RefineRule rule) {
  if (level < 0) throw Error(ErrorCode::kLevelOutOfRange, "negative hierarchy level");
  AfemConfig cfg;
  cfg.theta = theta;
  cfg.lambda_stop = lambda_stop;
  cfg.solver = SolverKind::kMg;
  cfg.p = p;
  cfg.max_level = level;
  cfg.refine_rule = rule;
  AfemResult res = adaptive_loop(problem, cfg);
  if (res.hierarchy.top() != level) {
    throw Error(ErrorCode::kIterationCapExceeded,
                "hierarchy generation stopped early: " + res.log.stop_reason);
  }
  return std::move(res.hierarchy);
}

namespace {

void require_nonempty(const StudyConfig& cfg, bool need_solvers) {
  if (cfg.degrees.empty() || cfg.levels.empty() || (need_solvers && cfg.solvers.empty())) {
    throw Error(ErrorCode::kConfig, "study needs degrees, levels and solvers");
  }
}

int max_level(const StudyConfig& cfg) { return *std::max_element(cfg.levels.begin(), cfg.levels.end()); }

// One hierarchy per degree, generated in parallel.
std::map<int, MeshHierarchy> hierarchies(const Problem& problem, const StudyConfig& cfg, int level) {
  std::vector<std::optional<MeshHierarchy>> out(cfg.degrees.size());
  parallel_for(static_cast<int>(cfg.degrees.size()), [&](int i) {
    out[i].emplace(generate_hierarchy(problem, cfg.degrees[i], level, cfg.theta, cfg.lambda_stop,
                                      cfg.refine_rule));
  });
  std::map<int, MeshHierarchy> m;
  for (std::size_t i = 0; i < out.size(); ++i) m.emplace(cfg.degrees[i], std::move(*out[i]));
  return m;
}

struct Cell {
  int p;
  int level;
};

std::vector<Cell> cells(const StudyConfig& cfg, std::span<const int> levels) {
  std::vector<Cell> c;
  for (int p : cfg.degrees) {
    for (int l : levels) c.push_back({p, l});
  }
  return c;
}

SolveReport solve_to(SolverKind kind, const LevelSystem& sys, const Vector& exact, double tol,
                     int max_iter) {
  IterativeSolver solver = make_solver(kind, sys, Vector::Zero(sys.A->rows()));
  SolveOptions opts;
  opts.exact = &exact;
  opts.energy_tol = tol;
  opts.max_iter = max_iter;
  opts.throw_on_cap = false;
  opts.enforce_flags = false;
  try {
    return run_solver(solver, *sys.A, opts);
  } catch (const Error& e) {
    // A breakdown (typically at roundoff level) ends the run unconverged.
    if (e.code() != ErrorCode::kBreakdown) throw;
    SolveReport rep;
    rep.iterations = solver.iterations();
    rep.residual = solver.residual_norm();
    const Vector d = exact - solver.x();
    rep.energy_error = std::sqrt(std::max(0.0, d.dot(*sys.A * d)));
    rep.converged = rep.energy_error < tol;
    return rep;
  }
}

}  // namespace

std::vector<ContractionRow> run_contraction(const Problem& problem, const StudyConfig& cfg) {
  require_nonempty(cfg, true);
  const int level = max_level(cfg);
  const auto hs = hierarchies(problem, cfg, level);
  const std::vector<int> top{level};
  const auto cs = cells(cfg, top);
  std::vector<std::vector<ContractionRow>> out(cs.size());
  parallel_for(static_cast<int>(cs.size()), [&](int i) {
    const LevelSystem sys = build_level_system(hs.at(cs[i].p), problem, cs[i].p);
    const Vector exact = direct_solve(*sys.A, *sys.b);
    for (SolverKind kind : cfg.solvers) {
      const SolveReport rep = solve_to(kind, sys, exact, cfg.energy_tol, cfg.max_iter);
      for (std::size_t k = 0; k < rep.energy_errors.size(); ++k) {
        out[i].push_back({to_string(kind), cs[i].p, level, static_cast<int>(k), rep.energy_errors[k],
                          k == 0 ? 0.0 : rep.factors[k - 1]});
      }
    }
  });
  std::vector<ContractionRow> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

std::vector<RobustnessRow> run_robustness(const Problem& problem, const StudyConfig& cfg) {
  require_nonempty(cfg, true);
  const auto hs = hierarchies(problem, cfg, max_level(cfg));
  const auto cs = cells(cfg, cfg.levels);
  std::vector<std::vector<RobustnessRow>> out(cs.size());
  parallel_for(static_cast<int>(cs.size()), [&](int i) {
    const LevelSystem sys = build_level_system(hs.at(cs[i].p).prefix(cs[i].level), problem, cs[i].p);
    const Vector exact = direct_solve(*sys.A, *sys.b);
    for (SolverKind kind : cfg.solvers) {
      const SolveReport rep = solve_to(kind, sys, exact, cfg.energy_tol, cfg.max_iter);
      out[i].push_back({to_string(kind), cs[i].p, cs[i].level, rep.iterations, rep.converged});
    }
  });
  std::vector<RobustnessRow> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

std::vector<FailureRow> run_failure(const Problem& problem, const StudyConfig& cfg) {
  require_nonempty(cfg, true);
  const int level = max_level(cfg);
  const auto hs = hierarchies(problem, cfg, level);
  const std::vector<int> top{level};
  const auto cs = cells(cfg, top);
  std::vector<std::vector<FailureRow>> out(cs.size());
  parallel_for(static_cast<int>(cs.size()), [&](int i) {
    const LevelSystem sys = build_level_system(hs.at(cs[i].p), problem, cs[i].p);
    const Vector exact = direct_solve(*sys.A, *sys.b);
    for (SolverKind kind : cfg.solvers) {
      const SolveReport rep = solve_to(kind, sys, exact, cfg.energy_tol, cfg.max_iter);
      out[i].push_back({to_string(kind), cs[i].p, rep.energy_error, rep.iterations});
    }
  });
  std::vector<FailureRow> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

std::vector<ConditionRow> run_condition(const Problem& problem, const std::vector<PrecondKind>& precs,
                                        const StudyConfig& cfg) {
  require_nonempty(cfg, false);
  if (precs.empty()) throw Error(ErrorCode::kConfig, "condition study needs preconditioners");
  for (PrecondKind k : precs) {
    if (k == PrecondKind::kMg || k == PrecondKind::kNsMg) {
      throw Error(ErrorCode::kConfig, std::string("condition study needs an SPD preconditioner, got ") +
                                          to_string(k));
    }
  }
  const auto hs = hierarchies(problem, cfg, max_level(cfg));
  const auto cs = cells(cfg, cfg.levels);
  std::vector<std::vector<ConditionRow>> out(cs.size());
  parallel_for(static_cast<int>(cs.size()), [&](int i) {
    const LevelSystem sys = build_level_system(hs.at(cs[i].p).prefix(cs[i].level), problem, cs[i].p);
    for (PrecondKind kind : precs) {
      const EigenEstimate e =
          extreme_eigs(*sys.A, make_preconditioner(sys.workspace, kind), cfg.lanczos_steps, cfg.seed);
      out[i].push_back({to_string(kind), cs[i].p, cs[i].level, e.lmin, e.lmax, e.cond()});
    }
  });
  std::vector<ConditionRow> rows;
  for (auto& v : out) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

namespace {

// Round-trip precision keeps CSVs deterministic and lossless.
std::ostream& prec(std::ostream& os) { return os << std::setprecision(17); }

}  // namespace

void write_csv(std::ostream& os, const std::vector<ContractionRow>& rows) {
  prec(os) << "solver,p,level,k,energy_error,q_k\n";
  for (const auto& r : rows) {
    os << r.solver << ',' << r.p << ',' << r.level << ',' << r.k << ',' << r.energy_error << ','
       << r.q_k << '\n';
  }
}

void write_csv(std::ostream& os, const std::vector<RobustnessRow>& rows) {
  os << "solver,p,level,steps\n";
  for (const auto& r : rows) os << r.solver << ',' << r.p << ',' << r.level << ',' << r.steps << '\n';
}

void write_csv(std::ostream& os, const std::vector<FailureRow>& rows) {
  prec(os) << "solver,p,final_error,steps\n";
  for (const auto& r : rows) os << r.solver << ',' << r.p << ',' << r.final_error << ',' << r.steps << '\n';
}

void write_csv(std::ostream& os, const std::vector<ConditionRow>& rows) {
  prec(os) << "precond,p,level,lmin,lmax,cond\n";
  for (const auto& r : rows) {
    os << r.precond << ',' << r.p << ',' << r.level << ',' << r.lmin << ',' << r.lmax << ',' << r.cond
       << '\n';
  }
}

void write_csv(std::ostream& os, const AfemLog& log) {
  prec(os) << "level,k,n_elements,n_dofs,eta,increment,cum_dofs,cum_cost,wall_s";
  const bool exact = !log.steps.empty() && log.steps.front().quasi_error >= 0.0;
  if (exact) os << ",quasi_error";
  os << '\n';
  for (const auto& s : log.steps) {
    os << s.level << ',' << s.k << ',' << s.n_elements << ',' << s.n_dofs << ',' << s.eta << ','
       << s.increment << ',' << s.cum_dofs << ',' << s.cum_cost << ',' << s.wall_s;
    if (exact) os << ',' << s.quasi_error;
    os << '\n';
  }
}

}  // namespace afemmg
