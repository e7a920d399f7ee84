#include "afemmg/afem.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace afemmg {

const char* to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::kMg: return "MG";
    case SolverKind::kGpcgMg: return "GPCG+MG";
    case SolverKind::kPcgAs: return "PCG+AS";
    case SolverKind::kPcgSMg: return "PCG+sMG";
    case SolverKind::kPcgBpx: return "PCG+BPX";
    case SolverKind::kPcgMg: return "PCG+MG";
    case SolverKind::kPcgNsMg: return "PCG+nsMG";
  }
  return "?";
}

SolverKind parse_solver(const std::string& name) {
  for (SolverKind k : {SolverKind::kMg, SolverKind::kGpcgMg, SolverKind::kPcgAs, SolverKind::kPcgSMg,
                       SolverKind::kPcgBpx, SolverKind::kPcgMg, SolverKind::kPcgNsMg}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorCode::kConfig, "unknown solver '" + name + "'");
}

PrecondKind preconditioner_of(SolverKind kind) {
  switch (kind) {
    case SolverKind::kMg:
    case SolverKind::kGpcgMg:
    case SolverKind::kPcgMg: return PrecondKind::kMg;
    case SolverKind::kPcgAs: return PrecondKind::kAs;
    case SolverKind::kPcgSMg: return PrecondKind::kSMg;
    case SolverKind::kPcgBpx: return PrecondKind::kBpx;
    case SolverKind::kPcgNsMg: return PrecondKind::kNsMg;
  }
  return PrecondKind::kMg;
}

KrylovMethod method_of(SolverKind kind) {
  switch (kind) {
    case SolverKind::kMg: return KrylovMethod::kFixedPoint;
    case SolverKind::kGpcgMg: return KrylovMethod::kGpcg;
    default: return KrylovMethod::kPcg;
  }
}

LevelSystem build_level_system(const MeshHierarchy& h, const Problem& problem, int p, MgOptions opts) {
  LevelSystem sys;
  auto space = std::make_shared<const FeSpace>(h.level_ptr(h.top()), p);
  sys.A = std::make_shared<const SparseMatrix>(assemble_stiffness(*space, problem.K));
  sys.b = std::make_shared<const Vector>(assemble_load(*space, problem.f));
  sys.workspace = std::make_shared<const MgWorkspace>(h, *space, *sys.A, problem.K, opts);
  sys.space = std::move(space);
  return sys;
}

IterativeSolver make_solver(SolverKind kind, const LevelSystem& sys, Vector x0) {
  return IterativeSolver(method_of(kind), *sys.A, *sys.b, std::move(x0),
                         make_preconditioner(sys.workspace, preconditioner_of(kind)));
}

std::vector<int> doerfler_mark(const IndicatorField& eta, double theta) {
  if (eta.eta2.empty()) throw Error(ErrorCode::kInvalidArgument, "empty indicator field");
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "theta must lie in (0,1]");
  std::vector<int> order(eta.eta2.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return eta.eta2[a] > eta.eta2[b]; });
  const double goal = theta * eta.total();
  std::vector<int> marked;
  double sum = 0.0;
  for (int t : order) {
    if (sum >= goal && !marked.empty()) break;
    if (eta.eta2[t] <= 0.0 && sum >= goal) break;
    marked.push_back(t);
    sum += eta.eta2[t];
  }
  // Zero indicators never need marking.
  while (!marked.empty() && eta.eta2[marked.back()] <= 0.0) marked.pop_back();
  std::sort(marked.begin(), marked.end());
  return marked;
}

AfemResult adaptive_loop(const Problem& problem, const AfemConfig& cfg) {
  if (!(cfg.theta > 0.0 && cfg.theta <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "theta must lie in (0,1]");
  if (!(cfg.lambda_stop > 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda_stop must be positive");
  const auto t_start = std::chrono::steady_clock::now();
  auto wall = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  AfemResult res{AfemLog{}, MeshHierarchy(*problem.mesh), Vector()};
  MeshHierarchy& h = res.hierarchy;
  long long cum_dofs = 0;
  long long cum_cost = 0;
  Vector x;
  std::shared_ptr<const FeSpace> prev_space;

  for (int level = 0;; ++level) {
    const LevelSystem sys = build_level_system(h, problem, cfg.p);
    const FeSpace& space = *sys.space;
    const int n_el = space.mesh().num_triangles();
    const int n = space.num_dofs();
    if (level == 0) {
      x = Vector::Zero(n);
    } else {
      x = prolong_solution(*prev_space, space, h.parents(level), x);
    }
    cum_dofs += n;
    cum_cost += n_el;  // the nested-iteration start u_l^0

    Vector exact;
    double eta_exact = 0.0;
    if (cfg.with_exact) {
      exact = direct_solve(*sys.A, *sys.b);
      eta_exact = std::sqrt(indicators(space, problem.K, problem.f, exact).total());
    }

    IterativeSolver solver = make_solver(cfg.solver, sys, x);
    IndicatorField eta;
    double eta_tot = 0.0;
    bool aborted = false;
    int k = 0;
    while (true) {
      const Vector x_prev = solver.x();
      solver.step();
      ++k;
      cum_cost += n_el;
      eta = indicators(space, problem.K, problem.f, solver.x());
      eta_tot = std::sqrt(eta.total());
      AfemStep st;
      st.level = level;
      st.k = k;
      st.n_elements = n_el;
      st.n_dofs = n;
      st.eta = eta_tot;
      st.increment = energy_norm(*sys.A, solver.x() - x_prev);
      st.cum_dofs = cum_dofs;
      st.cum_cost = cum_cost;
      st.wall_s = wall();
      if (cfg.with_exact) st.quasi_error = energy_norm(*sys.A, exact - solver.x()) + eta_exact;
      res.log.steps.push_back(st);
      if (st.increment <= cfg.lambda_stop * eta_tot) break;
      if (k >= cfg.max_solver_steps) {
        aborted = true;
        break;
      }
    }
    x = solver.x();

    AfemLevel info;
    info.level = level;
    info.k_final = k;
    info.n_elements = n_el;
    info.n_dofs = n;
    info.eta = eta_tot;
    info.cum_dofs = cum_dofs;
    info.cum_cost = cum_cost;
    info.aborted = aborted;

    std::string stop;
    if (aborted) {
      stop = "solver step cap reached on level " + std::to_string(level);
    } else if (eta_tot == 0.0) {
      stop = "estimator vanished";
    } else if (cfg.max_level >= 0 && level >= cfg.max_level) {
      stop = "level budget";
    } else if (cfg.max_dofs > 0 && n >= cfg.max_dofs) {
      stop = "dof budget";
    } else if (cfg.max_cum_dofs > 0 && cum_dofs >= cfg.max_cum_dofs) {
      stop = "cumulative dof budget";
    }
    if (!stop.empty()) {
      res.log.levels.push_back(info);
      res.log.stop_reason = stop;
      break;
    }

    const std::vector<int> marked = doerfler_mark(eta, cfg.theta);
    info.n_marked = static_cast<int>(marked.size());
    res.log.levels.push_back(info);
    prev_space = sys.space;
    h.refine(marked, cfg.refine_rule);
  }
  res.x = std::move(x);
  return res;
}

double rate_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "rate fit data");
  if (x.size() < 5) throw Error(ErrorCode::kInsufficientData, "rate fit needs at least 5 points");
  const std::size_t start = x.size() / 2;
  const double m = static_cast<double>(x.size() - start);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = start; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "rate fit needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = m * sxx - sx * sx;
  if (!(den > 0.0)) throw Error(ErrorCode::kInsufficientData, "degenerate abscissae");
  return (m * sxy - sx * sy) / den;
}

}  // namespace afemmg
