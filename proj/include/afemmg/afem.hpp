#pragma once

#include "afemmg/estimator.hpp"
#include "afemmg/krylov.hpp"
#include "afemmg/mesh.hpp"
#include "afemmg/precond.hpp"
#include "afemmg/problems.hpp"

#include <optional>
#include <string>
#include <vector>

namespace afemmg {

enum class SolverKind { kMg, kGpcgMg, kPcgAs, kPcgSMg, kPcgBpx, kPcgMg, kPcgNsMg };

const char* to_string(SolverKind kind);
/// Accepts "MG", "GPCG+MG", "PCG+AS", "PCG+sMG", "PCG+BPX", "PCG+MG", "PCG+nsMG".
SolverKind parse_solver(const std::string& name);
PrecondKind preconditioner_of(SolverKind kind);
KrylovMethod method_of(SolverKind kind);

/// Everything needed to iterate on one level: space, Galerkin system and
/// the prepared multilevel workspace.
struct LevelSystem {
  std::shared_ptr<const FeSpace> space;
  std::shared_ptr<const SparseMatrix> A;
  std::shared_ptr<const Vector> b;
  std::shared_ptr<const MgWorkspace> workspace;
};
LevelSystem build_level_system(const MeshHierarchy& h, const Problem& problem, int p,
                               MgOptions opts = {});

/// Solver of the given kind on a prepared level system.
IterativeSolver make_solver(SolverKind kind, const LevelSystem& sys, Vector x0);

struct AfemConfig {
  double theta = 0.5;
  double lambda_stop = 0.1;
  SolverKind solver = SolverKind::kGpcgMg;
  int p = 1;
  int max_level = -1;          // stop after this level (negative: unlimited)
  long long max_dofs = 0;      // stop once N_l reaches this (0: unlimited)
  long long max_cum_dofs = 0;  // stop once sum of N_l reaches this (0: unlimited)
  int max_solver_steps = 100;  // per level
  bool with_exact = false;     // quasi-error via direct solves
  RefineRule refine_rule = RefineRule::kAllEdges;  // marked elements get all three edges bisected
};

struct AfemStep {
  int level = 0;
  int k = 0;
  int n_elements = 0;
  int n_dofs = 0;
  double eta = 0.0;
  double increment = 0.0;
  long long cum_dofs = 0;
  long long cum_cost = 0;
  double wall_s = 0.0;
  double quasi_error = -1.0;
};

struct AfemLevel {
  int level = 0;
  int k_final = 0;
  int n_elements = 0;
  int n_dofs = 0;
  int n_marked = 0;
  double eta = 0.0;
  long long cum_dofs = 0;
  long long cum_cost = 0;
  bool aborted = false;
};

struct AfemLog {
  std::vector<AfemStep> steps;
  std::vector<AfemLevel> levels;
  std::string stop_reason;
};

struct AfemResult {
  AfemLog log;
  MeshHierarchy hierarchy;
  Vector x;  // final iterate on the finest level
};

/// Minimal set with sum of eta2 >= theta * total: descending indicator,
/// ties by ascending element id.
std::vector<int> doerfler_mark(const IndicatorField& eta, double theta);

AfemResult adaptive_loop(const Problem& problem, const AfemConfig& config);

/// Least-squares slope of log(y) over log(x) on the last half of the points.
double rate_fit(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace afemmg
