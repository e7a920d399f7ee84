#pragma once

#include "afemmg/afem.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace afemmg {

/// Worker count for experiment sweeps: hardware concurrency capped by the
/// AFEMMG_THREADS environment variable.
int worker_count();
/// Runs fn(0..n-1) on up to worker_count() threads; rethrows the first error.
void parallel_for(int n, const std::function<void(int)>& fn);

/// Hierarchy T_0..T_level from an AFEM run driven by the MG solver.
MeshHierarchy generate_hierarchy(const Problem& problem, int p, int level, double theta = 0.5,
                                 double lambda_stop = 0.1,
                                 RefineRule rule = RefineRule::kAllEdges);

struct ContractionRow {
  std::string solver;
  int p = 0;
  int level = 0;
  int k = 0;
  double energy_error = 0.0;
  double q_k = 0.0;  // e^k / e^{k-1}; 0 for k = 0
};

struct RobustnessRow {
  std::string solver;
  int p = 0;
  int level = 0;
  int steps = 0;
  bool converged = false;
};

struct FailureRow {
  std::string solver;
  int p = 0;
  double final_error = 0.0;
  int steps = 0;
};

struct ConditionRow {
  std::string precond;
  int p = 0;
  int level = 0;
  double lmin = 0.0;
  double lmax = 0.0;
  double cond = 0.0;
};

/// Shared settings of the solver studies.
struct StudyConfig {
  std::vector<SolverKind> solvers;
  std::vector<int> degrees;
  std::vector<int> levels;
  double theta = 0.5;        // hierarchy generation
  double lambda_stop = 0.1;  // hierarchy generation
  RefineRule refine_rule = RefineRule::kAllEdges;
  double energy_tol = 1e-13;
  int max_iter = 500;
  std::uint64_t seed = 0;
  int lanczos_steps = 60;
};

/// Energy-error history from x0 = 0 until the energy error drops below
/// energy_tol (one hierarchy per degree at levels.back()).
std::vector<ContractionRow> run_contraction(const Problem& problem, const StudyConfig& cfg);
/// Steps to energy_tol per (solver, p, level).
std::vector<RobustnessRow> run_robustness(const Problem& problem, const StudyConfig& cfg);
/// Final error after at most max_iter steps; flags are not enforced so PCG
/// can be driven with non-symmetric preconditioners.
std::vector<FailureRow> run_failure(const Problem& problem, const StudyConfig& cfg);
/// Lanczos extremes of B A per (preconditioner, p, level).
std::vector<ConditionRow> run_condition(const Problem& problem, const std::vector<PrecondKind>& precs,
                                        const StudyConfig& cfg);

void write_csv(std::ostream& os, const std::vector<ContractionRow>& rows);
void write_csv(std::ostream& os, const std::vector<RobustnessRow>& rows);
void write_csv(std::ostream& os, const std::vector<FailureRow>& rows);
void write_csv(std::ostream& os, const std::vector<ConditionRow>& rows);
void write_csv(std::ostream& os, const AfemLog& log);

}  // namespace afemmg
