#include "afemmg/experiments.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

using namespace afemmg;

namespace {

StudyConfig small_study() {
  StudyConfig cfg;
  cfg.solvers = {SolverKind::kGpcgMg, SolverKind::kPcgSMg};
  cfg.degrees = {1, 2};
  cfg.levels = {2, 4};
  cfg.energy_tol = 1e-10;
  return cfg;
}

template <class Rows>
std::string csv(const Rows& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

}  // namespace

TEST(ParallelFor, VisitsEveryIndexAndRethrows) {
  std::atomic<int> sum{0};
  parallel_for(100, [&](int i) { sum += i; });
  EXPECT_EQ(sum.load(), 4950);
  EXPECT_THROW(parallel_for(10, [](int i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(ParallelFor, ThreadCapFromEnvironment) {
  setenv("AFEMMG_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1);
  unsetenv("AFEMMG_THREADS");
  EXPECT_GE(worker_count(), 1);
}

TEST(Studies, DeterministicCsv) {
  const Problem pr = make_problem("lshape_poisson");
  const StudyConfig cfg = small_study();
  EXPECT_EQ(csv(run_robustness(pr, cfg)), csv(run_robustness(pr, cfg)));
  EXPECT_EQ(csv(run_contraction(pr, cfg)), csv(run_contraction(pr, cfg)));
  const auto cond = run_condition(pr, {PrecondKind::kAs, PrecondKind::kBpx}, cfg);
  EXPECT_EQ(csv(cond), csv(run_condition(pr, {PrecondKind::kAs, PrecondKind::kBpx}, cfg)));
  for (const auto& r : cond) {
    EXPECT_TRUE(std::isfinite(r.cond));
    EXPECT_GE(r.cond, 1.0);
  }
}

TEST(Studies, CsvHeaders) {
  const Problem pr = make_problem("lshape_poisson");
  StudyConfig cfg = small_study();
  const std::string rob = csv(run_robustness(pr, cfg));
  EXPECT_EQ(rob.substr(0, rob.find('\n')), "solver,p,level,steps");
  const std::string fail = csv(run_failure(pr, cfg));
  EXPECT_EQ(fail.substr(0, fail.find('\n')), "solver,p,final_error,steps");
  AfemConfig ac;
  ac.max_level = 2;
  const std::string log = csv(adaptive_loop(pr, ac).log);
  EXPECT_EQ(log.substr(0, log.find('\n')), "level,k,n_elements,n_dofs,eta,increment,cum_dofs,cum_cost,wall_s");
}

TEST(Studies, ContractionRowsEndBelowTolerance) {
  const Problem pr = make_problem("checkerboard");
  StudyConfig cfg = small_study();
  cfg.solvers = {SolverKind::kMg};
  const auto rows = run_contraction(pr, cfg);
  ASSERT_FALSE(rows.empty());
  EXPECT_LT(rows.back().energy_error, cfg.energy_tol);
  for (const auto& r : rows) {
    EXPECT_EQ(r.level, 4);
    if (r.k > 0) EXPECT_LT(r.q_k, 1.0);
  }
}

TEST(Studies, InvalidConfigurations) {
  const Problem pr = make_problem("lshape_poisson");
  StudyConfig cfg = small_study();
  EXPECT_THROW(run_condition(pr, {PrecondKind::kMg}, cfg), Error);
  cfg.levels.clear();
  EXPECT_THROW(run_robustness(pr, cfg), Error);
  EXPECT_THROW(generate_hierarchy(pr, 1, -1), Error);
}
