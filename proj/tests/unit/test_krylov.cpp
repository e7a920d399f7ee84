#include "afemmg/assembly.hpp"
#include "afemmg/krylov.hpp"
#include "afemmg/problems.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

using namespace afemmg;
using namespace afemmg::test;

namespace {

SparseMatrix sparse(const DenseMatrix& d) { return d.sparseView(); }

DenseMatrix random_spd(int n, std::mt19937_64& rng, double shift = 1.0) {
  DenseMatrix M(n, n);
  std::normal_distribution<double> g;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) M(i, j) = g(rng);
  }
  DenseMatrix A = M * M.transpose() + shift * DenseMatrix::Identity(n, n);
  return 0.5 * (A + A.transpose());
}

SparseMatrix poisson_system(int levels, int p, Vector* b) {
  const Problem pr = make_problem("lshape_poisson");
  MeshHierarchy h = uniform_hierarchy(*pr.mesh, levels);
  const FeSpace s(h.level_ptr(h.top()), p);
  if (b) *b = assemble_load(s, pr.f);
  return assemble_stiffness(s, pr.K);
}

// Textbook preconditioned CG on dense data, counted until |r|^2 < tau.
int reference_pcg(const DenseMatrix& A, const DenseMatrix& Binv, const Vector& b, double tau) {
  Vector x = Vector::Zero(b.size());
  Vector r = b;
  Vector z = Binv * r;
  Vector p = z;
  double rz = r.dot(z);
  int k = 0;
  while (r.squaredNorm() >= tau) {
    const Vector Ap = A * p;
    const double alpha = rz / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    ++k;
    if (r.squaredNorm() < tau) break;
    z = Binv * r;
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  return k;
}

}  // namespace

TEST(Cg, IdentityConvergesInOneStep) {
  const SparseMatrix I = sparse(DenseMatrix::Identity(5, 5));
  Vector x = Vector::Zero(5);
  SolveOptions o;
  o.tau = 1e-30;
  const SolveReport r = cg(I, Vector::LinSpaced(5, 1, 5), x, o);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.converged);
}

TEST(Cg, FiniteTerminationTwoByTwo) {
  DenseMatrix A(2, 2);
  A << 1, 0, 0, 4;
  Vector x = Vector::Zero(2);
  SolveOptions o;
  o.tau = 1e-28;
  const SolveReport r = cg(sparse(A), Vector::Ones(2), x, o);
  EXPECT_EQ(r.iterations, 2);
  EXPECT_NEAR(x[0], 1.0, 1e-14);
  EXPECT_NEAR(x[1], 0.25, 1e-14);
}

TEST(Cg, RandomSpdFiftyWithinFiftySteps) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    const DenseMatrix A = random_spd(50, rng, 50.0);
    const Vector b = random_vector(50, rng);
    Vector x = Vector::Zero(50);
    SolveOptions o;
    o.tau = 1e-20;  // |r|^2 < tau  <=>  |r| < 1e-10
    o.max_iter = 50;
    const SolveReport r = cg(sparse(A), b, x, o);
    EXPECT_LE(r.iterations, 50);
    EXPECT_LT((b - A * x).norm(), 1e-10);
  }
}

TEST(Cg, CapAndBreakdown) {
  std::mt19937_64 rng(2);
  const DenseMatrix A = random_spd(30, rng);
  Vector x = Vector::Zero(30);
  SolveOptions o;
  o.tau = 1e-40;
  o.max_iter = 3;
  EXPECT_THROW(cg(sparse(A), random_vector(30, rng), x, o), Error);
  o.throw_on_cap = false;
  x.setZero();
  EXPECT_EQ(cg(sparse(A), random_vector(30, rng), x, o).iterations, 3);
  // Indefinite matrix: (p, Ap) = 0 on the first step.
  DenseMatrix N(2, 2);
  N << 1, 0, 0, -1;
  x = Vector::Zero(2);
  o.max_iter = 10;
  try {
    cg(sparse(N), Vector::Ones(2), x, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBreakdown);
  }
}

TEST(Pcg, IdentityPreconditionerReproducesCg) {
  Vector b;
  const SparseMatrix A = poisson_system(3, 2, &b);
  IterativeSolver c(KrylovMethod::kCg, A, b, Vector::Zero(b.size()));
  IterativeSolver p(KrylovMethod::kPcg, A, b, Vector::Zero(b.size()), PreconditionerHandle::identity());
  for (int k = 0; k < 30; ++k) {
    c.step();
    p.step();
    EXPECT_LE((c.x() - p.x()).norm(), 1e-14 * std::max(1.0, c.x().norm()));
  }
}

TEST(Pcg, ExactPreconditionerOneStep) {
  Vector b;
  const SparseMatrix A = poisson_system(1, 2, &b);
  ASSERT_LE(A.rows(), 100);
  const DenseMatrix Ainv = DenseMatrix(A).inverse();
  Vector x = Vector::Zero(b.size());
  SolveOptions o;
  o.tau = 1e-24;
  const SolveReport r = pcg(A, PreconditionerHandle::dense(Ainv), b, x, o);
  EXPECT_EQ(r.iterations, 1);
  Vector y = Vector::Zero(b.size());
  o.tau = 1e-12;
  EXPECT_EQ(gpcg(A, PreconditionerHandle::dense(Ainv), b, y, o).iterations, 1);
}

TEST(Pcg, JacobiMatchesReferenceImplementation) {
  const Problem pr = make_problem("manufactured_sine");
  MeshHierarchy h = uniform_hierarchy(*pr.mesh, 3);
  const FeSpace s(h.level_ptr(3), 2);
  const SparseMatrix A = assemble_stiffness(s, pr.K);
  const Vector b = assemble_load(s, pr.f);
  const Vector dinv = DenseMatrix(A).diagonal().cwiseInverse();
  const DenseMatrix Binv = dinv.asDiagonal();
  const double tau = 1e-20;
  Vector x = Vector::Zero(b.size());
  SolveOptions o;
  o.tau = tau;
  const SolveReport r = pcg(A, PreconditionerHandle::dense(Binv, "jacobi"), b, x, o);
  EXPECT_EQ(r.iterations, reference_pcg(DenseMatrix(A), Binv, b, tau));
}

TEST(Pcg, FlagViolationAndBreakdown) {
  Vector b;
  const SparseMatrix A = poisson_system(1, 1, &b);
  PreconditionerHandle nonlinear{[](const Vector& r) { return Vector(r * (1.0 + r.norm())); }, false, false, "nl"};
  Vector x = Vector::Zero(b.size());
  SolveOptions o;
  o.tau = 1e-20;
  try {
    pcg(A, nonlinear, b, x, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFlagViolation);
  }
  PreconditionerHandle negative{[](const Vector& r) { return Vector(-r); }, true, true, "neg"};
  try {
    gpcg(A, negative, b, x, o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBreakdown);
  }
}

TEST(Gpcg, MatchesPcgForLinearSymmetricPreconditioner) {
  Vector b;
  const SparseMatrix A = poisson_system(3, 2, &b);
  ASSERT_GE(A.rows(), 150);
  std::mt19937_64 rng(4);
  // SPD preconditioner: diag(A)^{-1} scaled by a random positive diagonal congruence.
  Vector w(A.rows());
  for (int i = 0; i < w.size(); ++i) w[i] = 0.5 + (rng() % 1000) / 1000.0;
  const DenseMatrix B = (w.cwiseProduct(DenseMatrix(A).diagonal().cwiseInverse())).asDiagonal();
  IterativeSolver p(KrylovMethod::kPcg, A, b, Vector::Zero(b.size()), PreconditionerHandle::dense(B));
  IterativeSolver g(KrylovMethod::kGpcg, A, b, Vector::Zero(b.size()), PreconditionerHandle::dense(B));
  for (int k = 0; k < 20; ++k) {
    p.step();
    g.step();
    EXPECT_LE(rel_diff(p.x(), g.x()), 1e-12) << k;
  }
}

TEST(Pcg, EnergyErrorIsMonotone) {
  Vector b;
  const SparseMatrix A = poisson_system(3, 3, &b);
  const Vector exact = direct_solve(A, b);
  const DenseMatrix B = DenseMatrix(A).diagonal().cwiseInverse().asDiagonal();
  Vector x = Vector::Zero(b.size());
  SolveOptions o;
  o.exact = &exact;
  o.energy_tol = 1e-12;
  o.max_iter = 2000;
  const SolveReport r = pcg(A, PreconditionerHandle::dense(B), b, x, o);
  EXPECT_TRUE(r.converged);
  for (std::size_t k = 1; k < r.energy_errors.size(); ++k) {
    EXPECT_LE(r.energy_errors[k], r.energy_errors[k - 1] * (1 + 1e-12));
  }
}

TEST(Direct, IdentityCrissCrossAndCgAgreement) {
  const SparseMatrix I = sparse(DenseMatrix::Identity(4, 4));
  const Vector b = Vector::LinSpaced(4, -1, 2);
  EXPECT_EQ((direct_solve(I, b) - b).norm(), 0.0);

  const Problem pr = make_problem("manufactured_sine");
  const FeSpace s(pr.mesh, 1);
  const Vector x = direct_solve(assemble_stiffness(s, DiffusionField::identity()),
                                assemble_load(s, [](const Point&) { return 1.0; }));
  EXPECT_NEAR(x[0], 1.0 / 12.0, 1e-15);

  Vector bb;
  const SparseMatrix A = poisson_system(4, 2, &bb);
  ASSERT_GE(A.rows(), 1000);
  const Vector xd = direct_solve(A, bb);
  EXPECT_LE((A * xd - bb).norm(), 1e-10 * bb.norm());
  Vector xc = Vector::Zero(bb.size());
  SolveOptions o;
  o.tau = 1e-30;
  o.max_iter = 5000;
  o.throw_on_cap = false;
  cg(A, bb, xc, o);
  EXPECT_LE((xc - xd).norm(), 1e-9 * xd.norm());
}

TEST(Direct, RejectsIndefinite) {
  DenseMatrix N(2, 2);
  N << 1, 0, 0, -1;
  EXPECT_THROW(direct_solve(sparse(N), Vector::Ones(2)), Error);
}

TEST(Lanczos, TrivialOperators) {
  Vector b;
  const SparseMatrix A = poisson_system(1, 2, &b);
  const EigenEstimate id = extreme_eigs(sparse(DenseMatrix::Identity(20, 20)), PreconditionerHandle::identity(), 30, 1);
  EXPECT_NEAR(id.lmin, 1.0, 1e-12);
  EXPECT_NEAR(id.lmax, 1.0, 1e-12);
  const EigenEstimate ex = extreme_eigs(A, PreconditionerHandle::dense(DenseMatrix(A).inverse()), 30, 1);
  EXPECT_NEAR(ex.lmin, 1.0, 1e-8);
  EXPECT_NEAR(ex.lmax, 1.0, 1e-8);
}

TEST(Lanczos, MatchesDenseOracleAndSplitForm) {
  Vector b;
  const SparseMatrix A = poisson_system(2, 2, &b);
  const DenseMatrix Ad = DenseMatrix(A);
  const DenseMatrix B = Ad.diagonal().cwiseInverse().asDiagonal();
  const EigenEstimate lz = extreme_eigs(A, PreconditionerHandle::dense(B), 60, 3);
  const EigenEstimate dn = dense_extreme_eigs(Ad, B);
  EXPECT_NEAR(lz.cond(), dn.cond(), 0.01 * dn.cond());
  // Split form B^{1/2} A B^{1/2}.
  const DenseMatrix Bh = Ad.diagonal().cwiseInverse().cwiseSqrt().asDiagonal();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(Bh * Ad * Bh, Eigen::EigenvaluesOnly);
  const double split = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  EXPECT_NEAR(lz.cond(), split, 0.01 * split);
}

TEST(Probe, DetectsAsymmetryAndNonlinearity) {
  std::mt19937_64 rng(8);
  const DenseMatrix S = random_spd(12, rng);
  const ProbeResult ok = probe_preconditioner(PreconditionerHandle::dense(S), 12, 20, 1);
  EXPECT_LT(ok.linearity, 1e-13);
  EXPECT_LT(ok.symmetry, 1e-13);
  EXPECT_GT(ok.min_rayleigh, 0.0);
  DenseMatrix N = S;
  N(0, 1) += 1.0;
  EXPECT_GT(probe_preconditioner(PreconditionerHandle::dense(N), 12, 20, 1).symmetry, 1e-6);
  PreconditionerHandle nl{[](const Vector& r) { return Vector(r * r.norm()); }, false, false, "nl"};
  EXPECT_GT(probe_preconditioner(nl, 12, 20, 1).linearity, 1e-3);
}
