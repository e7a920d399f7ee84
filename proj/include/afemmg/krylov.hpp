#pragma once

#include "afemmg/common.hpp"

#include <Eigen/SparseCholesky>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace afemmg {

/// r -> B[r]. May be non-linear; the flags declare what callers can assume.
struct PreconditionerHandle {
  std::function<Vector(const Vector&)> apply;
  bool is_linear = true;
  bool is_symmetric = true;
  std::string name;

  static PreconditionerHandle identity();
  static PreconditionerHandle dense(DenseMatrix B, std::string name = "dense");
};

enum class KrylovMethod { kCg, kPcg, kGpcg, kFixedPoint };

struct SolveOptions {
  double tau = 0.0;              // residual test per method
  int max_iter = 500;
  const Vector* exact = nullptr; // enables energy-error history
  double energy_tol = 0.0;       // stop when |x* - x^k|_A < energy_tol (needs exact)
  bool throw_on_cap = true;
  bool enforce_flags = true;     // PCG requires linear symmetric B
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;                 // |r^k|_2
  double energy_error = -1.0;            // |x* - x^k|_A, -1 without exact
  std::vector<double> energy_errors;     // k = 0..iterations
  std::vector<double> factors;           // q_k = e^{k+1} / e^k
  bool converged = false;
};

/// Stateful CG / PCG / GPCG / preconditioned Richardson iteration exposing
/// single steps. One preconditioner application per step; the new search
/// direction is formed lazily at the start of the following step.
class IterativeSolver {
 public:
  IterativeSolver(KrylovMethod method, const SparseMatrix& A, const Vector& b, Vector x0,
                  PreconditionerHandle B = PreconditionerHandle::identity());

  void step();
  const Vector& x() const { return x_; }
  const Vector& r() const { return r_; }
  int iterations() const { return k_; }
  double residual_norm() const { return r_.norm(); }
  /// Stop test of the method: |r|^2 < tau for CG/PCG, |r| < tau otherwise.
  bool residual_test(double tau) const;
  KrylovMethod method() const { return method_; }

 private:
  KrylovMethod method_;
  const SparseMatrix& A_;
  const Vector& b_;
  PreconditionerHandle B_;
  Vector x_, r_, p_, z_, r_prev_;
  double rz_ = 0.0;
  int k_ = 0;
};

/// Runs the solver until its stop test, the energy tolerance, or the cap.
SolveReport run_solver(IterativeSolver& solver, const SparseMatrix& A, const SolveOptions& opts);

SolveReport cg(const SparseMatrix& A, const Vector& b, Vector& x, const SolveOptions& opts);
SolveReport pcg(const SparseMatrix& A, const PreconditionerHandle& B, const Vector& b, Vector& x,
                const SolveOptions& opts);
SolveReport gpcg(const SparseMatrix& A, const PreconditionerHandle& B, const Vector& b, Vector& x,
                 const SolveOptions& opts);
SolveReport fixed_point(const SparseMatrix& A, const PreconditionerHandle& B, const Vector& b,
                        Vector& x, const SolveOptions& opts);

/// Sparse LDL^T with two steps of iterative refinement.
class DirectSolver {
 public:
  explicit DirectSolver(const SparseMatrix& A);
  Vector solve(const Vector& b) const;
  int size() const { return n_; }

 private:
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> A_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double, Eigen::ColMajor, int>> ldlt_;
  int n_ = 0;
};

Vector direct_solve(const SparseMatrix& A, const Vector& b);

struct EigenEstimate {
  double lmin = 0.0;
  double lmax = 0.0;
  int steps = 0;
  double cond() const { return lmax / lmin; }
};

/// Ritz extremes of x -> B[A x], self-adjoint in the A inner product, by
/// Lanczos with full reorthogonalization (m <= 60 steps, up to 3 restarts).
EigenEstimate extreme_eigs(const SparseMatrix& A, const PreconditionerHandle& B, int m,
                           std::uint64_t seed);

/// Dense oracle: eigenvalues of B A for an SPD matrix B given densely.
EigenEstimate dense_extreme_eigs(const DenseMatrix& A, const DenseMatrix& B);

/// Dense matrix of a linear preconditioner, column by column.
DenseMatrix materialize(const PreconditionerHandle& B, int n);

struct ProbeResult {
  double linearity = 0.0;   // max relative defect
  double symmetry = 0.0;    // max relative defect
  double min_rayleigh = 0.0;  // min (B y, y) / |y|^2
};
ProbeResult probe_preconditioner(const PreconditionerHandle& B, int n, int trials,
                                 std::uint64_t seed);

}  // namespace afemmg
