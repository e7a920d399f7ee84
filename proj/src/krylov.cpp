#include "afemmg/krylov.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace afemmg {

namespace {

constexpr double kTinyDenominator = 1e-300;

Vector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

}  // namespace

PreconditionerHandle PreconditionerHandle::identity() {
  return {[](const Vector& r) { return r; }, true, true, "identity"};
}

PreconditionerHandle PreconditionerHandle::dense(DenseMatrix B, std::string name) {
  const bool sym = (B - B.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, B.cwiseAbs().maxCoeff());
  return {[B = std::move(B)](const Vector& r) -> Vector { return B * r; }, true, sym, std::move(name)};
}

IterativeSolver::IterativeSolver(KrylovMethod method, const SparseMatrix& A, const Vector& b,
                                 Vector x0, PreconditionerHandle B)
    : method_(method), A_(A), b_(b), B_(std::move(B)), x_(std::move(x0)) {
  if (A.rows() != A.cols() || A.rows() != b.size() || x_.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "solver inputs");
  }
  r_ = b_ - A_ * x_;
}

bool IterativeSolver::residual_test(double tau) const {
  const double rr = r_.squaredNorm();
  if (method_ == KrylovMethod::kCg || method_ == KrylovMethod::kPcg) return rr < tau;
  return std::sqrt(rr) < tau;
}

void IterativeSolver::step() {
  if (r_.squaredNorm() == 0.0) {
    ++k_;
    return;
  }
  if (method_ == KrylovMethod::kFixedPoint) {
    x_ += B_.apply(r_);
    r_ = b_ - A_ * x_;
    ++k_;
    return;
  }

  if (method_ == KrylovMethod::kCg) {
    const double rr = r_.squaredNorm();
    if (k_ == 0) {
      p_ = r_;
    } else {
      p_ = r_ + (rr / rz_) * p_;
    }
    rz_ = rr;
  } else {
    z_ = B_.apply(r_);
    const double rz = z_.dot(r_);
    if (!(rz > 0.0)) {
      throw Error(ErrorCode::kBreakdown, "(B[r], r) <= 0 for preconditioner " + B_.name);
    }
    if (k_ == 0) {
      p_ = z_;
    } else {
      const double num = method_ == KrylovMethod::kPcg ? rz : rz - z_.dot(r_prev_);
      p_ = z_ + (num / rz_) * p_;
    }
    rz_ = rz;
  }

  const Vector Ap = A_ * p_;
  const double pAp = p_.dot(Ap);
  if (!(pAp > kTinyDenominator)) {
    throw Error(ErrorCode::kBreakdown, "|p|_A^2 vanishes");
  }
  const double alpha = rz_ / pAp;
  x_ += alpha * p_;
  if (method_ == KrylovMethod::kGpcg) r_prev_ = r_;
  r_ -= alpha * Ap;
  ++k_;
}

static double a_distance(const SparseMatrix& A, const Vector& a, const Vector& b) {
  const Vector d = a - b;
  return std::sqrt(std::max(0.0, d.dot(A * d)));
}

SolveReport run_solver(IterativeSolver& solver, const SparseMatrix& A, const SolveOptions& opts) {
  SolveReport rep;
  const bool track = opts.exact != nullptr;
  double e = track ? a_distance(A, *opts.exact, solver.x()) : -1.0;
  if (track) rep.energy_errors.push_back(e);
  const int start = solver.iterations();
  while (true) {
    if (track && opts.energy_tol > 0.0 && e < opts.energy_tol) {
      rep.converged = true;
      break;
    }
    if (opts.tau > 0.0 && solver.residual_test(opts.tau)) {
      rep.converged = true;
      break;
    }
    if (solver.r().squaredNorm() == 0.0) {
      rep.converged = true;
      break;
    }
    if (solver.iterations() - start >= opts.max_iter) {
      if (opts.throw_on_cap) {
        throw Error(ErrorCode::kIterationCapExceeded,
                    "no convergence within " + std::to_string(opts.max_iter) + " iterations");
      }
      break;
    }
    solver.step();
    if (track) {
      const double e_new = a_distance(A, *opts.exact, solver.x());
      rep.factors.push_back(e > 0.0 ? e_new / e : 0.0);
      rep.energy_errors.push_back(e_new);
      e = e_new;
    }
  }
  rep.iterations = solver.iterations() - start;
  rep.residual = solver.residual_norm();
  rep.energy_error = e;
  return rep;
}

namespace {

SolveReport run_method(KrylovMethod method, const SparseMatrix& A, const PreconditionerHandle& B,
                       const Vector& b, Vector& x, const SolveOptions& opts) {
  IterativeSolver solver(method, A, b, x, B);
  SolveReport rep = run_solver(solver, A, opts);
  x = solver.x();
  return rep;
}

}  // namespace

SolveReport cg(const SparseMatrix& A, const Vector& b, Vector& x, const SolveOptions& opts) {
  return run_method(KrylovMethod::kCg, A, PreconditionerHandle::identity(), b, x, opts);
}

SolveReport pcg(const SparseMatrix& A, const PreconditionerHandle& B, const Vector& b, Vector& x,
                const SolveOptions& opts) {
  if (opts.enforce_flags && !(B.is_linear && B.is_symmetric)) {
    throw Error(ErrorCode::kFlagViolation, "PCG needs a linear symmetric preconditioner, got " + B.name);
  }
  return run_method(KrylovMethod::kPcg, A, B, b, x, opts);
}

SolveReport gpcg(const SparseMatrix& A, const PreconditionerHandle& B, const Vector& b, Vector& x,
                 const SolveOptions& opts) {
  return run_method(KrylovMethod::kGpcg, A, B, b, x, opts);
}

SolveReport fixed_point(const SparseMatrix& A, const PreconditionerHandle& B, const Vector& b,
                        Vector& x, const SolveOptions& opts) {
  return run_method(KrylovMethod::kFixedPoint, A, B, b, x, opts);
}

DirectSolver::DirectSolver(const SparseMatrix& A) : A_(A), n_(static_cast<int>(A.rows())) {
  if (A.rows() != A.cols()) throw Error(ErrorCode::kDimensionMismatch, "direct solver needs a square matrix");
  if (n_ == 0) return;
  ldlt_.compute(A_);
  if (ldlt_.info() != Eigen::Success) throw Error(ErrorCode::kFactorizationFailure, "sparse LDL^T failed");
  if (!(ldlt_.vectorD().minCoeff() > 0.0)) throw Error(ErrorCode::kNonSpd, "matrix is not positive definite");
}

Vector DirectSolver::solve(const Vector& b) const {
  if (b.size() != n_) throw Error(ErrorCode::kDimensionMismatch, "direct solve right-hand side");
  if (n_ == 0) return Vector();
  Vector x = ldlt_.solve(b);
  for (int it = 0; it < 2; ++it) {
    const Vector r = b - A_ * x;
    x += ldlt_.solve(r);
  }
  return x;
}

Vector direct_solve(const SparseMatrix& A, const Vector& b) { return DirectSolver(A).solve(b); }

EigenEstimate extreme_eigs(const SparseMatrix& A, const PreconditionerHandle& B, int m,
                           std::uint64_t seed) {
  const int n = static_cast<int>(A.rows());
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "empty operator");
  m = std::min({m, n, 60});
  for (int attempt = 0; attempt <= 3; ++attempt) {
    std::mt19937_64 rng(seed + 7919ULL * attempt);
    Vector v = random_vector(n, rng);
    Vector Av = A * v;
    const double nrm = std::sqrt(v.dot(Av));
    if (!(nrm > kTinyDenominator)) continue;
    std::vector<Vector> V{v / nrm}, AV{Av / nrm};
    std::vector<double> alpha, beta;
    bool restart = false;
    for (int j = 0; j < m; ++j) {
      Vector w = B.apply(AV[j]);
      const double a = w.dot(AV[j]);
      alpha.push_back(a);
      w -= a * V[j];
      if (j > 0) w -= beta[j - 1] * V[j - 1];
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t i = 0; i < V.size(); ++i) w -= w.dot(AV[i]) * V[i];
      }
      if (j == m - 1) break;
      Vector Aw = A * w;
      const double bnorm2 = w.dot(Aw);
      if (!std::isfinite(bnorm2)) {
        restart = true;
        break;
      }
      const double b = std::sqrt(std::max(0.0, bnorm2));
      if (b <= 1e-12 * std::max(1.0, std::abs(a))) break;  // invariant subspace found
      beta.push_back(b);
      V.push_back(w / b);
      AV.push_back(Aw / b);
    }
    if (restart) continue;
    const int k = static_cast<int>(alpha.size());
    DenseMatrix T = DenseMatrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(T, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(), k};
  }
  throw Error(ErrorCode::kBreakdown, "Lanczos failed after 3 restarts");
}

EigenEstimate dense_extreme_eigs(const DenseMatrix& A, const DenseMatrix& B) {
  Eigen::LLT<DenseMatrix> llt(A);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::kNonSpd, "dense oracle needs SPD A");
  const DenseMatrix L = llt.matrixL();
  const DenseMatrix S = L.transpose() * (0.5 * (B + B.transpose())) * L;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(S, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff(), static_cast<int>(A.rows())};
}

DenseMatrix materialize(const PreconditionerHandle& B, int n) {
  DenseMatrix M(n, n);
  for (int j = 0; j < n; ++j) M.col(j) = B.apply(Vector::Unit(n, j));
  return M;
}

ProbeResult probe_preconditioner(const PreconditionerHandle& B, int n, int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  ProbeResult res;
  res.min_rayleigh = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    const Vector r1 = random_vector(n, rng);
    const Vector r2 = random_vector(n, rng);
    const double a = coef(rng), b = coef(rng);
    const Vector B1 = B.apply(r1);
    const Vector B2 = B.apply(r2);
    const Vector Bc = B.apply(a * r1 + b * r2);
    const Vector comb = a * B1 + b * B2;
    res.linearity = std::max(res.linearity, (Bc - comb).norm() / std::max(comb.norm(), 1e-300));
    const double s12 = B1.dot(r2), s21 = r1.dot(B2);
    const double scale = std::max(B1.norm() * r2.norm(), r1.norm() * B2.norm());
    res.symmetry = std::max(res.symmetry, std::abs(s12 - s21) / std::max(scale, 1e-300));
    res.min_rayleigh = std::min(res.min_rayleigh, B1.dot(r1) / r1.squaredNorm());
  }
  return res;
}

}  // namespace afemmg
