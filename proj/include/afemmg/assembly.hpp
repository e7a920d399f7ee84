#pragma once

#include "afemmg/common.hpp"
#include "afemmg/fespace.hpp"
#include "afemmg/mesh.hpp"

#include <Eigen/Cholesky>

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace afemmg {

/// Symmetric positive definite diffusion coefficient. Evaluators receive the
/// physical point and the id of the initial triangle containing it, so
/// coefficients may jump across initial-mesh edges.
struct DiffusionField {
  std::function<Eigen::Matrix2d(const Point&, int)> K;
  /// Row-wise divergence of K; empty means zero.
  std::function<Eigen::Vector2d(const Point&, int)> div_K;
  bool piecewise_constant = true;

  static DiffusionField identity();
  /// K = values[ancestor0] * I.
  static DiffusionField per_element(std::vector<double> values);
  DiffusionField scaled(double c) const;
};

using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Eigen::Vector2d(const Point&)>;

/// Galerkin matrix on the free dofs; bitwise symmetric.
SparseMatrix assemble_stiffness(const FeSpace& space, const DiffusionField& K);
Vector assemble_load(const FeSpace& space, const ScalarField& f);

/// Lowest-order stiffness rows of a level for a vertex subset: rows follow
/// `rows`, columns are all vertex ids of the level (boundary columns empty).
struct LevelBlock {
  std::vector<int> rows;
  SparseMatrix B;
  Vector diag;
};
LevelBlock assemble_level_block(const MeshLevel& level, std::vector<int> rows, const DiffusionField& K);

/// Free vertices of V_l^+, ascending.
std::vector<int> free_v_plus(const MeshHierarchy& h, int l);
/// Diagonal of the level-l lowest-order matrix on free_v_plus(h, l).
Vector assemble_level_diagonal(const MeshHierarchy& h, int l, const DiffusionField& K);

/// Restriction of A to the open-patch dofs of a vertex, with its Cholesky
/// factorization.
struct PatchMatrix {
  int vertex = -1;
  std::vector<int> dofs;
  DenseMatrix A;
  Eigen::LLT<DenseMatrix> llt;
};
PatchMatrix assemble_patch_matrix(const FeSpace& space, const SparseMatrix& A, int z);

/// Dense principal submatrix A(dofs, dofs) for ascending dofs.
DenseMatrix principal_submatrix(const SparseMatrix& A, std::span<const int> dofs);

double energy_norm(const SparseMatrix& A, const Vector& x);

/// |||u - u_h|||^2 by quadrature for an exact gradient.
double energy_error_squared(const FeSpace& space, const DiffusionField& K, const Vector& x,
                            const VectorField& grad_exact, int extra_degree = 6);
/// ||grad u_h||^2 by quadrature.
double gradient_norm_squared(const FeSpace& space, const Vector& x);

/// Matrix Market coordinate dump (symmetric, lower triangle).
void write_matrix_market(std::ostream& os, const SparseMatrix& A);

}  // namespace afemmg
