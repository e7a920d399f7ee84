#include "afemmg/assembly.hpp"

#include "afemmg/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace afemmg {

namespace {

int stiffness_degree(int p, const DiffusionField& K) {
  return 2 * p - 2 + (K.piecewise_constant ? 0 : 2);
}

void check_coefficient(const Eigen::Matrix2d& k) {
  const double scale = k.cwiseAbs().maxCoeff();
  if (!std::isfinite(scale) || std::abs(k(0, 1) - k(1, 0)) > 1e-12 * scale) {
    throw Error(ErrorCode::kNonSpd, "diffusion coefficient not symmetric");
  }
  const double tr = k(0, 0) + k(1, 1);
  const double det = k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0);
  if (tr <= 0.0 || det <= 0.0) throw Error(ErrorCode::kNonSpd, "diffusion coefficient not positive definite");
}

// Upper-triangle element matrix (i <= j) for the space's reference element.
void element_stiffness(const MeshLevel& mesh, int t, const Tabulation& tab,
                       const TriangleRule& rule, const DiffusionField& K, DenseMatrix& loc) {
  const AffineMap map(mesh, t);
  const int n = tab.num_nodes;
  const int ancestor = mesh.triangle(t).ancestor0;
  loc.setZero(n, n);
  std::vector<Eigen::Vector2d> g(n);
  for (int q = 0; q < tab.num_points; ++q) {
    const Point x = map.map(rule.points[q][0], rule.points[q][1]);
    const Eigen::Matrix2d k = K.K(x, ancestor);
    check_coefficient(k);
    const double w = rule.weights[q] * std::abs(map.det);
    for (int i = 0; i < n; ++i) g[i] = map.grad(tab.grad[q * n + i]);
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d kg = k * g[j];
      for (int i = 0; i <= j; ++i) loc(i, j) += w * g[i].dot(kg);
    }
  }
}

}  // namespace

DiffusionField DiffusionField::identity() {
  DiffusionField f;
  f.K = [](const Point&, int) { return Eigen::Matrix2d::Identity().eval(); };
  f.piecewise_constant = true;
  return f;
}

DiffusionField DiffusionField::per_element(std::vector<double> values) {
  DiffusionField f;
  f.K = [values = std::move(values)](const Point&, int a) -> Eigen::Matrix2d {
    if (a < 0 || a >= static_cast<int>(values.size())) {
      throw Error(ErrorCode::kInvalidArgument, "coefficient table too short for initial mesh");
    }
    return values[a] * Eigen::Matrix2d::Identity();
  };
  f.piecewise_constant = true;
  return f;
}

DiffusionField DiffusionField::scaled(double c) const {
  DiffusionField f = *this;
  auto k = K;
  f.K = [k, c](const Point& x, int a) -> Eigen::Matrix2d { return c * k(x, a); };
  if (div_K) {
    auto d = div_K;
    f.div_K = [d, c](const Point& x, int a) -> Eigen::Vector2d { return c * d(x, a); };
  }
  return f;
}

SparseMatrix assemble_stiffness(const FeSpace& space, const DiffusionField& K) {
  const MeshLevel& mesh = space.mesh();
  const TriangleRule& rule = triangle_rule(stiffness_degree(space.degree(), K));
  const Tabulation tab = tabulate(space.reference(), rule, false);
  const int n = tab.num_nodes;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_triangles()) * n * n);
  DenseMatrix loc;
  std::vector<int> dof(n);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    element_stiffness(mesh, t, tab, rule, K, loc);
    const auto nodes = space.cell_nodes(t);
    for (int i = 0; i < n; ++i) dof[i] = space.node_dof(nodes[i]);
    for (int j = 0; j < n; ++j) {
      if (dof[j] < 0) continue;
      for (int i = 0; i <= j; ++i) {
        if (dof[i] < 0) continue;
        trip.emplace_back(dof[i], dof[j], loc(i, j));
        if (i != j) trip.emplace_back(dof[j], dof[i], loc(i, j));
      }
    }
  }
  SparseMatrix A(space.num_dofs(), space.num_dofs());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Vector assemble_load(const FeSpace& space, const ScalarField& f) {
  const MeshLevel& mesh = space.mesh();
  const TriangleRule& rule = triangle_rule(2 * space.degree() + 2);
  const Tabulation tab = tabulate(space.reference(), rule, false);
  const int n = tab.num_nodes;
  Vector b = Vector::Zero(space.num_dofs());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const AffineMap map(mesh, t);
    const auto nodes = space.cell_nodes(t);
    for (int q = 0; q < tab.num_points; ++q) {
      const double fx = f(map.map(rule.points[q][0], rule.points[q][1]));
      if (fx == 0.0) continue;
      const double w = rule.weights[q] * std::abs(map.det) * fx;
      for (int i = 0; i < n; ++i) {
        const int d = space.node_dof(nodes[i]);
        if (d >= 0) b[d] += w * tab.val[q * n + i];
      }
    }
  }
  return b;
}

LevelBlock assemble_level_block(const MeshLevel& level, std::vector<int> rows, const DiffusionField& K) {
  const ReferenceElement ref(1);
  const TriangleRule& rule = triangle_rule(stiffness_degree(1, K));
  const Tabulation tab = tabulate(ref, rule, false);
  LevelBlock blk;
  blk.rows = std::move(rows);
  blk.diag.resize(static_cast<int>(blk.rows.size()));
  std::vector<Eigen::Triplet<double>> trip;
  DenseMatrix loc;
  for (std::size_t r = 0; r < blk.rows.size(); ++r) {
    const int z = blk.rows[r];
    for (int t : level.vertex_triangles(z)) {
      element_stiffness(level, t, tab, rule, K, loc);
      const auto& v = level.triangle(t).v;
      const int iz = static_cast<int>(std::find(v.begin(), v.end(), z) - v.begin());
      for (int j = 0; j < 3; ++j) {
        if (level.vertex(v[j]).on_boundary) continue;
        const double a = iz <= j ? loc(iz, j) : loc(j, iz);
        trip.emplace_back(static_cast<int>(r), v[j], a);
      }
    }
  }
  blk.B.resize(static_cast<int>(blk.rows.size()), level.num_vertices());
  blk.B.setFromTriplets(trip.begin(), trip.end());
  for (std::size_t r = 0; r < blk.rows.size(); ++r) {
    blk.diag[r] = blk.B.coeff(static_cast<int>(r), blk.rows[r]);
  }
  return blk;
}

std::vector<int> free_v_plus(const MeshHierarchy& h, int l) {
  const MeshLevel& level = h.level(l);
  std::vector<int> out;
  for (int z : h.v_plus(l)) {
    if (!level.vertex(z).on_boundary) out.push_back(z);
  }
  return out;
}

Vector assemble_level_diagonal(const MeshHierarchy& h, int l, const DiffusionField& K) {
  return assemble_level_block(h.level(l), free_v_plus(h, l), K).diag;
}

DenseMatrix principal_submatrix(const SparseMatrix& A, std::span<const int> dofs) {
  const int n = static_cast<int>(dofs.size());
  DenseMatrix S = DenseMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (SparseMatrix::InnerIterator it(A, dofs[i]); it; ++it) {
      auto pos = std::lower_bound(dofs.begin(), dofs.end(), static_cast<int>(it.col()));
      if (pos != dofs.end() && *pos == it.col()) S(i, pos - dofs.begin()) = it.value();
    }
  }
  return S;
}

PatchMatrix assemble_patch_matrix(const FeSpace& space, const SparseMatrix& A, int z) {
  PatchMatrix pm;
  pm.vertex = z;
  pm.dofs = patch_interior_dofs(space, z);
  if (pm.dofs.empty()) return pm;
  pm.A = principal_submatrix(A, pm.dofs);
  pm.llt.compute(pm.A);
  if (pm.llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kFactorizationFailure, "patch matrix of vertex " + std::to_string(z));
  }
  return pm;
}

double energy_norm(const SparseMatrix& A, const Vector& x) {
  if (A.cols() != x.size() || A.rows() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "energy_norm");
  }
  const Vector Ax = A * x;
  const double e = x.dot(Ax);
  if (e < -1e-12 * x.norm() * Ax.norm()) throw Error(ErrorCode::kNonSpd, "negative energy");
  return std::sqrt(std::max(e, 0.0));
}

double energy_error_squared(const FeSpace& space, const DiffusionField& K, const Vector& x,
                            const VectorField& grad_exact, int extra_degree) {
  const MeshLevel& mesh = space.mesh();
  const TriangleRule& rule = triangle_rule(2 * space.degree() + extra_degree);
  const Tabulation tab = tabulate(space.reference(), rule, false);
  const Vector u = space.to_nodes(x);
  const int n = tab.num_nodes;
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const AffineMap map(mesh, t);
    const auto nodes = space.cell_nodes(t);
    for (int q = 0; q < tab.num_points; ++q) {
      const Point p = map.map(rule.points[q][0], rule.points[q][1]);
      Eigen::Vector2d g = grad_exact(p);
      for (int i = 0; i < n; ++i) g -= u[nodes[i]] * map.grad(tab.grad[q * n + i]);
      s += rule.weights[q] * std::abs(map.det) * g.dot(K.K(p, mesh.triangle(t).ancestor0) * g);
    }
  }
  return s;
}

double gradient_norm_squared(const FeSpace& space, const Vector& x) {
  return energy_error_squared(space, DiffusionField::identity(), x,
                              [](const Point&) { return Eigen::Vector2d::Zero().eval(); }, 0);
}

void write_matrix_market(std::ostream& os, const SparseMatrix& A) {
  long long nnz = 0;
  for (int i = 0; i < A.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(A, i); it; ++it) {
      if (it.col() <= i) ++nnz;
    }
  }
  os << "%%MatrixMarket matrix coordinate real symmetric\n";
  os << A.rows() << ' ' << A.cols() << ' ' << nnz << '\n';
  os << std::setprecision(17);
  for (int i = 0; i < A.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(A, i); it; ++it) {
      if (it.col() <= i) os << i + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    }
  }
}

}  // namespace afemmg
