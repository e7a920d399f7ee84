#pragma once

#include "afemmg/common.hpp"
#include "afemmg/mesh.hpp"
#include "afemmg/quadrature.hpp"

#include <array>
#include <memory>
#include <span>
#include <vector>

namespace afemmg {

inline constexpr int kMaxPolynomialDegree = 8;

/// Equispaced Lagrange element of degree p on the reference triangle.
/// Local node order: the three vertices, then p-1 nodes per local edge
/// (edge i runs from vertex i to vertex i+1), then interior nodes.
class ReferenceElement {
 public:
  explicit ReferenceElement(int p);

  int degree() const { return p_; }
  int num_nodes() const { return static_cast<int>(alpha_.size()); }
  /// Barycentric multi-index of local node i (entries sum to p).
  const std::array<int, 3>& multi_index(int i) const { return alpha_[i]; }
  std::array<double, 2> node(int i) const;

  /// Values, reference gradients and reference Hessians (xx, xy, yy) at a
  /// reference point; output arrays are resized to num_nodes().
  void eval(double xi, double eta, std::vector<double>& val) const;
  void eval_grad(double xi, double eta, std::vector<std::array<double, 2>>& grad) const;
  void eval_hess(double xi, double eta, std::vector<std::array<double, 3>>& hess) const;

 private:
  int p_;
  std::vector<std::array<int, 3>> alpha_;
};

/// Basis data tabulated at the points of a quadrature rule.
struct Tabulation {
  int num_points = 0;
  int num_nodes = 0;
  std::vector<double> val;                   // [q * n + i]
  std::vector<std::array<double, 2>> grad;   // reference gradients
  std::vector<std::array<double, 3>> hess;   // reference Hessians
};
Tabulation tabulate(const ReferenceElement& ref, const TriangleRule& rule, bool with_hessian);

/// Affine map of a mesh triangle from the reference element.
struct AffineMap {
  Point origin;
  Eigen::Matrix2d jac;      // columns: v1 - v0, v2 - v0
  Eigen::Matrix2d inv_jac;  // inverse of jac
  double det = 0.0;

  AffineMap(const MeshLevel& mesh, int t);
  Point map(double xi, double eta) const;
  /// Reference coordinates of a physical point.
  std::array<double, 2> pull_back(const Point& x) const;
  Eigen::Vector2d grad(const std::array<double, 2>& ref_grad) const;
  Eigen::Matrix2d hess(const std::array<double, 3>& ref_hess) const;
};

/// Degree-p continuous Lagrange space with homogeneous Dirichlet boundary
/// conditions. Nodes are numbered vertices, edges (edge-table order, from
/// the lower vertex id), cells; free dofs are the non-boundary nodes in node
/// order.
class FeSpace {
 public:
  FeSpace(std::shared_ptr<const MeshLevel> mesh, int p);

  const MeshLevel& mesh() const { return *mesh_; }
  std::shared_ptr<const MeshLevel> mesh_ptr() const { return mesh_; }
  int degree() const { return p_; }
  const ReferenceElement& reference() const { return ref_; }

  int num_nodes() const { return static_cast<int>(node_dof_.size()); }
  int num_dofs() const { return static_cast<int>(dof_node_.size()); }
  int nodes_per_cell() const { return ref_.num_nodes(); }

  /// Global node ids of the local nodes of triangle t.
  std::span<const int> cell_nodes(int t) const {
    return {cell_nodes_.data() + static_cast<std::size_t>(t) * ref_.num_nodes(),
            static_cast<std::size_t>(ref_.num_nodes())};
  }
  /// Free dof of a node, or -1 on the boundary.
  int node_dof(int node) const { return node_dof_[node]; }
  int dof_node(int dof) const { return dof_node_[dof]; }
  Point node_point(int node) const;

  /// Nodal values including zero boundary values.
  Vector to_nodes(const Vector& x) const;
  /// Value of the discrete function with free coefficients x at the point
  /// with reference coordinates (xi, eta) in triangle t.
  double evaluate(const Vector& x, int t, double xi, double eta) const;

 private:
  std::shared_ptr<const MeshLevel> mesh_;
  int p_;
  ReferenceElement ref_;
  std::vector<int> cell_nodes_;
  std::vector<int> node_dof_;
  std::vector<int> dof_node_;
};

FeSpace build_space(std::shared_ptr<const MeshLevel> mesh, int p);

/// Nodal interpolation of `coarse` functions into `fine` (nested meshes).
/// `fine_to_coarse` maps each fine triangle to the coarse triangle
/// containing it; pass an empty span for the same mesh. Rows are fine free
/// dofs, columns coarse nodes; columns of coarse boundary nodes are empty.
SparseMatrix interpolation_matrix(const FeSpace& coarse, const FeSpace& fine,
                                  std::span<const int> fine_to_coarse);

/// Composite triangle map from level `to` down to level `from` <= `to`.
std::vector<int> ancestor_map(const MeshHierarchy& h, int from, int to);

/// Hat-to-hat transfer from level l-1 to level l over vertex ids (boundary
/// vertices included): identity on retained vertices, 1/2 at each new
/// midpoint from its two parents.
SparseMatrix hat_transfer(const MeshHierarchy& h, int l);

/// Columns of the embedding of level-`l` hats into the degree-p free space
/// of `fine` (which lives on level h.top()), restricted to `vertices`.
SparseMatrix embed_selection(const MeshHierarchy& h, int l, const FeSpace& fine,
                             std::span<const int> vertices);

/// 0/1 matrix selecting the given free dofs (rows: all dofs).
SparseMatrix selection_matrix(int n, std::span<const int> dofs);

/// Free dofs whose nodes lie in the open patch of vertex z, ascending.
std::vector<int> patch_interior_dofs(const FeSpace& space, int z);

/// Interpolates a coarse solution on level l into the same-degree space on
/// level l+1 (`fine_parent` is the parent map of level l+1).
Vector prolong_solution(const FeSpace& coarse, const FeSpace& fine,
                        std::span<const int> fine_parent, const Vector& x);

}  // namespace afemmg
