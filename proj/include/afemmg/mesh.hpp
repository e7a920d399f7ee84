#pragma once

#include "afemmg/common.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace afemmg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Vertex {
  Point p;
  bool on_boundary = false;
  int birth_level = 0;
};

/// A triangle with counterclockwise vertices. Local edge i joins v[i] and
/// v[(i+1)%3]; `refinement_edge` names the edge bisected next.
struct Triangle {
  std::array<int, 3> v{};
  int refinement_edge = 0;
  int generation = 0;
  int ancestor0 = 0;
};

struct Edge {
  std::array<int, 2> v{};       // v[0] < v[1]
  std::array<int, 2> tri{-1, -1};
  std::array<int, 2> local{-1, -1};  // local edge index inside tri[i]

  bool on_boundary() const { return tri[1] < 0; }
};

/// One conforming triangulation. Immutable after construction.
class MeshLevel {
 public:
  MeshLevel(std::vector<Vertex> vertices, std::vector<Triangle> triangles, int level = 0);

  int level() const { return level_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vertex& vertex(int i) const { return vertices_[i]; }
  const Triangle& triangle(int t) const { return triangles_[t]; }
  const Edge& edge(int e) const { return edges_[e]; }

  /// Global edge ids of the three local edges of triangle t.
  const std::array<int, 3>& triangle_edges(int t) const { return tri_edges_[t]; }
  /// Triangles containing vertex z (ascending ids).
  std::span<const int> vertex_triangles(int z) const;
  /// Edge id for the vertex pair, or -1.
  int find_edge(int a, int b) const;

  double area(int t) const;
  double diameter(int t) const;
  Point centroid(int t) const;
  double total_area() const;

  /// Writes the whitespace-separated text format read by `read_mesh`.
  void write(std::ostream& os) const;

 private:
  void build_edges();
  void build_vertex_triangles();

  int level_ = 0;
  std::vector<Vertex> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Edge> edges_;
  std::vector<std::array<int, 3>> tri_edges_;
  std::vector<int> vt_offsets_;
  std::vector<int> vt_index_;
};

double signed_area(const Point& a, const Point& b, const Point& c);

/// Validated construction of an initial mesh: orientation, conformity,
/// boundary flags, and the refinement-edge matching condition (every interior
/// edge is the refinement edge of both adjacent triangles or of neither).
MeshLevel init_mesh(std::span<const Point> points, std::span<const bool> boundary,
                    std::span<const std::array<int, 3>> triangles,
                    std::span<const int> refinement_edges);

/// Reads the text format: `vertices N triangles M`, N lines `x y boundary`,
/// M lines `v0 v1 v2 refinement_edge`. Validates through `init_mesh`.
MeshLevel read_mesh(std::istream& is);
MeshLevel read_mesh_file(const std::string& path);

struct RefineResult {
  MeshLevel mesh;
  std::vector<int> parent;                     // new triangle -> old triangle id
  std::vector<std::array<int, 2>> new_vertex_parents;  // endpoints of the bisected edge
  std::vector<char> bisected;                  // per old triangle
};

enum class RefineRule {
  kRefinementEdge,  // marked elements are bisected at least once
  kAllEdges,        // all three edges of marked elements are bisected
};

/// Coarsest conforming newest-vertex-bisection refinement whose marked edge
/// set contains the edges selected by `rule` for every marked element.
RefineResult refine(const MeshLevel& level, std::span<const int> marked,
                    RefineRule rule = RefineRule::kRefinementEdge);

/// Nested sequence T_0, ..., T_L with persistent vertex ids (level l owns the
/// id prefix 0..#V_l-1).
class MeshHierarchy {
 public:
  explicit MeshHierarchy(MeshLevel initial);

  int top() const { return static_cast<int>(levels_.size()) - 1; }
  int num_levels() const { return static_cast<int>(levels_.size()); }
  const MeshLevel& level(int l) const;
  std::shared_ptr<const MeshLevel> level_ptr(int l) const;
  const MeshLevel& finest() const { return *levels_.back(); }

  /// Appends refine(finest, marked, rule).
  const MeshLevel& refine(std::span<const int> marked, RefineRule rule = RefineRule::kRefinementEdge);

  /// Parent (level l-1) of each triangle of level l >= 1.
  const std::vector<int>& parents(int l) const;
  /// Endpoints of the coarse edge each new vertex of level l bisects.
  const std::vector<std::array<int, 2>>& new_vertex_parents(int l) const;
  /// Per-triangle flag on level l-1: bisected on the way to level l.
  const std::vector<char>& bisected(int l) const;
  /// V_l^+ as ascending vertex ids (boundary vertices included).
  const std::vector<int>& v_plus(int l) const;

  /// Hierarchy truncated to levels 0..l.
  MeshHierarchy prefix(int l) const;

 private:
  MeshHierarchy() = default;

  std::vector<std::shared_ptr<const MeshLevel>> levels_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<std::array<int, 2>>> new_vertex_parents_;
  std::vector<std::vector<char>> bisected_;
  std::vector<std::vector<int>> v_plus_;
};

/// V_l^+ recomputed from the hierarchy: all of V_0 for l = 0, else new
/// vertices plus retained vertices with a bisected incident triangle.
std::vector<int> compute_v_plus(const MeshHierarchy& h, int l);

/// n-ring element patch T^n(z), ascending element ids.
std::vector<int> patch(const MeshLevel& level, int z, int n);

struct ShapeRegularity {
  double gamma = 0.0;           // max diam(T) / |T|^{1/2}
  double neighbor_ratio = 0.0;  // max diam(T) / diam(T') over touching pairs
};
ShapeRegularity shape_regularity(const MeshLevel& level);

/// Sorted interior angles of triangle t rounded to 1e-8 rad; equal
/// fingerprints mean similar triangles.
std::array<long long, 3> angle_fingerprint(const MeshLevel& level, int t);

}  // namespace afemmg
