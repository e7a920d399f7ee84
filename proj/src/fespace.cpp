#include "afemmg/fespace.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace afemmg {

namespace {

// R_a(t) = prod_{s<a} (p t - s) / (s + 1) with first and second derivative.
struct Factor {
  double v, d1, d2;
};

Factor silvester(int a, int p, double t) {
  double v = 1.0, d1 = 0.0, d2 = 0.0;
  for (int s = 0; s < a; ++s) {
    const double f = (p * t - s) / (s + 1);
    const double df = static_cast<double>(p) / (s + 1);
    d2 = d2 * f + 2.0 * d1 * df;
    d1 = d1 * f + v * df;
    v *= f;
  }
  return {v, d1, d2};
}

}  // namespace

ReferenceElement::ReferenceElement(int p) : p_(p) {
  if (p < 1 || p > kMaxPolynomialDegree) {
    throw Error(ErrorCode::kUnsupportedDegree, "degree " + std::to_string(p) + " not in 1..8");
  }
  for (int k = 0; k < 3; ++k) {
    std::array<int, 3> a{0, 0, 0};
    a[k] = p;
    alpha_.push_back(a);
  }
  for (int i = 0; i < 3; ++i) {
    for (int m = 1; m < p; ++m) {
      std::array<int, 3> a{0, 0, 0};
      a[i] = p - m;
      a[(i + 1) % 3] = m;
      alpha_.push_back(a);
    }
  }
  for (int a2 = 1; a2 < p; ++a2) {
    for (int a1 = 1; a1 + a2 < p; ++a1) alpha_.push_back({p - a1 - a2, a1, a2});
  }
}

std::array<double, 2> ReferenceElement::node(int i) const {
  return {static_cast<double>(alpha_[i][1]) / p_, static_cast<double>(alpha_[i][2]) / p_};
}

void ReferenceElement::eval(double xi, double eta, std::vector<double>& val) const {
  const double l[3] = {1.0 - xi - eta, xi, eta};
  val.resize(alpha_.size());
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    double v = 1.0;
    for (int k = 0; k < 3; ++k) v *= silvester(alpha_[i][k], p_, l[k]).v;
    val[i] = v;
  }
}

void ReferenceElement::eval_grad(double xi, double eta,
                                 std::vector<std::array<double, 2>>& grad) const {
  const double l[3] = {1.0 - xi - eta, xi, eta};
  grad.resize(alpha_.size());
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    const Factor f0 = silvester(alpha_[i][0], p_, l[0]);
    const Factor f1 = silvester(alpha_[i][1], p_, l[1]);
    const Factor f2 = silvester(alpha_[i][2], p_, l[2]);
    grad[i] = {-f0.d1 * f1.v * f2.v + f0.v * f1.d1 * f2.v,
               -f0.d1 * f1.v * f2.v + f0.v * f1.v * f2.d1};
  }
}

void ReferenceElement::eval_hess(double xi, double eta,
                                 std::vector<std::array<double, 3>>& hess) const {
  const double l[3] = {1.0 - xi - eta, xi, eta};
  hess.resize(alpha_.size());
  for (std::size_t i = 0; i < alpha_.size(); ++i) {
    const Factor a = silvester(alpha_[i][0], p_, l[0]);
    const Factor b = silvester(alpha_[i][1], p_, l[1]);
    const Factor c = silvester(alpha_[i][2], p_, l[2]);
    const double xx = a.d2 * b.v * c.v - 2.0 * a.d1 * b.d1 * c.v + a.v * b.d2 * c.v;
    const double xy = a.d2 * b.v * c.v - a.d1 * b.v * c.d1 - a.d1 * b.d1 * c.v + a.v * b.d1 * c.d1;
    const double yy = a.d2 * b.v * c.v - 2.0 * a.d1 * b.v * c.d1 + a.v * b.v * c.d2;
    hess[i] = {xx, xy, yy};
  }
}

Tabulation tabulate(const ReferenceElement& ref, const TriangleRule& rule, bool with_hessian) {
  Tabulation tab;
  tab.num_points = static_cast<int>(rule.points.size());
  tab.num_nodes = ref.num_nodes();
  std::vector<double> v;
  std::vector<std::array<double, 2>> g;
  std::vector<std::array<double, 3>> h;
  for (const auto& q : rule.points) {
    ref.eval(q[0], q[1], v);
    ref.eval_grad(q[0], q[1], g);
    tab.val.insert(tab.val.end(), v.begin(), v.end());
    tab.grad.insert(tab.grad.end(), g.begin(), g.end());
    if (with_hessian) {
      ref.eval_hess(q[0], q[1], h);
      tab.hess.insert(tab.hess.end(), h.begin(), h.end());
    }
  }
  return tab;
}

AffineMap::AffineMap(const MeshLevel& mesh, int t) {
  const auto& v = mesh.triangle(t).v;
  const Point& a = mesh.vertex(v[0]).p;
  const Point& b = mesh.vertex(v[1]).p;
  const Point& c = mesh.vertex(v[2]).p;
  origin = a;
  jac << b.x - a.x, c.x - a.x, b.y - a.y, c.y - a.y;
  det = jac.determinant();
  inv_jac << jac(1, 1), -jac(0, 1), -jac(1, 0), jac(0, 0);
  inv_jac /= det;
}

Point AffineMap::map(double xi, double eta) const {
  return {origin.x + jac(0, 0) * xi + jac(0, 1) * eta, origin.y + jac(1, 0) * xi + jac(1, 1) * eta};
}

std::array<double, 2> AffineMap::pull_back(const Point& x) const {
  const Eigen::Vector2d r = inv_jac * Eigen::Vector2d(x.x - origin.x, x.y - origin.y);
  return {r[0], r[1]};
}

Eigen::Vector2d AffineMap::grad(const std::array<double, 2>& g) const {
  return inv_jac.transpose() * Eigen::Vector2d(g[0], g[1]);
}

Eigen::Matrix2d AffineMap::hess(const std::array<double, 3>& h) const {
  Eigen::Matrix2d r;
  r << h[0], h[1], h[1], h[2];
  return inv_jac.transpose() * r * inv_jac;
}

FeSpace::FeSpace(std::shared_ptr<const MeshLevel> mesh, int p)
    : mesh_(std::move(mesh)), p_(p), ref_(p) {
  const MeshLevel& m = *mesh_;
  const int nv = m.num_vertices();
  const int ne = m.num_edges();
  const int per_edge = p - 1;
  const int per_cell = (p - 1) * (p - 2) / 2;
  const int nloc = ref_.num_nodes();
  const int edge_base = nv;
  const int cell_base = nv + ne * per_edge;
  const int n_nodes = cell_base + m.num_triangles() * per_cell;

  cell_nodes_.resize(static_cast<std::size_t>(m.num_triangles()) * nloc);
  for (int t = 0; t < m.num_triangles(); ++t) {
    int* out = cell_nodes_.data() + static_cast<std::size_t>(t) * nloc;
    const auto& v = m.triangle(t).v;
    const auto& te = m.triangle_edges(t);
    int k = 0;
    for (int i = 0; i < 3; ++i) out[k++] = v[i];
    for (int i = 0; i < 3; ++i) {
      const Edge& e = m.edge(te[i]);
      const bool forward = v[i] == e.v[0];
      for (int mi = 1; mi < p; ++mi) {
        out[k++] = edge_base + te[i] * per_edge + (forward ? mi - 1 : p - 1 - mi);
      }
    }
    for (int c = 0; c < per_cell; ++c) out[k++] = cell_base + t * per_cell + c;
  }

  node_dof_.assign(n_nodes, -1);
  std::vector<char> boundary(n_nodes, 0);
  for (int z = 0; z < nv; ++z) boundary[z] = m.vertex(z).on_boundary;
  for (int e = 0; e < ne; ++e) {
    if (!m.edge(e).on_boundary()) continue;
    for (int k = 0; k < per_edge; ++k) boundary[edge_base + e * per_edge + k] = 1;
  }
  for (int n = 0; n < n_nodes; ++n) {
    if (boundary[n]) continue;
    node_dof_[n] = static_cast<int>(dof_node_.size());
    dof_node_.push_back(n);
  }
}

Point FeSpace::node_point(int node) const {
  const MeshLevel& m = *mesh_;
  const int nv = m.num_vertices();
  if (node < nv) return m.vertex(node).p;
  const int per_edge = p_ - 1;
  const int cell_base = nv + m.num_edges() * per_edge;
  if (node < cell_base) {
    const int e = (node - nv) / per_edge;
    const int k = (node - nv) % per_edge + 1;
    const Point& a = m.vertex(m.edge(e).v[0]).p;
    const Point& b = m.vertex(m.edge(e).v[1]).p;
    const double s = static_cast<double>(k) / p_;
    return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
  }
  const int per_cell = (p_ - 1) * (p_ - 2) / 2;
  const int t = (node - cell_base) / per_cell;
  const int local = 3 + 3 * per_edge + (node - cell_base) % per_cell;
  const auto r = ref_.node(local);
  return AffineMap(m, t).map(r[0], r[1]);
}

Vector FeSpace::to_nodes(const Vector& x) const {
  if (x.size() != num_dofs()) throw Error(ErrorCode::kDimensionMismatch, "coefficient vector size");
  Vector out = Vector::Zero(num_nodes());
  for (int d = 0; d < num_dofs(); ++d) out[dof_node_[d]] = x[d];
  return out;
}

double FeSpace::evaluate(const Vector& x, int t, double xi, double eta) const {
  if (x.size() != num_dofs()) throw Error(ErrorCode::kDimensionMismatch, "coefficient vector size");
  std::vector<double> val;
  ref_.eval(xi, eta, val);
  const auto nodes = cell_nodes(t);
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int d = node_dof_[nodes[i]];
    if (d >= 0) s += x[d] * val[i];
  }
  return s;
}

FeSpace build_space(std::shared_ptr<const MeshLevel> mesh, int p) { return FeSpace(std::move(mesh), p); }

SparseMatrix interpolation_matrix(const FeSpace& coarse, const FeSpace& fine,
                                  std::span<const int> fine_to_coarse) {
  const MeshLevel& fm = fine.mesh();
  const MeshLevel& cm = coarse.mesh();
  if (!fine_to_coarse.empty() && static_cast<int>(fine_to_coarse.size()) != fm.num_triangles()) {
    throw Error(ErrorCode::kDimensionMismatch, "fine-to-coarse map size");
  }
  std::vector<char> done(fine.num_nodes(), 0);
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> val;
  for (int t = 0; t < fm.num_triangles(); ++t) {
    const int ct = fine_to_coarse.empty() ? t : fine_to_coarse[t];
    const AffineMap cmap(cm, ct);
    const auto cnodes = coarse.cell_nodes(ct);
    const auto fnodes = fine.cell_nodes(t);
    for (int node : fnodes) {
      if (done[node]) continue;
      done[node] = 1;
      const int row = fine.node_dof(node);
      if (row < 0) continue;
      const auto r = cmap.pull_back(fine.node_point(node));
      coarse.reference().eval(r[0], r[1], val);
      for (std::size_t i = 0; i < cnodes.size(); ++i) {
        if (coarse.node_dof(cnodes[i]) < 0) continue;
        if (std::abs(val[i]) < 1e-14) continue;
        trip.emplace_back(row, cnodes[i], val[i]);
      }
    }
  }
  SparseMatrix m(fine.num_dofs(), coarse.num_nodes());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

std::vector<int> ancestor_map(const MeshHierarchy& h, int from, int to) {
  if (from < 0 || to > h.top() || from > to) {
    throw Error(ErrorCode::kLevelOutOfRange, "ancestor map levels");
  }
  std::vector<int> map(h.level(to).num_triangles());
  for (std::size_t t = 0; t < map.size(); ++t) map[t] = static_cast<int>(t);
  for (int l = to; l > from; --l) {
    const auto& par = h.parents(l);
    for (int& t : map) t = par[t];
  }
  return map;
}

SparseMatrix hat_transfer(const MeshHierarchy& h, int l) {
  if (l < 1 || l > h.top()) throw Error(ErrorCode::kLevelOutOfRange, "hat transfer level");
  const int nc = h.level(l - 1).num_vertices();
  const int nf = h.level(l).num_vertices();
  const auto& np = h.new_vertex_parents(l);
  std::vector<Eigen::Triplet<double>> trip;
  for (int z = 0; z < nc; ++z) trip.emplace_back(z, z, 1.0);
  for (int m = nc; m < nf; ++m) {
    trip.emplace_back(m, np[m - nc][0], 0.5);
    trip.emplace_back(m, np[m - nc][1], 0.5);
  }
  SparseMatrix t(nf, nc);
  t.setFromTriplets(trip.begin(), trip.end());
  return t;
}

SparseMatrix embed_selection(const MeshHierarchy& h, int l, const FeSpace& fine,
                             std::span<const int> vertices) {
  if (l < 0 || l > h.top()) throw Error(ErrorCode::kLevelOutOfRange, "embed level");
  const int nv = h.level(l).num_vertices();
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t c = 0; c < vertices.size(); ++c) {
    if (vertices[c] < 0 || vertices[c] >= nv) throw Error(ErrorCode::kUnknownVertex, "embed selection");
    trip.emplace_back(vertices[c], static_cast<int>(c), 1.0);
  }
  SparseMatrix m(nv, static_cast<int>(vertices.size()));
  m.setFromTriplets(trip.begin(), trip.end());
  for (int j = l + 1; j <= h.top(); ++j) m = (hat_transfer(h, j) * m).pruned();
  const FeSpace p1(h.level_ptr(h.top()), 1);
  SparseMatrix e = interpolation_matrix(p1, fine, {});
  return (e * m).pruned();
}

SparseMatrix selection_matrix(int n, std::span<const int> dofs) {
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t c = 0; c < dofs.size(); ++c) {
    if (dofs[c] < 0 || dofs[c] >= n) throw Error(ErrorCode::kInvalidArgument, "dof id out of range");
    trip.emplace_back(dofs[c], static_cast<int>(c), 1.0);
  }
  SparseMatrix m(n, static_cast<int>(dofs.size()));
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

std::vector<int> patch_interior_dofs(const FeSpace& space, int z) {
  const MeshLevel& m = space.mesh();
  if (z < 0 || z >= m.num_vertices()) throw Error(ErrorCode::kUnknownVertex, std::to_string(z));
  const int p = space.degree();
  const int nloc = space.nodes_per_cell();
  std::vector<int> dofs;
  for (int t : m.vertex_triangles(z)) {
    const auto& v = m.triangle(t).v;
    const auto nodes = space.cell_nodes(t);
    for (int i = 0; i < 3; ++i) {
      if (v[i] == z) dofs.push_back(space.node_dof(nodes[i]));
      // Local edge i contains z when it starts or ends there.
      if (v[i] == z || v[(i + 1) % 3] == z) {
        for (int k = 0; k < p - 1; ++k) dofs.push_back(space.node_dof(nodes[3 + i * (p - 1) + k]));
      }
    }
    for (int k = 3 + 3 * (p - 1); k < nloc; ++k) dofs.push_back(space.node_dof(nodes[k]));
  }
  std::sort(dofs.begin(), dofs.end());
  dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
  if (!dofs.empty() && dofs.front() < 0) dofs.erase(dofs.begin());
  return dofs;
}

Vector prolong_solution(const FeSpace& coarse, const FeSpace& fine, std::span<const int> fine_parent,
                        const Vector& x) {
  if (coarse.degree() != fine.degree()) throw Error(ErrorCode::kInvalidArgument, "degree mismatch");
  const SparseMatrix t = interpolation_matrix(coarse, fine, fine_parent);
  return t * coarse.to_nodes(x);
}

}  // namespace afemmg
