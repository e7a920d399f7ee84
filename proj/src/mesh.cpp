#include "afemmg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

namespace afemmg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNonConforming: return "NonConforming";
    case ErrorCode::kDegenerateTriangle: return "DegenerateTriangle";
    case ErrorCode::kInvalidTag: return "InvalidTag";
    case ErrorCode::kLevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::kUnknownVertex: return "UnknownVertex";
    case ErrorCode::kUnsupportedDegree: return "UnsupportedDegree";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kFactorizationFailure: return "FactorizationFailure";
    case ErrorCode::kNonSpd: return "NonSPD";
    case ErrorCode::kBreakdown: return "Breakdown";
    case ErrorCode::kIterationCapExceeded: return "IterationCapExceeded";
    case ErrorCode::kFlagViolation: return "FlagViolation";
    case ErrorCode::kEmptyHierarchy: return "EmptyHierarchy";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

namespace {

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

MeshLevel::MeshLevel(std::vector<Vertex> vertices, std::vector<Triangle> triangles, int level)
    : level_(level), vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  build_edges();
  build_vertex_triangles();
}

void MeshLevel::build_edges() {
  struct Slot {
    int a, b, t, i;
  };
  std::vector<Slot> slots;
  slots.reserve(3 * triangles_.size());
  for (int t = 0; t < num_triangles(); ++t) {
    const auto& v = triangles_[t].v;
    for (int i = 0; i < 3; ++i) {
      const int a = v[i];
      const int b = v[(i + 1) % 3];
      slots.push_back({std::min(a, b), std::max(a, b), t, i});
    }
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& l, const Slot& r) {
    return std::tie(l.a, l.b, l.t) < std::tie(r.a, r.b, r.t);
  });

  edges_.clear();
  tri_edges_.assign(triangles_.size(), {-1, -1, -1});
  for (std::size_t s = 0; s < slots.size();) {
    std::size_t end = s;
    while (end < slots.size() && slots[end].a == slots[s].a && slots[end].b == slots[s].b) ++end;
    if (end - s > 2) {
      throw Error(ErrorCode::kNonConforming, "edge (" + std::to_string(slots[s].a) + "," +
                                                 std::to_string(slots[s].b) +
                                                 ") shared by more than two triangles");
    }
    Edge e;
    e.v = {slots[s].a, slots[s].b};
    const int id = static_cast<int>(edges_.size());
    for (std::size_t k = s; k < end; ++k) {
      e.tri[k - s] = slots[k].t;
      e.local[k - s] = slots[k].i;
      tri_edges_[slots[k].t][slots[k].i] = id;
    }
    if (end - s == 2) {
      // Neighbors must traverse the shared edge in opposite directions.
      const auto& v0 = triangles_[e.tri[0]].v;
      const auto& v1 = triangles_[e.tri[1]].v;
      if (v0[e.local[0]] == v1[e.local[1]]) {
        throw Error(ErrorCode::kNonConforming, "inconsistent orientation across an edge");
      }
    }
    edges_.push_back(e);
    s = end;
  }
}

void MeshLevel::build_vertex_triangles() {
  vt_offsets_.assign(vertices_.size() + 1, 0);
  for (const auto& t : triangles_) {
    for (int z : t.v) ++vt_offsets_[z + 1];
  }
  std::partial_sum(vt_offsets_.begin(), vt_offsets_.end(), vt_offsets_.begin());
  vt_index_.resize(vt_offsets_.back());
  std::vector<int> fill(vt_offsets_.begin(), vt_offsets_.end() - 1);
  for (int t = 0; t < num_triangles(); ++t) {
    for (int z : triangles_[t].v) vt_index_[fill[z]++] = t;
  }
}

std::span<const int> MeshLevel::vertex_triangles(int z) const {
  return {vt_index_.data() + vt_offsets_[z],
          static_cast<std::size_t>(vt_offsets_[z + 1] - vt_offsets_[z])};
}

int MeshLevel::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  auto it = std::lower_bound(edges_.begin(), edges_.end(), std::array<int, 2>{a, b},
                             [](const Edge& e, const std::array<int, 2>& key) { return e.v < key; });
  if (it == edges_.end() || it->v[0] != a || it->v[1] != b) return -1;
  return static_cast<int>(it - edges_.begin());
}

double MeshLevel::area(int t) const {
  const auto& v = triangles_[t].v;
  return signed_area(vertices_[v[0]].p, vertices_[v[1]].p, vertices_[v[2]].p);
}

double MeshLevel::diameter(int t) const {
  const auto& v = triangles_[t].v;
  const auto& a = vertices_[v[0]].p;
  const auto& b = vertices_[v[1]].p;
  const auto& c = vertices_[v[2]].p;
  return std::max({distance(a, b), distance(b, c), distance(c, a)});
}

Point MeshLevel::centroid(int t) const {
  const auto& v = triangles_[t].v;
  Point c;
  for (int z : v) {
    c.x += vertices_[z].p.x / 3.0;
    c.y += vertices_[z].p.y / 3.0;
  }
  return c;
}

double MeshLevel::total_area() const {
  double s = 0.0;
  for (int t = 0; t < num_triangles(); ++t) s += area(t);
  return s;
}

void MeshLevel::write(std::ostream& os) const {
  os << "vertices " << num_vertices() << " triangles " << num_triangles() << '\n';
  os << std::setprecision(17);
  for (const auto& v : vertices_) os << v.p.x << ' ' << v.p.y << ' ' << (v.on_boundary ? 1 : 0) << '\n';
  for (const auto& t : triangles_) {
    os << t.v[0] << ' ' << t.v[1] << ' ' << t.v[2] << ' ' << t.refinement_edge << '\n';
  }
}

MeshLevel init_mesh(std::span<const Point> points, std::span<const bool> boundary,
                    std::span<const std::array<int, 3>> triangles,
                    std::span<const int> refinement_edges) {
  if (points.size() != boundary.size() || triangles.size() != refinement_edges.size()) {
    throw Error(ErrorCode::kInvalidArgument, "inconsistent input lengths");
  }
  if (triangles.empty()) throw Error(ErrorCode::kInvalidArgument, "mesh has no triangles");
  const int nv = static_cast<int>(points.size());

  std::vector<Vertex> vertices(points.size());
  for (int i = 0; i < nv; ++i) {
    if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite vertex coordinate");
    }
    vertices[i] = {points[i], boundary[i], 0};
  }

  std::vector<Triangle> tris(triangles.size());
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    const auto& v = triangles[t];
    for (int z : v) {
      if (z < 0 || z >= nv) throw Error(ErrorCode::kInvalidArgument, "vertex index out of range");
    }
    if (refinement_edges[t] < 0 || refinement_edges[t] > 2) {
      throw Error(ErrorCode::kInvalidTag, "refinement edge tag must be 0, 1 or 2");
    }
    if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2]) {
      throw Error(ErrorCode::kDegenerateTriangle, "triangle " + std::to_string(t) + " repeats a vertex");
    }
    const Point& a = points[v[0]];
    const Point& b = points[v[1]];
    const Point& c = points[v[2]];
    const double scale = std::max({distance(a, b), distance(b, c), distance(c, a)});
    if (signed_area(a, b, c) <= 1e-14 * scale * scale) {
      throw Error(ErrorCode::kDegenerateTriangle,
                  "triangle " + std::to_string(t) + " has zero or negative area");
    }
    tris[t] = {v, refinement_edges[t], 0, static_cast<int>(t)};
  }

  MeshLevel mesh(std::move(vertices), std::move(tris), 0);

  std::vector<char> touches_boundary(nv, 0);
  std::vector<char> used(nv, 0);
  for (const auto& t : mesh.triangles()) {
    for (int z : t.v) used[z] = 1;
  }
  for (int z = 0; z < nv; ++z) {
    if (!used[z]) throw Error(ErrorCode::kNonConforming, "vertex " + std::to_string(z) + " unused");
  }
  for (const auto& e : mesh.edges()) {
    if (e.on_boundary()) {
      for (int z : e.v) {
        if (!boundary[z]) {
          throw Error(ErrorCode::kNonConforming,
                      "vertex " + std::to_string(z) + " lies on a boundary edge but is not flagged");
        }
        touches_boundary[z] = 1;
      }
      // Hanging-node check: no vertex may sit inside a boundary edge.
      const Point& a = points[e.v[0]];
      const Point& b = points[e.v[1]];
      const double len = distance(a, b);
      for (int z = 0; z < nv; ++z) {
        if (z == e.v[0] || z == e.v[1]) continue;
        const Point& q = points[z];
        if (std::abs(signed_area(a, b, q)) > 1e-12 * len * len) continue;
        const double s = ((q.x - a.x) * (b.x - a.x) + (q.y - a.y) * (b.y - a.y)) / (len * len);
        if (s > 1e-12 && s < 1.0 - 1e-12) {
          throw Error(ErrorCode::kNonConforming, "hanging node " + std::to_string(z));
        }
      }
    } else {
      const bool r0 = mesh.triangle(e.tri[0]).refinement_edge == e.local[0];
      const bool r1 = mesh.triangle(e.tri[1]).refinement_edge == e.local[1];
      if (r0 != r1) {
        throw Error(ErrorCode::kInvalidTag, "interior edge (" + std::to_string(e.v[0]) + "," +
                                                std::to_string(e.v[1]) +
                                                ") is the refinement edge of only one neighbor");
      }
    }
  }
  for (int z = 0; z < nv; ++z) {
    if (boundary[z] && !touches_boundary[z]) {
      throw Error(ErrorCode::kNonConforming,
                  "vertex " + std::to_string(z) + " flagged boundary but has no boundary edge");
    }
  }
  return mesh;
}

MeshLevel read_mesh(std::istream& is) {
  std::string w1, w2;
  long long nv = -1, nt = -1;
  if (!(is >> w1 >> nv >> w2 >> nt) || w1 != "vertices" || w2 != "triangles" || nv < 0 || nt < 0) {
    throw Error(ErrorCode::kIo, "bad mesh header, expected `vertices N triangles M`");
  }
  std::vector<Point> pts(nv);
  std::unique_ptr<bool[]> flags(new bool[nv]);
  for (long long i = 0; i < nv; ++i) {
    int b = 0;
    if (!(is >> pts[i].x >> pts[i].y >> b)) throw Error(ErrorCode::kIo, "truncated vertex list");
    flags[i] = b != 0;
  }
  std::vector<std::array<int, 3>> tris(nt);
  std::vector<int> tags(nt);
  for (long long t = 0; t < nt; ++t) {
    if (!(is >> tris[t][0] >> tris[t][1] >> tris[t][2] >> tags[t])) {
      throw Error(ErrorCode::kIo, "truncated triangle list");
    }
  }
  return init_mesh(pts, std::span<const bool>(flags.get(), nv), tris, tags);
}

MeshLevel read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open mesh file " + path);
  return read_mesh(in);
}

RefineResult refine(const MeshLevel& level, std::span<const int> marked, RefineRule rule) {
  const int ne = level.num_edges();
  const int nv_old = level.num_vertices();
  auto refinement_edge_id = [&](int t) {
    return level.triangle_edges(t)[level.triangle(t).refinement_edge];
  };

  // Closure: every element with a marked edge must also have its refinement
  // edge marked.
  std::vector<char> edge_marked(ne, 0);
  std::vector<int> queue;
  for (int t : marked) {
    if (t < 0 || t >= level.num_triangles()) {
      throw Error(ErrorCode::kInvalidArgument, "marked element id out of range");
    }
    for (int i = 0; i < 3; ++i) {
      const int e = rule == RefineRule::kAllEdges ? level.triangle_edges(t)[i] : refinement_edge_id(t);
      if (!edge_marked[e]) {
        edge_marked[e] = 1;
        queue.push_back(e);
      }
    }
  }
  while (!queue.empty()) {
    const int e = queue.back();
    queue.pop_back();
    for (int t : level.edge(e).tri) {
      if (t < 0) continue;
      const int r = refinement_edge_id(t);
      if (!edge_marked[r]) {
        edge_marked[r] = 1;
        queue.push_back(r);
      }
    }
  }

  RefineResult out{MeshLevel({}, {}, level.level() + 1), {}, {}, {}};
  std::vector<Vertex> vertices = level.vertices();
  std::vector<int> midpoint(ne, -1);
  for (int e = 0; e < ne; ++e) {
    if (!edge_marked[e]) continue;
    const auto& edge = level.edge(e);
    const Point& a = level.vertex(edge.v[0]).p;
    const Point& b = level.vertex(edge.v[1]).p;
    midpoint[e] = static_cast<int>(vertices.size());
    vertices.push_back({{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}, edge.on_boundary(), level.level() + 1});
    out.new_vertex_parents.push_back(edge.v);
  }

  std::vector<Triangle> triangles;
  triangles.reserve(level.num_triangles() + 2 * out.new_vertex_parents.size());
  out.bisected.assign(level.num_triangles(), 0);

  auto marked_edge_of = [&](int a, int b) -> int {
    if (a >= nv_old || b >= nv_old) return -1;
    const int e = level.find_edge(a, b);
    return (e >= 0 && edge_marked[e]) ? e : -1;
  };

  // Bisects `tri` while its refinement edge is marked; depth is at most two.
  auto split = [&](auto&& self, const Triangle& tri, int parent) -> void {
    const int re = tri.refinement_edge;
    const int a = tri.v[re];
    const int b = tri.v[(re + 1) % 3];
    const int c = tri.v[(re + 2) % 3];
    const int e = marked_edge_of(a, b);
    if (e < 0) {
      triangles.push_back(tri);
      out.parent.push_back(parent);
      return;
    }
    const int m = midpoint[e];
    Triangle left{{c, a, m}, 0, tri.generation + 1, tri.ancestor0};
    Triangle right{{b, c, m}, 0, tri.generation + 1, tri.ancestor0};
    self(self, left, parent);
    self(self, right, parent);
  };

  for (int t = 0; t < level.num_triangles(); ++t) {
    if (edge_marked[refinement_edge_id(t)]) out.bisected[t] = 1;
    split(split, level.triangle(t), t);
  }
  out.mesh = MeshLevel(std::move(vertices), std::move(triangles), level.level() + 1);
  return out;
}

MeshHierarchy::MeshHierarchy(MeshLevel initial) {
  levels_.push_back(std::make_shared<const MeshLevel>(std::move(initial)));
  parents_.emplace_back();
  new_vertex_parents_.emplace_back();
  bisected_.emplace_back();
  std::vector<int> all(levels_[0]->num_vertices());
  std::iota(all.begin(), all.end(), 0);
  v_plus_.push_back(std::move(all));
}

const MeshLevel& MeshHierarchy::level(int l) const { return *level_ptr(l); }

std::shared_ptr<const MeshLevel> MeshHierarchy::level_ptr(int l) const {
  if (l < 0 || l > top()) throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(l));
  return levels_[l];
}

const MeshLevel& MeshHierarchy::refine(std::span<const int> marked, RefineRule rule) {
  RefineResult r = afemmg::refine(finest(), marked, rule);
  const int nv_old = finest().num_vertices();
  std::vector<int> vp;
  for (int t = 0; t < finest().num_triangles(); ++t) {
    if (!r.bisected[t]) continue;
    for (int z : finest().triangle(t).v) vp.push_back(z);
  }
  for (int z = nv_old; z < r.mesh.num_vertices(); ++z) vp.push_back(z);
  std::sort(vp.begin(), vp.end());
  vp.erase(std::unique(vp.begin(), vp.end()), vp.end());

  levels_.push_back(std::make_shared<const MeshLevel>(std::move(r.mesh)));
  parents_.push_back(std::move(r.parent));
  new_vertex_parents_.push_back(std::move(r.new_vertex_parents));
  bisected_.push_back(std::move(r.bisected));
  v_plus_.push_back(std::move(vp));
  return finest();
}

const std::vector<int>& MeshHierarchy::parents(int l) const {
  if (l < 1 || l > top()) throw Error(ErrorCode::kLevelOutOfRange, "parents of level " + std::to_string(l));
  return parents_[l];
}

const std::vector<std::array<int, 2>>& MeshHierarchy::new_vertex_parents(int l) const {
  if (l < 0 || l > top()) throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(l));
  return new_vertex_parents_[l];
}

const std::vector<char>& MeshHierarchy::bisected(int l) const {
  if (l < 1 || l > top()) throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(l));
  return bisected_[l];
}

const std::vector<int>& MeshHierarchy::v_plus(int l) const {
  if (l < 0 || l > top()) throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(l));
  return v_plus_[l];
}

MeshHierarchy MeshHierarchy::prefix(int l) const {
  if (l < 0 || l > top()) throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(l));
  MeshHierarchy h;
  h.levels_.assign(levels_.begin(), levels_.begin() + l + 1);
  h.parents_.assign(parents_.begin(), parents_.begin() + l + 1);
  h.new_vertex_parents_.assign(new_vertex_parents_.begin(), new_vertex_parents_.begin() + l + 1);
  h.bisected_.assign(bisected_.begin(), bisected_.begin() + l + 1);
  h.v_plus_.assign(v_plus_.begin(), v_plus_.begin() + l + 1);
  return h;
}

std::vector<int> compute_v_plus(const MeshHierarchy& h, int l) {
  if (l < 0 || l > h.top()) throw Error(ErrorCode::kLevelOutOfRange, "level " + std::to_string(l));
  const MeshLevel& fine = h.level(l);
  if (l == 0) {
    std::vector<int> all(fine.num_vertices());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  const MeshLevel& coarse = h.level(l - 1);
  std::vector<char> in(fine.num_vertices(), 0);
  for (int z = coarse.num_vertices(); z < fine.num_vertices(); ++z) in[z] = 1;
  const auto& bis = h.bisected(l);
  for (int t = 0; t < coarse.num_triangles(); ++t) {
    if (!bis[t]) continue;
    for (int z : coarse.triangle(t).v) in[z] = 1;
  }
  std::vector<int> out;
  for (int z = 0; z < fine.num_vertices(); ++z) {
    if (in[z]) out.push_back(z);
  }
  return out;
}

std::vector<int> patch(const MeshLevel& level, int z, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "patch ring count must be >= 1");
  if (z < 0 || z >= level.num_vertices()) throw Error(ErrorCode::kUnknownVertex, std::to_string(z));
  std::vector<char> in_patch(level.num_triangles(), 0);
  std::vector<char> seen_vertex(level.num_vertices(), 0);
  std::vector<int> frontier{z};
  seen_vertex[z] = 1;
  for (int ring = 0; ring < n; ++ring) {
    std::vector<int> next;
    for (int v : frontier) {
      for (int t : level.vertex_triangles(v)) {
        if (in_patch[t]) continue;
        in_patch[t] = 1;
        for (int w : level.triangle(t).v) {
          if (!seen_vertex[w]) {
            seen_vertex[w] = 1;
            next.push_back(w);
          }
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<int> out;
  for (int t = 0; t < level.num_triangles(); ++t) {
    if (in_patch[t]) out.push_back(t);
  }
  return out;
}

ShapeRegularity shape_regularity(const MeshLevel& level) {
  ShapeRegularity s;
  for (int t = 0; t < level.num_triangles(); ++t) {
    s.gamma = std::max(s.gamma, level.diameter(t) / std::sqrt(level.area(t)));
  }
  for (int z = 0; z < level.num_vertices(); ++z) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (int t : level.vertex_triangles(z)) {
      lo = std::min(lo, level.diameter(t));
      hi = std::max(hi, level.diameter(t));
    }
    if (hi > 0.0) s.neighbor_ratio = std::max(s.neighbor_ratio, hi / lo);
  }
  return s;
}

std::array<long long, 3> angle_fingerprint(const MeshLevel& level, int t) {
  const auto& v = level.triangle(t).v;
  std::array<double, 3> ang{};
  for (int i = 0; i < 3; ++i) {
    const Point& o = level.vertex(v[i]).p;
    const Point& a = level.vertex(v[(i + 1) % 3]).p;
    const Point& b = level.vertex(v[(i + 2) % 3]).p;
    const double ux = a.x - o.x, uy = a.y - o.y, wx = b.x - o.x, wy = b.y - o.y;
    ang[i] = std::atan2(std::abs(ux * wy - uy * wx), ux * wx + uy * wy);
  }
  std::sort(ang.begin(), ang.end());
  return {std::llround(ang[0] * 1e8), std::llround(ang[1] * 1e8), std::llround(ang[2] * 1e8)};
}

}  // namespace afemmg
