#include "afemmg/problems.hpp"

#include <cmath>
#include <numbers>

namespace afemmg {

namespace {

// Boundary vertices are the endpoints of edges with a single triangle.
MeshLevel from_lists(const std::vector<Point>& pts, const std::vector<std::array<int, 3>>& tris,
                     const std::vector<int>& tags) {
  std::vector<Vertex> verts;
  for (const auto& p : pts) verts.push_back({p, false, 0});
  std::vector<Triangle> cells;
  for (std::size_t i = 0; i < tris.size(); ++i) cells.push_back({tris[i], tags[i], 0, static_cast<int>(i)});
  const MeshLevel probe(std::move(verts), std::move(cells));
  std::unique_ptr<bool[]> bnd(new bool[pts.size()]());
  for (const auto& e : probe.edges()) {
    if (e.on_boundary()) bnd[e.v[0]] = bnd[e.v[1]] = true;
  }
  return init_mesh(pts, std::span<const bool>(bnd.get(), pts.size()), tris, tags);
}

}  // namespace

MeshLevel lshape_mesh() {
  const std::vector<Point> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}};
  const std::vector<std::array<int, 3>> tris{{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5}, {0, 5, 6}, {0, 6, 7}};
  return from_lists(pts, tris, {2, 0, 2, 0, 2, 0});
}

MeshLevel square_crisscross_mesh() {
  const std::vector<Point> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  const std::vector<std::array<int, 3>> tris{{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
  return from_lists(pts, tris, {0, 0, 0, 0});
}

MeshLevel square_diagonal_mesh() {
  const std::vector<Point> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const std::vector<std::array<int, 3>> tris{{0, 1, 2}, {0, 2, 3}};
  return from_lists(pts, tris, {2, 0});
}

MeshLevel checkerboard_mesh() {
  std::vector<Point> pts;
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) pts.push_back({0.5 * i, 0.5 * j});
  }
  const std::vector<std::array<int, 3>> tris{{0, 1, 4}, {0, 4, 3}, {1, 2, 4}, {2, 5, 4},
                                             {4, 5, 8}, {4, 8, 7}, {3, 4, 6}, {4, 7, 6}};
  return from_lists(pts, tris, {2, 0, 1, 2, 2, 0, 1, 2});
}

DiffusionField checkerboard_coefficient(const MeshLevel& initial, double low, double high) {
  std::vector<double> values;
  for (int t = 0; t < initial.num_triangles(); ++t) {
    const Point c = initial.centroid(t);
    const bool lower_left = c.x < 0.5 && c.y < 0.5;
    const bool upper_right = c.x > 0.5 && c.y > 0.5;
    values.push_back(lower_left || upper_right ? high : low);
  }
  return DiffusionField::per_element(std::move(values));
}

Problem make_problem(const std::string& name) {
  Problem p;
  p.name = name;
  if (name == "lshape_poisson") {
    p.mesh = std::make_shared<const MeshLevel>(lshape_mesh());
    p.K = DiffusionField::identity();
    p.f = [](const Point&) { return 1.0; };
  } else if (name == "checkerboard") {
    p.mesh = std::make_shared<const MeshLevel>(checkerboard_mesh());
    p.K = checkerboard_coefficient(*p.mesh, 1.0, 100.0);
    p.f = [](const Point&) { return 1.0; };
  } else if (name == "manufactured_sine") {
    constexpr double pi = std::numbers::pi;
    p.mesh = std::make_shared<const MeshLevel>(square_crisscross_mesh());
    p.K = DiffusionField::identity();
    p.f = [](const Point& x) { return 2.0 * pi * pi * std::sin(pi * x.x) * std::sin(pi * x.y); };
    p.exact_grad = [](const Point& x) -> Eigen::Vector2d {
      return {pi * std::cos(pi * x.x) * std::sin(pi * x.y), pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
    };
  } else {
    throw Error(ErrorCode::kConfig, "unknown problem '" + name + "'");
  }
  return p;
}

}  // namespace afemmg
