#include "afemmg/estimator.hpp"

#include "afemmg/quadrature.hpp"

#include <cmath>
#include <numeric>

namespace afemmg {

double IndicatorField::total() const { return std::accumulate(eta2.begin(), eta2.end(), 0.0); }

namespace {

Eigen::Vector2d local_gradient(const FeSpace& space, const AffineMap& map, int t, const Vector& u,
                               const Point& x, std::vector<std::array<double, 2>>& g) {
  const auto r = map.pull_back(x);
  space.reference().eval_grad(r[0], r[1], g);
  const auto nodes = space.cell_nodes(t);
  Eigen::Vector2d ref = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < nodes.size(); ++i) ref += u[nodes[i]] * Eigen::Vector2d(g[i][0], g[i][1]);
  return map.inv_jac.transpose() * ref;
}

}  // namespace

IndicatorField indicators(const FeSpace& space, const DiffusionField& K, const ScalarField& f,
                          const Vector& x) {
  if (x.size() != space.num_dofs()) throw Error(ErrorCode::kDimensionMismatch, "indicator input");
  const MeshLevel& mesh = space.mesh();
  const int p = space.degree();
  const int extra = K.piecewise_constant ? 0 : 2;
  const TriangleRule& rule = triangle_rule(2 * p + 2 + extra);
  const Tabulation tab = tabulate(space.reference(), rule, true);
  const Vector u = space.to_nodes(x);
  const int n = tab.num_nodes;

  IndicatorField out;
  out.eta2.assign(mesh.num_triangles(), 0.0);
  std::vector<AffineMap> maps;
  maps.reserve(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    maps.emplace_back(mesh, t);
    const AffineMap& map = maps.back();
    const auto nodes = space.cell_nodes(t);
    const int anc = mesh.triangle(t).ancestor0;
    double vol = 0.0;
    for (int q = 0; q < tab.num_points; ++q) {
      const Point xq = map.map(rule.points[q][0], rule.points[q][1]);
      Eigen::Vector2d gref = Eigen::Vector2d::Zero();
      std::array<double, 3> href{0.0, 0.0, 0.0};
      for (int i = 0; i < n; ++i) {
        const double ui = u[nodes[i]];
        if (ui == 0.0) continue;
        gref += ui * Eigen::Vector2d(tab.grad[q * n + i][0], tab.grad[q * n + i][1]);
        for (int c = 0; c < 3; ++c) href[c] += ui * tab.hess[q * n + i][c];
      }
      const Eigen::Vector2d grad = map.inv_jac.transpose() * gref;
      const Eigen::Matrix2d hess = map.hess(href);
      const Eigen::Matrix2d k = K.K(xq, anc);
      double res = f(xq) + (k.array() * hess.array()).sum();
      if (K.div_K) res += K.div_K(xq, anc).dot(grad);
      vol += rule.weights[q] * std::abs(map.det) * res * res;
    }
    out.eta2[t] = mesh.area(t) * vol;
  }

  const LineRule& line = line_rule(2 * p + extra);
  std::vector<std::array<double, 2>> g;
  for (const Edge& e : mesh.edges()) {
    if (e.on_boundary()) continue;
    const Point& a = mesh.vertex(e.v[0]).p;
    const Point& b = mesh.vertex(e.v[1]).p;
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const Eigen::Vector2d normal((b.y - a.y) / len, -(b.x - a.x) / len);
    const int t0 = e.tri[0], t1 = e.tri[1];
    const int a0 = mesh.triangle(t0).ancestor0, a1 = mesh.triangle(t1).ancestor0;
    double jump = 0.0;
    for (std::size_t q = 0; q < line.points.size(); ++q) {
      const double s = line.points[q];
      const Point xq{a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
      const Eigen::Vector2d g0 = K.K(xq, a0) * local_gradient(space, maps[t0], t0, u, xq, g);
      const Eigen::Vector2d g1 = K.K(xq, a1) * local_gradient(space, maps[t1], t1, u, xq, g);
      const double j = (g0 - g1).dot(normal);
      jump += line.weights[q] * len * j * j;
    }
    out.eta2[t0] += std::sqrt(mesh.area(t0)) * jump;
    out.eta2[t1] += std::sqrt(mesh.area(t1)) * jump;
  }
  return out;
}

}  // namespace afemmg
