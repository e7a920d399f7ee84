#pragma once

#include "afemmg/afem.hpp"
#include "afemmg/problems.hpp"

#include <numeric>
#include <random>
#include <vector>

namespace afemmg::test {

inline std::vector<int> all_elements(const MeshLevel& m) {
  std::vector<int> ids(m.num_triangles());
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

/// Each level bisects every edge once (every triangle splits into four).
inline MeshHierarchy uniform_hierarchy(MeshLevel initial, int levels) {
  MeshHierarchy h(std::move(initial));
  for (int l = 0; l < levels; ++l) h.refine(all_elements(h.finest()), RefineRule::kAllEdges);
  return h;
}

/// Refines around the point (cx, cy): marks elements whose centroid is
/// within `radius` of it, or the nearest one.
inline MeshHierarchy graded_hierarchy(MeshLevel initial, int levels, double cx, double cy,
                                      double radius = 0.2) {
  MeshHierarchy h(std::move(initial));
  for (int l = 0; l < levels; ++l) {
    const MeshLevel& m = h.finest();
    std::vector<int> marked;
    int best = 0;
    double best_d = 1e300;
    for (int t = 0; t < m.num_triangles(); ++t) {
      const Point c = m.centroid(t);
      const double d = std::hypot(c.x - cx, c.y - cy);
      if (d < radius) marked.push_back(t);
      if (d < best_d) {
        best_d = d;
        best = t;
      }
    }
    if (marked.empty()) marked.push_back(best);
    h.refine(marked);
  }
  return h;
}

inline MeshHierarchy random_hierarchy(MeshLevel initial, int levels, double fraction, std::mt19937_64& rng) {
  MeshHierarchy h(std::move(initial));
  std::bernoulli_distribution pick(fraction);
  for (int l = 0; l < levels; ++l) {
    std::vector<int> marked;
    for (int t = 0; t < h.finest().num_triangles(); ++t) {
      if (pick(rng)) marked.push_back(t);
    }
    if (marked.empty()) marked.push_back(0);
    h.refine(marked);
  }
  return h;
}

inline Vector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

inline double rel_diff(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1e-300, std::max(a.norm(), b.norm()));
}

}  // namespace afemmg::test
