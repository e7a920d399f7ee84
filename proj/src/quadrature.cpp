#include "afemmg/quadrature.hpp"

#include "afemmg/common.hpp"

#include <cmath>
#include <numbers>

namespace afemmg {

namespace {

constexpr int kMaxDegree = 48;

// Collapsed (Duffy) product of Gauss-Legendre rules. Not symmetric, but
// exact to the requested degree with positive weights.
TriangleRule make_triangle_rule(int degree) {
  const int n = (degree + 2) / 2 + 1;
  const LineRule gl = gauss_legendre(n);
  TriangleRule r;
  r.degree = degree;
  for (int i = 0; i < n; ++i) {
    const double u = gl.points[i];
    for (int j = 0; j < n; ++j) {
      const double v = gl.points[j];
      r.points.push_back({u, v * (1.0 - u)});
      r.weights.push_back(gl.weights[i] * gl.weights[j] * (1.0 - u));
    }
  }
  return r;
}

struct Tables {
  std::vector<TriangleRule> tri;
  std::vector<LineRule> line;
  Tables() {
    for (int d = 0; d <= kMaxDegree; ++d) {
      tri.push_back(make_triangle_rule(d));
      LineRule l = gauss_legendre(d / 2 + 1);
      l.degree = d;
      line.push_back(std::move(l));
    }
  }
};

const Tables& tables() {
  static const Tables t;
  return t;
}

}  // namespace

LineRule gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "Gauss-Legendre needs n >= 1");
  LineRule r;
  r.points.resize(n);
  r.weights.resize(n);
  r.degree = 2 * n - 1;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.points[i] = 0.5 * (1.0 - x);
    r.points[n - 1 - i] = 0.5 * (1.0 + x);
    r.weights[i] = 0.5 * w;
    r.weights[n - 1 - i] = 0.5 * w;
  }
  return r;
}

const TriangleRule& triangle_rule(int degree) {
  if (degree < 0 || degree > kMaxDegree) {
    throw Error(ErrorCode::kInvalidArgument, "quadrature degree out of range");
  }
  return tables().tri[degree];
}

const LineRule& line_rule(int degree) {
  if (degree < 0 || degree > kMaxDegree) {
    throw Error(ErrorCode::kInvalidArgument, "quadrature degree out of range");
  }
  return tables().line[degree];
}

}  // namespace afemmg
