#pragma once

#include <array>
#include <vector>

namespace afemmg {

/// Rule on the reference triangle with vertices (0,0), (1,0), (0,1).
/// Weights sum to 1/2.
struct TriangleRule {
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Rule on [0,1]; weights sum to 1.
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Gauss-Legendre rule with n points on [0,1].
LineRule gauss_legendre(int n);

/// Rules exact for polynomials of total degree <= `degree`. Cached; safe to
/// call concurrently.
const TriangleRule& triangle_rule(int degree);
const LineRule& line_rule(int degree);

}  // namespace afemmg
