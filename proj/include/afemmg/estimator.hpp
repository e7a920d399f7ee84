#pragma once

#include "afemmg/assembly.hpp"
#include "afemmg/fespace.hpp"

#include <vector>

namespace afemmg {

/// Squared residual indicators per element.
struct IndicatorField {
  std::vector<double> eta2;
  double total() const;  // sum of eta2
};

/// eta_T^2 = h_T^2 ||f + div(K grad u)||_T^2 + h_T ||[K grad u] . n||^2 over
/// the interior edges of T, with h_T = |T|^{1/2}.
IndicatorField indicators(const FeSpace& space, const DiffusionField& K, const ScalarField& f,
                          const Vector& x);

}  // namespace afemmg
