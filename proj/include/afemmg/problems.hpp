#pragma once

#include "afemmg/assembly.hpp"
#include "afemmg/mesh.hpp"

#include <memory>
#include <string>

namespace afemmg {

/// Built-in initial meshes (all pass init_mesh validation).
MeshLevel lshape_mesh();            // 6 triangles fanned around the reentrant corner
MeshLevel square_crisscross_mesh(); // 4 triangles around the center
MeshLevel square_diagonal_mesh();   // 2 triangles sharing the diagonal
MeshLevel checkerboard_mesh();      // 8 triangles aligned with the 2x2 pattern

struct Problem {
  std::string name;
  std::shared_ptr<const MeshLevel> mesh;
  DiffusionField K;
  ScalarField f;
  VectorField exact_grad;  // empty when no closed form is known
};

/// Names: lshape_poisson, checkerboard, manufactured_sine.
Problem make_problem(const std::string& name);

/// Checkerboard coefficient: `high` on the lower-left and upper-right
/// quarters of the unit square, `low` elsewhere (per initial triangle).
DiffusionField checkerboard_coefficient(const MeshLevel& initial, double low, double high);

}  // namespace afemmg
