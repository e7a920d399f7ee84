#pragma once

#include "afemmg/assembly.hpp"
#include "afemmg/common.hpp"
#include "afemmg/fespace.hpp"
#include "afemmg/krylov.hpp"
#include "afemmg/mesh.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace afemmg {

enum class PrecondKind { kMg, kNsMg, kSMg, kAs, kBpx };

const char* to_string(PrecondKind kind);

/// Step sizes of one V-cycle, indexed by level 0..L.
struct StepSizeRecord {
  std::vector<double> nu;
  std::vector<double> lambda;
};

struct ApplyStats {
  long long work = 0;  // scalar dof touches
  StepSizeRecord steps;
};

struct MgOptions {
  /// Restrict the finest patch corrections of the multiplicative variants
  /// to V_L^+. Defaults to p == 1. AS always sums over all vertices.
  std::optional<bool> fine_patches_on_v_plus;
  /// Fixed step size of the linear variants (1 / (d + 1)).
  double fixed_step = 1.0 / 3.0;
};

/// Prepared multilevel data shared by all preconditioners: coarse
/// factorization, V^+ rows and diagonals per intermediate level, finest
/// patch factorizations, and the P1 -> Pp embedding on the finest mesh.
/// Vectors on intermediate levels are indexed by persistent vertex id, so
/// two-level transfers touch only the new vertices of a level.
class MgWorkspace {
 public:
  MgWorkspace(const MeshHierarchy& h, const FeSpace& space, const SparseMatrix& A,
              const DiffusionField& K, MgOptions opts = {});

  int top() const { return top_; }
  int num_dofs() const { return static_cast<int>(A_.rows()); }
  int num_patches() const { return static_cast<int>(patches_.size()); }
  const SparseMatrix& matrix() const { return A_; }
  const std::vector<int>& level_rows(int l) const { return blocks_.at(l).rows; }
  const Vector& level_diagonal(int l) const { return blocks_.at(l).diag; }
  const std::vector<PatchMatrix>& patches() const { return patches_; }
  double fixed_step() const { return opts_.fixed_step; }
  /// Stored scalars: level rows, patch factors, embedding, coarse matrix.
  long long memory_entries() const;

  Vector mg(const Vector& r, ApplyStats* stats = nullptr) const;
  Vector nsmg(const Vector& r, ApplyStats* stats = nullptr) const;
  Vector smg(const Vector& r, ApplyStats* stats = nullptr) const;
  Vector as(const Vector& r, ApplyStats* stats = nullptr) const;
  Vector bpx(const Vector& r, ApplyStats* stats = nullptr) const;
  Vector apply(PrecondKind kind, const Vector& r, ApplyStats* stats = nullptr) const;

  /// Sum of finest patch solves on r over the smoothing patches, or over
  /// the patches of all vertices.
  Vector patch_solve(const Vector& r, long long* work = nullptr, bool all_vertices = false) const;

 private:
  Vector vcycle(const Vector& r, bool optimal_steps, ApplyStats* stats) const;
  void restrict_level(Vector& g, int l, long long& work) const;
  void prolong_level(Vector& c, int l, long long& work) const;
  double row_dot(int l, int r, const Vector& v) const;

  MgOptions opts_;
  int top_ = 0;
  SparseMatrix A_;
  std::vector<int> num_vertices_;
  std::vector<std::vector<std::array<int, 2>>> new_parents_;
  std::vector<char> boundary_;  // per vertex id, fixed across levels
  std::vector<int> coarse_free_;
  std::unique_ptr<DirectSolver> coarse_;
  SparseMatrix coarse_matrix_;
  std::vector<LevelBlock> blocks_;  // index 1..top-1 used
  SparseMatrix Ep_, EpT_;
  std::vector<PatchMatrix> patches_;   // every vertex with interior dofs
  std::vector<int> smoothing_patches_;  // indices into patches_
};

/// Handle with the declared flags of each kind: MG non-linear and
/// non-symmetric, nsMG linear and non-symmetric, the others SPD.
PreconditionerHandle make_preconditioner(std::shared_ptr<const MgWorkspace> ws, PrecondKind kind);

}  // namespace afemmg
