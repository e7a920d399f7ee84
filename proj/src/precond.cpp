#include "afemmg/precond.hpp"

#include <algorithm>
#include <cmath>

namespace afemmg {

const char* to_string(PrecondKind kind) {
  switch (kind) {
    case PrecondKind::kMg: return "MG";
    case PrecondKind::kNsMg: return "nsMG";
    case PrecondKind::kSMg: return "sMG";
    case PrecondKind::kAs: return "AS";
    case PrecondKind::kBpx: return "BPX";
  }
  return "?";
}

MgWorkspace::MgWorkspace(const MeshHierarchy& h, const FeSpace& space, const SparseMatrix& A,
                         const DiffusionField& K, MgOptions opts)
    : opts_(opts), top_(h.top()), A_(A) {
  if (h.num_levels() == 0) throw Error(ErrorCode::kEmptyHierarchy, "no levels");
  if (&space.mesh() != &h.finest() && space.mesh().num_triangles() != h.finest().num_triangles()) {
    throw Error(ErrorCode::kDimensionMismatch, "space does not live on the finest level");
  }
  if (A.rows() != space.num_dofs()) throw Error(ErrorCode::kDimensionMismatch, "matrix and space");
  if (!opts_.fine_patches_on_v_plus) opts_.fine_patches_on_v_plus = space.degree() == 1;

  for (int l = 0; l <= top_; ++l) {
    num_vertices_.push_back(h.level(l).num_vertices());
    new_parents_.push_back(h.new_vertex_parents(l));
  }

  for (const auto& v : h.finest().vertices()) boundary_.push_back(v.on_boundary ? 1 : 0);

  const FeSpace p1_coarse(h.level_ptr(0), 1);
  coarse_matrix_ = assemble_stiffness(p1_coarse, K);
  for (int d = 0; d < p1_coarse.num_dofs(); ++d) coarse_free_.push_back(p1_coarse.dof_node(d));
  coarse_ = std::make_unique<DirectSolver>(coarse_matrix_);

  blocks_.resize(std::max(top_, 1));
  for (int l = 1; l < top_; ++l) {
    blocks_[l] = assemble_level_block(h.level(l), free_v_plus(h, l), K);
    if (blocks_[l].diag.size() > 0 && !(blocks_[l].diag.minCoeff() > 0.0)) {
      throw Error(ErrorCode::kNonSpd, "non-positive level diagonal");
    }
  }

  const FeSpace p1_fine(h.level_ptr(top_), 1);
  Ep_ = interpolation_matrix(p1_fine, space, {});
  EpT_ = Ep_.transpose();

  std::vector<char> smoothing(num_vertices_[top_], *opts_.fine_patches_on_v_plus ? 0 : 1);
  if (*opts_.fine_patches_on_v_plus) {
    for (int z : h.v_plus(top_)) smoothing[z] = 1;
  }
  for (int z = 0; z < num_vertices_[top_]; ++z) {
    PatchMatrix pm = assemble_patch_matrix(space, A_, z);
    if (pm.dofs.empty()) continue;
    if (smoothing[z]) smoothing_patches_.push_back(static_cast<int>(patches_.size()));
    patches_.push_back(std::move(pm));
  }
}

long long MgWorkspace::memory_entries() const {
  long long s = coarse_matrix_.nonZeros() + Ep_.nonZeros();
  for (const auto& b : blocks_) s += b.B.nonZeros() + b.diag.size() + static_cast<long long>(b.rows.size());
  for (const auto& p : patches_) s += static_cast<long long>(p.dofs.size()) * (p.dofs.size() + 1);
  return s;
}

void MgWorkspace::restrict_level(Vector& g, int l, long long& work) const {
  const auto& np = new_parents_[l];
  const int base = num_vertices_[l - 1];
  for (std::size_t i = 0; i < np.size(); ++i) {
    const double half = 0.5 * g[base + static_cast<int>(i)];
    g[np[i][0]] += half;
    g[np[i][1]] += half;
  }
  work += 3 * static_cast<long long>(np.size());
}

void MgWorkspace::prolong_level(Vector& c, int l, long long& work) const {
  const auto& np = new_parents_[l];
  const int base = num_vertices_[l - 1];
  for (std::size_t i = 0; i < np.size(); ++i) {
    c[base + static_cast<int>(i)] = 0.5 * (c[np[i][0]] + c[np[i][1]]);
  }
  work += 3 * static_cast<long long>(np.size());
}

double MgWorkspace::row_dot(int l, int r, const Vector& v) const {
  double s = 0.0;
  for (SparseMatrix::InnerIterator it(blocks_[l].B, r); it; ++it) s += it.value() * v[it.col()];
  return s;
}

Vector MgWorkspace::patch_solve(const Vector& r, long long* work, bool all_vertices) const {
  Vector rho = Vector::Zero(r.size());
  Vector loc;
  long long w = 0;
  auto solve = [&](const PatchMatrix& pm) {
    const int n = static_cast<int>(pm.dofs.size());
    loc.resize(n);
    for (int i = 0; i < n; ++i) loc[i] = r[pm.dofs[i]];
    loc = pm.llt.solve(loc);
    for (int i = 0; i < n; ++i) rho[pm.dofs[i]] += loc[i];
    w += static_cast<long long>(n) * (n + 2);
  };
  if (all_vertices) {
    for (const auto& pm : patches_) solve(pm);
  } else {
    for (int i : smoothing_patches_) solve(patches_[i]);
  }
  if (work) *work += w;
  return rho;
}

Vector MgWorkspace::vcycle(const Vector& r, bool optimal_steps, ApplyStats* stats) const {
  if (r.size() != num_dofs()) throw Error(ErrorCode::kDimensionMismatch, "residual size");
  const int L = top_;
  const double lam_fixed = opts_.fixed_step;
  long long work = 0;
  StepSizeRecord rec;
  rec.nu.assign(L + 1, 0.0);
  rec.lambda.assign(L + 1, 0.0);

  // Restrict the residual functional to all levels, keeping the V^+ rows.
  Vector G = EpT_ * r;
  work += EpT_.nonZeros();
  std::vector<Vector> gv(L + 1);
  for (int j = L; j >= 1; --j) {
    restrict_level(G, j, work);
    const int lev = j - 1;
    if (lev >= 1) {
      const auto& rows = blocks_[lev].rows;
      gv[lev].resize(static_cast<int>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) gv[lev][i] = G[rows[i]];
      work += static_cast<long long>(rows.size());
    }
  }

  Vector g0(static_cast<int>(coarse_free_.size()));
  for (std::size_t i = 0; i < coarse_free_.size(); ++i) g0[i] = G[coarse_free_[i]];
  const Vector s0 = coarse_->solve(g0);
  work += coarse_matrix_.nonZeros() * 2;
  Vector c = Vector::Zero(num_vertices_[L]);
  for (std::size_t i = 0; i < coarse_free_.size(); ++i) c[coarse_free_[i]] = s0[i];
  rec.nu[0] = 1.0;
  rec.lambda[0] = 1.0;

  Vector tmp = Vector::Zero(num_vertices_[L]);
  for (int j = 1; j < L; ++j) {
    prolong_level(c, j, work);
    const LevelBlock& blk = blocks_[j];
    const int m = static_cast<int>(blk.rows.size());
    Vector rho(m);
    double num = 0.0;
    for (int i = 0; i < m; ++i) {
      const double d = gv[j][i] - row_dot(j, i, c);
      rho[i] = d / blk.diag[i];
      num += d * rho[i];
    }
    for (int i = 0; i < m; ++i) tmp[blk.rows[i]] = rho[i];
    double den = 0.0;
    for (int i = 0; i < m; ++i) den += rho[i] * row_dot(j, i, tmp);
    for (int i = 0; i < m; ++i) tmp[blk.rows[i]] = 0.0;
    work += 2 * blk.B.nonZeros() + 4 * m;

    double lambda = lam_fixed;
    double nu = 0.0;
    if (!(den > 0.0)) {
      lambda = 0.0;
    } else {
      nu = num / den;
      if (optimal_steps) lambda = nu <= 3.0 ? nu : 1.0 / 3.0;
    }
    rec.nu[j] = nu;
    rec.lambda[j] = lambda;
    for (int i = 0; i < m; ++i) c[blk.rows[i]] += lambda * rho[i];
  }

  if (L >= 1) prolong_level(c, L, work);
  Vector sigma = Ep_ * c;
  const Vector rf = r - A_ * sigma;
  work += Ep_.nonZeros() + A_.nonZeros();
  const Vector rho = patch_solve(rf, &work);
  const Vector Arho = A_ * rho;
  const double den = rho.dot(Arho);
  work += A_.nonZeros() + 2 * r.size();
  double lambda = lam_fixed;
  double nu = 0.0;
  if (!(den > 0.0)) {
    lambda = 0.0;
  } else {
    nu = rf.dot(rho) / den;
    if (optimal_steps) lambda = nu;
  }
  if (L > 0) {
    rec.nu[L] = nu;
    rec.lambda[L] = lambda;
  }
  sigma += lambda * rho;
  if (stats) {
    stats->work += work;
    stats->steps = std::move(rec);
  }
  return sigma;
}

Vector MgWorkspace::mg(const Vector& r, ApplyStats* stats) const { return vcycle(r, true, stats); }

Vector MgWorkspace::nsmg(const Vector& r, ApplyStats* stats) const { return vcycle(r, false, stats); }

Vector MgWorkspace::smg(const Vector& r, ApplyStats* stats) const {
  if (r.size() != num_dofs()) throw Error(ErrorCode::kDimensionMismatch, "residual size");
  const int L = top_;
  const double lam = opts_.fixed_step;
  long long work = 0;

  // Pre-smoothing, finest to coarse.
  Vector sigma = lam * patch_solve(r, &work);
  Vector G = EpT_ * (r - A_ * sigma);
  work += EpT_.nonZeros() + A_.nonZeros();
  std::vector<Vector> gt(L + 1), down(L + 1);
  for (int j = L; j >= 1; --j) {
    restrict_level(G, j, work);
    const int lev = j - 1;
    if (lev < 1) continue;
    const LevelBlock& blk = blocks_[lev];
    const int m = static_cast<int>(blk.rows.size());
    gt[lev].resize(m);
    down[lev].resize(m);
    for (int i = 0; i < m; ++i) {
      gt[lev][i] = G[blk.rows[i]];
      down[lev][i] = gt[lev][i] / blk.diag[i];
    }
    for (int i = 0; i < m; ++i) {
      const double w = lam * down[lev][i];
      for (SparseMatrix::InnerIterator it(blk.B, i); it; ++it) G[it.col()] -= w * it.value();
    }
    work += blk.B.nonZeros() + 3 * m;
  }

  Vector g0(static_cast<int>(coarse_free_.size()));
  for (std::size_t i = 0; i < coarse_free_.size(); ++i) g0[i] = G[coarse_free_[i]];
  const Vector s0 = coarse_->solve(g0);
  work += coarse_matrix_.nonZeros() * 2;
  Vector c = Vector::Zero(num_vertices_[L]);
  for (std::size_t i = 0; i < coarse_free_.size(); ++i) c[coarse_free_[i]] = s0[i];

  // Post-smoothing, coarse to finest.
  Vector tmp = Vector::Zero(num_vertices_[L]);
  for (int j = 1; j < L; ++j) {
    prolong_level(c, j, work);
    const LevelBlock& blk = blocks_[j];
    const int m = static_cast<int>(blk.rows.size());
    for (int i = 0; i < m; ++i) tmp[blk.rows[i]] = down[j][i];
    Vector up(m);
    for (int i = 0; i < m; ++i) {
      const double res = gt[j][i] - lam * row_dot(j, i, tmp) - row_dot(j, i, c);
      up[i] = res / blk.diag[i];
    }
    for (int i = 0; i < m; ++i) {
      tmp[blk.rows[i]] = 0.0;
      c[blk.rows[i]] += lam * (down[j][i] + up[i]);
    }
    work += 2 * blk.B.nonZeros() + 5 * m;
  }
  if (L >= 1) prolong_level(c, L, work);
  sigma += Ep_ * c;
  const Vector rf = r - A_ * sigma;
  sigma += lam * patch_solve(rf, &work);
  work += Ep_.nonZeros() + A_.nonZeros();
  if (stats) stats->work += work;
  return sigma;
}

Vector MgWorkspace::as(const Vector& r, ApplyStats* stats) const {
  if (r.size() != num_dofs()) throw Error(ErrorCode::kDimensionMismatch, "residual size");
  const int L = top_;
  long long work = 0;
  Vector G = EpT_ * r;
  work += EpT_.nonZeros();
  std::vector<Vector> corr(L + 1);
  for (int j = L; j >= 1; --j) {
    restrict_level(G, j, work);
    const int lev = j - 1;
    if (lev < 1) continue;
    const LevelBlock& blk = blocks_[lev];
    corr[lev].resize(static_cast<int>(blk.rows.size()));
    for (std::size_t i = 0; i < blk.rows.size(); ++i) corr[lev][i] = G[blk.rows[i]] / blk.diag[i];
    work += 2 * static_cast<long long>(blk.rows.size());
  }
  Vector g0(static_cast<int>(coarse_free_.size()));
  for (std::size_t i = 0; i < coarse_free_.size(); ++i) g0[i] = G[coarse_free_[i]];
  const Vector s0 = coarse_->solve(g0);
  Vector c = Vector::Zero(num_vertices_[L]);
  for (std::size_t i = 0; i < coarse_free_.size(); ++i) c[coarse_free_[i]] = s0[i];
  for (int j = 1; j < L; ++j) {
    prolong_level(c, j, work);
    const auto& rows = blocks_[j].rows;
    for (std::size_t i = 0; i < rows.size(); ++i) c[rows[i]] += corr[j][i];
  }
  if (L >= 1) prolong_level(c, L, work);
  Vector s = Ep_ * c + patch_solve(r, &work, true);
  work += Ep_.nonZeros();
  if (stats) stats->work += work;
  return s;
}

Vector MgWorkspace::bpx(const Vector& r, ApplyStats* stats) const {
  if (r.size() != num_dofs()) throw Error(ErrorCode::kDimensionMismatch, "residual size");
  const int L = top_;
  long long work = 0;
  Vector G = EpT_ * r;
  std::vector<Vector> full(L + 1);
  for (int j = L; j >= 1; --j) {
    restrict_level(G, j, work);
    const int lev = j - 1;
    if (lev >= 1) full[lev] = G.head(num_vertices_[lev]);
  }
  Vector g0(static_cast<int>(coarse_free_.size()));
  for (std::size_t i = 0; i < coarse_free_.size(); ++i) g0[i] = G[coarse_free_[i]];
  const Vector s0 = coarse_->solve(g0);
  Vector c = Vector::Zero(num_vertices_[L]);
  for (std::size_t i = 0; i < coarse_free_.size(); ++i) c[coarse_free_[i]] = s0[i];
  for (int j = 1; j < L; ++j) {
    prolong_level(c, j, work);
    const Vector& g = full[j];
    for (int z = 0; z < num_vertices_[j]; ++z) {
      if (!boundary_[z]) c[z] += g[z];
    }
    work += num_vertices_[j];
  }
  if (L >= 1) prolong_level(c, L, work);
  Vector s = Ep_ * c + r;
  work += Ep_.nonZeros() + EpT_.nonZeros();
  if (stats) stats->work += work;
  return s;
}

Vector MgWorkspace::apply(PrecondKind kind, const Vector& r, ApplyStats* stats) const {
  switch (kind) {
    case PrecondKind::kMg: return mg(r, stats);
    case PrecondKind::kNsMg: return nsmg(r, stats);
    case PrecondKind::kSMg: return smg(r, stats);
    case PrecondKind::kAs: return as(r, stats);
    case PrecondKind::kBpx: return bpx(r, stats);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown preconditioner");
}

PreconditionerHandle make_preconditioner(std::shared_ptr<const MgWorkspace> ws, PrecondKind kind) {
  PreconditionerHandle h;
  h.name = to_string(kind);
  h.is_linear = kind != PrecondKind::kMg;
  h.is_symmetric = kind == PrecondKind::kSMg || kind == PrecondKind::kAs || kind == PrecondKind::kBpx;
  h.apply = [ws = std::move(ws), kind](const Vector& r) { return ws->apply(kind, r); };
  return h;
}

}  // namespace afemmg
