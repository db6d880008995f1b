#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mch/common.hpp"
#include "mch/geometry.hpp"

namespace mch {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ScalarField = std::function<double(double, double)>;

/// Reference Q1 stiffness for -div(grad) on a square cell. Size-independent
/// in 2D. Local corner order: (0,0), (1,0), (0,1), (1,1).
inline const Eigen::Matrix4d& q1_element_stiffness() {
  static const Eigen::Matrix4d k = [] {
    Eigen::Matrix4d m;
    const double d = 2.0 / 3.0, a = -1.0 / 6.0, o = -1.0 / 3.0;
    m << d, a, a, o,
         a, d, o, a,
         a, o, d, a,
         o, a, a, d;
    return m;
  }();
  return k;
}

/// Corner offsets matching the local order of q1_element_stiffness().
inline constexpr std::array<std::pair<int, int>, 4> kCellCorners{
    {{0, 0}, {1, 0}, {0, 1}, {1, 1}}};

/// Q1 stiffness over the region's non-solid cells, kappa sampled at cell
/// midpoints. Dirichlet rows and columns are eliminated symmetrically
/// (all Dirichlet data is zero).
inline SparseMatrix assemble_stiffness(const OversampleRegion& region,
                                       const ScalarField& kappa) {
  const PerforatedMesh& mesh = *region.mesh;
  require(region.n_free > 0, "assemble_stiffness: region has no free nodes");
  const Eigen::Matrix4d& ke = q1_element_stiffness();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<size_t>(region.n_free) * 9);
  for (int ly = 0; ly < region.ncy; ++ly) {
    for (int lx = 0; lx < region.ncx; ++lx) {
      int gx = region.cx0 + lx, gy = region.cy0 + ly;
      if (mesh.label(gx, gy) == kSolid) continue;
      double kc = kappa(mesh.cell_mid_x(gx), mesh.cell_mid_y(gy));
      std::array<int, 4> dof;
      for (int c = 0; c < 4; ++c)
        dof[c] = region.dof_at(lx + kCellCorners[c].first,
                               ly + kCellCorners[c].second);
      for (int a = 0; a < 4; ++a) {
        if (dof[a] < 0) continue;
        for (int b = 0; b < 4; ++b) {
          if (dof[b] < 0) continue;
          triplets.emplace_back(dof[a], dof[b], kc * ke(a, b));
        }
      }
    }
  }
  SparseMatrix mat(region.n_free, region.n_free);
  mat.setFromTriplets(triplets.begin(), triplets.end());
  return mat;
}

/// Consistent Q1 load: f sampled at cell midpoints, h^2/4 per corner.
inline Vector assemble_load(const OversampleRegion& region,
                            const ScalarField& f) {
  const PerforatedMesh& mesh = *region.mesh;
  Vector rhs = Vector::Zero(region.n_free);
  const double w = mesh.h * mesh.h / 4.0;
  for (int ly = 0; ly < region.ncy; ++ly) {
    for (int lx = 0; lx < region.ncx; ++lx) {
      int gx = region.cx0 + lx, gy = region.cy0 + ly;
      if (mesh.label(gx, gy) == kSolid) continue;
      double fv = w * f(mesh.cell_mid_x(gx), mesh.cell_mid_y(gy));
      for (const auto& [dx, dy] : kCellCorners) {
        int d = region.dof_at(lx + dx, ly + dy);
        if (d >= 0) rhs[d] += fv;
      }
    }
  }
  return rhs;
}

/// Symmetric factorization of an SPD stiffness matrix, reusable across
/// right-hand sides. Every solve is residual-checked.
class SpdSolver {
public:
  explicit SpdSolver(const SparseMatrix& a) : a_(a) {
    ldlt_.compute(a_);
    require(ldlt_.info() == Eigen::Success,
            "SpdSolver: factorization failed (matrix singular or not SPD)");
  }

  Vector solve(const Vector& rhs) const {
    Vector x = ldlt_.solve(rhs);
    double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return Vector::Zero(rhs.size());
    double rel = (a_ * x - rhs).norm() / rhs_norm;
    require(rel <= 1e-10, "SpdSolver: residual " + std::to_string(rel) +
                              " exceeds 1e-10");
    return x;
  }

  /// Unchecked multi-RHS solve, used for Schur-complement columns.
  Matrix solve_multi(const Matrix& rhs) const { return ldlt_.solve(rhs); }

  const SparseMatrix& matrix() const { return a_; }

private:
  SparseMatrix a_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

inline Vector solve_spd(const SparseMatrix& a, const Vector& rhs) {
  return SpdSolver(a).solve(rhs);
}

/// Continuum-average constraint rows over the region's coarse blocks.
/// Row (j, q) holds the Q1-consistent weights of v -> integral of psi_j v
/// over block q; rows with zero continuum measure are dropped.
struct ConstraintBlock {
  SparseMatrix c;                        // n_rows x n_free
  std::vector<std::pair<int, int>> row_key;  // (continuum j, block q)
  std::vector<double> row_measure;       // continuum_measure(q, j)

  int n_rows() const { return static_cast<int>(row_key.size()); }

  int find_row(int j, int q) const {
    for (int r = 0; r < n_rows(); ++r)
      if (row_key[r].first == j && row_key[r].second == q) return r;
    return -1;
  }
};

inline ConstraintBlock build_constraints(const OversampleRegion& region) {
  const PerforatedMesh& mesh = *region.mesh;
  ConstraintBlock cb;
  std::vector<Eigen::Triplet<double>> triplets;
  const double w = mesh.h * mesh.h / 4.0;
  for (int by = region.by0; by <= region.by1; ++by) {
    for (int bx = region.bx0; bx <= region.bx1; ++bx) {
      int q = mesh.block_index(bx, by);
      for (int j = 1; j <= 2; ++j) {
        double measure = mesh.continuum_measure(q, j);
        if (measure == 0.0) continue;
        int row = cb.n_rows();
        cb.row_key.emplace_back(j, q);
        cb.row_measure.push_back(measure);
        for (int cy = by * mesh.n_fine; cy < (by + 1) * mesh.n_fine; ++cy) {
          for (int cx = bx * mesh.n_fine; cx < (bx + 1) * mesh.n_fine; ++cx) {
            if (mesh.label(cx, cy) != j) continue;
            int lx = cx - region.cx0, ly = cy - region.cy0;
            for (const auto& [dx, dy] : kCellCorners) {
              int d = region.dof_at(lx + dx, ly + dy);
              if (d >= 0) triplets.emplace_back(row, d, w);
            }
          }
        }
      }
    }
  }
  cb.c.resize(cb.n_rows(), region.n_free);
  cb.c.setFromTriplets(triplets.begin(), triplets.end());
  return cb;
}

/// Result of one constrained solve: the field on free dofs, the raw
/// multipliers lambda, and the scaled multipliers beta_(j,q) =
/// lambda_(j,q) * continuum_measure(q, j).
struct SaddleSolution {
  Vector phi;
  Vector lambda;
  Vector beta;
};

/// Solves [A C^T; C 0][phi; lambda] = [0; g] by dense Schur complement
/// S = C A^-1 C^T. A is factored once; solving for additional right-hand
/// sides g reuses both the factorization and S.
class SaddleSolver {
public:
  SaddleSolver(const SparseMatrix& a, const ConstraintBlock& cb)
      : spd_(a), cb_(cb) {
    const int m = cb_.n_rows();
    y_.resize(a.rows(), m);
    Matrix ct = Matrix(cb_.c.transpose());
    y_ = spd_.solve_multi(ct);
    schur_ = Matrix(cb_.c) * y_;
    lu_.compute(schur_);
    if (lu_.rank() < m) {
      std::string msg = "SaddleSolver: rank-deficient constraint set; "
                        "dependent rows (j,q):";
      // The column permutation orders pivots by magnitude; trailing columns
      // past the numerical rank identify the dependent constraints.
      const auto& perm = lu_.permutationQ();
      for (int r = lu_.rank(); r < m; ++r) {
        int row = perm.indices()[r];
        msg += " (" + std::to_string(cb_.row_key[row].first) + "," +
               std::to_string(cb_.row_key[row].second) + ")";
      }
      throw Error(msg);
    }
  }

  SaddleSolution solve(const Vector& g) const {
    require(g.size() == cb_.n_rows(),
            "SaddleSolver: right-hand side size mismatch");
    SaddleSolution sol;
    if (cb_.n_rows() == 0) {
      sol.phi = Vector::Zero(spd_.matrix().rows());
      return sol;
    }
    sol.lambda = lu_.solve(g);
    sol.phi = y_ * sol.lambda;
    double g_norm = g.norm();
    double scale = (g_norm > 0.0) ? g_norm : 1.0;
    double constraint_res = (cb_.c * sol.phi - g).norm() / scale;
    require(constraint_res <= 1e-9,
            "SaddleSolver: constraint residual " +
                std::to_string(constraint_res) + " exceeds 1e-9");
    Vector ct_lambda = cb_.c.transpose() * sol.lambda;
    double ct_norm = ct_lambda.norm();
    if (ct_norm > 0.0) {
      double opt_res =
          (spd_.matrix() * sol.phi - ct_lambda).norm() / ct_norm;
      require(opt_res <= 1e-9, "SaddleSolver: optimality residual " +
                                   std::to_string(opt_res) + " exceeds 1e-9");
    }
    sol.beta.resize(cb_.n_rows());
    for (int r = 0; r < cb_.n_rows(); ++r)
      sol.beta[r] = sol.lambda[r] * cb_.row_measure[r];
    return sol;
  }

  const ConstraintBlock& constraints() const { return cb_; }
  const SpdSolver& spd() const { return spd_; }

private:
  SpdSolver spd_;
  ConstraintBlock cb_;
  Matrix y_;
  Matrix schur_;
  Eigen::FullPivLU<Matrix> lu_;
};

inline SaddleSolution solve_saddle(const SparseMatrix& a,
                                   const ConstraintBlock& cb,
                                   const Vector& g) {
  return SaddleSolver(a, cb).solve(g);
}

/// Field value at a local node; Dirichlet and absent nodes are zero.
inline double field_value(const OversampleRegion& region, const Vector& phi,
                          int lx, int ly) {
  int d = region.dof_at(lx, ly);
  return d >= 0 ? phi[d] : 0.0;
}

}  // namespace mch
