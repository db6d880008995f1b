#pragma once

#include <array>
#include <string>
#include <vector>

#include "mch/common.hpp"
#include "mch/fem.hpp"
#include "mch/geometry.hpp"

namespace mch {

/// Local basis of coarse block p on its oversampled region: the two
/// average fields phi_i and the four gradient fields phi_i^m, with their
/// multipliers. Indices are 0-based: continuum index i-1, direction m-1.
struct CellBasisSet {
  OversampleRegion region;
  std::array<Vector, 2> phi;
  std::array<std::array<Vector, 2>, 2> phi_grad;  // [i][m]
  std::array<Vector, 2> beta_avg;
  std::array<std::array<Vector, 2>, 2> beta_grad;
  std::array<std::array<double, 2>, 2> c{};  // c[m][j] centering offsets
  std::vector<std::pair<int, int>> row_key;  // (j, q) per multiplier row
};

/// Shares one stiffness factorization and Schur complement across all six
/// constrained solves of a block.
class CellProblemSolver {
public:
  CellProblemSolver(const PerforatedMesh& mesh, const ScalarField& kappa,
                    int p, int l)
      : mesh_(mesh), region_(mesh, p, l),
        cb_(build_constraints(region_)),
        saddle_(assemble_stiffness(region_, kappa), cb_) {}

  const OversampleRegion& region() const { return region_; }
  const ConstraintBlock& constraints() const { return cb_; }

  /// Average-constrained fields: the (j,q) constraint value is
  /// delta_ij * |continuum j in block q|.
  void average_basis(CellBasisSet& out) const {
    for (int i = 1; i <= 2; ++i) {
      Vector g(cb_.n_rows());
      for (int r = 0; r < cb_.n_rows(); ++r)
        g[r] = (cb_.row_key[r].first == i) ? cb_.row_measure[r] : 0.0;
      SaddleSolution sol = solve_with_context(g, "phi_" + std::to_string(i));
      out.phi[i - 1] = std::move(sol.phi);
      out.beta_avg[i - 1] = std::move(sol.beta);
    }
  }

  /// Gradient-constrained fields: the (j,q) constraint value is
  /// delta_ij * integral over block q of (x_m - c_mi) psi_i, with c_mi
  /// anchored to the central block.
  void gradient_basis(CellBasisSet& out) const {
    for (int m = 1; m <= 2; ++m)
      for (int j = 1; j <= 2; ++j)
        out.c[m - 1][j - 1] = mesh_.centered_offset(region_.p, j, m - 1);
    for (int i = 1; i <= 2; ++i) {
      for (int m = 1; m <= 2; ++m) {
        Vector g(cb_.n_rows());
        for (int r = 0; r < cb_.n_rows(); ++r) {
          const auto& [j, q] = cb_.row_key[r];
          g[r] = (j == i) ? first_moment(q, i, m - 1, out.c[m - 1][i - 1])
                          : 0.0;
        }
        SaddleSolution sol = solve_with_context(
            g, "phi_" + std::to_string(i) + "^" + std::to_string(m));
        out.phi_grad[i - 1][m - 1] = std::move(sol.phi);
        out.beta_grad[i - 1][m - 1] = std::move(sol.beta);
      }
    }
  }

  CellBasisSet solve_all() const {
    CellBasisSet out;
    out.region = region_;
    out.row_key = cb_.row_key;
    average_basis(out);
    gradient_basis(out);
    return out;
  }

private:
  /// Midpoint-quadrature first moment of (x_m - c) over continuum j of
  /// block q.
  double first_moment(int q, int j, int m, double c) const {
    int bx = q % mesh_.n_coarse, by = q / mesh_.n_coarse;
    double sum = 0.0;
    for (int cy = by * mesh_.n_fine; cy < (by + 1) * mesh_.n_fine; ++cy)
      for (int cx = bx * mesh_.n_fine; cx < (bx + 1) * mesh_.n_fine; ++cx)
        if (mesh_.label(cx, cy) == j)
          sum += ((m == 0) ? mesh_.cell_mid_x(cx) : mesh_.cell_mid_y(cy)) - c;
    return sum * mesh_.h * mesh_.h;
  }

  SaddleSolution solve_with_context(const Vector& g,
                                    const std::string& field) const {
    try {
      return saddle_.solve(g);
    } catch (const Error& e) {
      throw Error("cell problem " + field + " on block " +
                  std::to_string(region_.p) + " (l=" +
                  std::to_string(region_.layers) + "): " + e.what());
    }
  }

  const PerforatedMesh& mesh_;
  OversampleRegion region_;
  ConstraintBlock cb_;
  SaddleSolver saddle_;
};

inline CellBasisSet solve_cell_basis(const PerforatedMesh& mesh,
                                     const ScalarField& kappa, int p, int l) {
  return CellProblemSolver(mesh, kappa, p, l).solve_all();
}

}  // namespace mch
