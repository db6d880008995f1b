#pragma once

#include <Eigen/SparseLU>
#include <array>
#include <vector>

#include "mch/common.hpp"
#include "mch/fem.hpp"
#include "mch/upscaling.hpp"

namespace mch {

/// Coarse two-continuum solution on the unperforated domain; nodal values
/// on the (n_coarse+1)^2 grid, zero on the domain boundary.
struct MacroSolution {
  int n_coarse = 0;
  std::array<Vector, 2> u;  // u[i], size (n_coarse+1)^2

  int node_index(int ix, int iy) const { return iy * (n_coarse + 1) + ix; }

  /// Block average of U_i over coarse block p, exact for Q1 on a square.
  double block_average(int p, int i) const {
    int bx = p % n_coarse, by = p / n_coarse;
    return 0.25 * (u[i][node_index(bx, by)] + u[i][node_index(bx + 1, by)] +
                   u[i][node_index(bx, by + 1)] +
                   u[i][node_index(bx + 1, by + 1)]);
  }
};

/// Coupled macroscopic system over interleaved (U_1, U_2) coarse unknowns.
struct MacroSystem {
  int n_coarse = 0;
  SparseMatrix a;
  Vector rhs;
  std::vector<int> node_free;  // coarse node -> free index or -1 (boundary)
  int n_free_nodes = 0;
};

/// Midpoint collocation of the upscaled weak form with Q1 trial/test
/// functions: per block, values and gradients of U_i, V_j are evaluated at
/// the block center from its four corner values and multiplied by the
/// block's extensive coefficient tensors. The gradient load pairing
/// (f, phi_j^n) d_n V_j is included when with_grad_load is set.
inline MacroSystem assemble_macro(
    const std::vector<EffectiveCoefficients>& coeffs, int n_coarse,
    double eps, bool with_grad_load = true) {
  require(static_cast<int>(coeffs.size()) == n_coarse * n_coarse,
          "assemble_macro: need coefficients for every coarse block");
  MacroSystem sys;
  sys.n_coarse = n_coarse;
  const int nn = n_coarse + 1;
  sys.node_free.assign(static_cast<size_t>(nn) * nn, -1);
  for (int iy = 1; iy < n_coarse; ++iy)
    for (int ix = 1; ix < n_coarse; ++ix)
      sys.node_free[iy * nn + ix] = sys.n_free_nodes++;
  require(sys.n_free_nodes > 0, "assemble_macro: no interior coarse nodes");

  const int n_dof = 2 * sys.n_free_nodes;
  std::vector<Eigen::Triplet<double>> triplets;
  sys.rhs = Vector::Zero(n_dof);

  // Corner weights at the block center, kCellCorners order.
  const std::array<double, 4> w{0.25, 0.25, 0.25, 0.25};
  const double inv2e = 1.0 / (2.0 * eps);
  const std::array<std::array<double, 4>, 2> grad{
      {{-inv2e, inv2e, -inv2e, inv2e}, {-inv2e, -inv2e, inv2e, inv2e}}};

  for (int by = 0; by < n_coarse; ++by) {
    for (int bx = 0; bx < n_coarse; ++bx) {
      const EffectiveCoefficients& ec = coeffs[by * n_coarse + bx];
      std::array<int, 4> node;
      for (int c = 0; c < 4; ++c)
        node[c] = sys.node_free[(by + kCellCorners[c].second) * nn +
                                (bx + kCellCorners[c].first)];
      for (int j = 0; j < 2; ++j) {
        for (int ct = 0; ct < 4; ++ct) {
          if (node[ct] < 0) continue;
          int row = 2 * node[ct] + j;
          double load = ec.b[j] * w[ct];
          if (with_grad_load)
            for (int n = 0; n < 2; ++n) load += ec.bgrad[j][n] * grad[n][ct];
          sys.rhs[row] += load;
          for (int i = 0; i < 2; ++i) {
            for (int cu = 0; cu < 4; ++cu) {
              if (node[cu] < 0) continue;
              int col = 2 * node[cu] + i;
              double v = ec.B[j][i] * w[cu] * w[ct];
              for (int m = 0; m < 2; ++m) {
                v += ec.Bm[j][i][m] * grad[m][cu] * w[ct];
                v += ec.Bbar[j][i][m] * w[cu] * grad[m][ct];
                for (int n = 0; n < 2; ++n)
                  v += ec.Bmn[j][i][m][n] * grad[m][cu] * grad[n][ct];
              }
              triplets.emplace_back(row, col, v);
            }
          }
        }
      }
    }
  }
  sys.a.resize(n_dof, n_dof);
  sys.a.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

inline MacroSolution solve_macro(const MacroSystem& sys) {
  Eigen::SparseLU<SparseMatrix> lu;
  SparseMatrix a = sys.a;
  a.makeCompressed();
  lu.compute(a);
  require(lu.info() == Eigen::Success,
          "solve_macro: macroscopic system is singular");
  Vector x = lu.solve(sys.rhs);
  double rhs_norm = sys.rhs.norm();
  if (rhs_norm > 0.0) {
    double rel = (sys.a * x - sys.rhs).norm() / rhs_norm;
    require(rel <= 1e-10, "solve_macro: residual " + std::to_string(rel) +
                              " exceeds 1e-10");
  }
  MacroSolution sol;
  sol.n_coarse = sys.n_coarse;
  const int nn = sys.n_coarse + 1;
  for (int i = 0; i < 2; ++i) sol.u[i] = Vector::Zero(nn * nn);
  for (int node = 0; node < nn * nn; ++node) {
    int k = sys.node_free[node];
    if (k < 0) continue;
    for (int i = 0; i < 2; ++i) sol.u[i][node] = x[2 * k + i];
  }
  return sol;
}

}  // namespace mch
