#pragma once

#include <array>

#include "mch/cell_problems.hpp"
#include "mch/fem.hpp"
#include "mch/geometry.hpp"

namespace mch {

/// Piecewise-constant macroscopic coefficients of one coarse block, stored
/// extensively (integrals over the block, not densities). All indices are
/// 0-based continuum/direction indices.
struct EffectiveCoefficients {
  int p = 0;
  double block_area = 0.0;  // eps^2
  // B[j][i]     = a_p(phi_i, phi_j)
  // Bm[j][i][m] = a_p(phi_i^m, phi_j)
  // Bbar[j][i][n] = a_p(phi_i, phi_j^n)
  // Bmn[j][i][m][n] = a_p(phi_i^m, phi_j^n)
  std::array<std::array<double, 2>, 2> B{};
  std::array<std::array<std::array<double, 2>, 2>, 2> Bm{};
  std::array<std::array<std::array<double, 2>, 2>, 2> Bbar{};
  std::array<std::array<std::array<std::array<double, 2>, 2>, 2>, 2> Bmn{};
  std::array<double, 2> b{};                  // (f, phi_j) over the block
  std::array<std::array<double, 2>, 2> bgrad{};  // (f, phi_j^n)
};

/// Energy inner products of the six basis fields restricted to the central
/// block K_p, with the same element quadrature as stiffness assembly; load
/// pairings use the same quadrature as assemble_load.
inline EffectiveCoefficients compute_coefficients(const PerforatedMesh& mesh,
                                                  const ScalarField& kappa,
                                                  const ScalarField& f,
                                                  const CellBasisSet& basis) {
  const OversampleRegion& region = basis.region;
  const int p = region.p;
  const int bx = p % mesh.n_coarse, by = p / mesh.n_coarse;
  require(region.contains_block(bx, by),
          "compute_coefficients: basis region does not contain its block");

  // Field order: 0..1 = phi_1, phi_2; 2..5 = phi_i^m with idx 2+2(i-1)+(m-1).
  std::array<const Vector*, 6> fields{};
  fields[0] = &basis.phi[0];
  fields[1] = &basis.phi[1];
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < 2; ++m)
      fields[2 + 2 * i + m] = &basis.phi_grad[i][m];

  const Eigen::Matrix4d& ke = q1_element_stiffness();
  std::array<std::array<double, 6>, 6> gram{};
  std::array<double, 6> load{};
  const double lw = mesh.h * mesh.h / 4.0;

  for (int cy = by * mesh.n_fine; cy < (by + 1) * mesh.n_fine; ++cy) {
    for (int cx = bx * mesh.n_fine; cx < (bx + 1) * mesh.n_fine; ++cx) {
      if (mesh.label(cx, cy) == kSolid) continue;
      double kc = kappa(mesh.cell_mid_x(cx), mesh.cell_mid_y(cy));
      double fv = lw * f(mesh.cell_mid_x(cx), mesh.cell_mid_y(cy));
      int lx = cx - region.cx0, ly = cy - region.cy0;
      std::array<Eigen::Vector4d, 6> vals;
      for (int fidx = 0; fidx < 6; ++fidx)
        for (int c = 0; c < 4; ++c)
          vals[fidx][c] =
              field_value(region, *fields[fidx], lx + kCellCorners[c].first,
                          ly + kCellCorners[c].second);
      std::array<Eigen::Vector4d, 6> kv;
      for (int fidx = 0; fidx < 6; ++fidx) kv[fidx] = ke * vals[fidx];
      for (int fa = 0; fa < 6; ++fa) {
        for (int fb = fa; fb < 6; ++fb)
          gram[fa][fb] += kc * vals[fa].dot(kv[fb]);
        load[fa] += fv * vals[fa].sum();
      }
    }
  }
  for (int fa = 0; fa < 6; ++fa)
    for (int fb = 0; fb < fa; ++fb) gram[fa][fb] = gram[fb][fa];

  EffectiveCoefficients out;
  out.p = p;
  out.block_area = mesh.eps * mesh.eps;
  auto gidx = [](int i, int m) { return 2 + 2 * i + m; };
  for (int j = 0; j < 2; ++j) {
    out.b[j] = load[j];
    for (int i = 0; i < 2; ++i) {
      out.B[j][i] = gram[i][j];
      for (int m = 0; m < 2; ++m) {
        out.Bm[j][i][m] = gram[gidx(i, m)][j];
        out.Bbar[j][i][m] = gram[i][gidx(j, m)];
        for (int n = 0; n < 2; ++n)
          out.Bmn[j][i][m][n] = gram[gidx(i, m)][gidx(j, n)];
      }
    }
    for (int n = 0; n < 2; ++n) out.bgrad[j][n] = load[gidx(j, n)];
  }
  return out;
}

}  // namespace mch
