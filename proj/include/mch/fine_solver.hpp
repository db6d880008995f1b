#pragma once

#include <string>

#include "mch/common.hpp"
#include "mch/fem.hpp"
#include "mch/geometry.hpp"

namespace mch {

/// Fine-grid solution of -div(kappa grad u) = f on the perforated domain
/// with u = 0 on the whole active boundary (domain rim and channel walls).
struct ReferenceSolution {
  OversampleRegion region;  // whole-domain region carrying dof numbering
  Vector u;                 // free-dof values; Dirichlet nodes are zero

  double value_at(int gx, int gy) const {
    return field_value(region, u, gx - region.cx0, gy - region.cy0);
  }
};

inline ReferenceSolution solve_reference(const PerforatedMesh& mesh,
                                         const ScalarField& kappa,
                                         const ScalarField& f) {
  ReferenceSolution sol;
  sol.region = OversampleRegion::whole_domain(mesh);
  SparseMatrix a = assemble_stiffness(sol.region, kappa);
  Vector rhs = assemble_load(sol.region, f);
  sol.u = solve_spd(a, rhs);
  return sol;
}

/// Average of u over continuum i inside coarse block p: per-cell mean of the
/// four corner values times h^2, summed, divided by the continuum measure.
inline double cell_continuum_average(const ReferenceSolution& sol, int p,
                                     int i) {
  const PerforatedMesh& mesh = *sol.region.mesh;
  int bx = p % mesh.n_coarse, by = p / mesh.n_coarse;
  double integral = 0.0;
  long count = 0;
  for (int cy = by * mesh.n_fine; cy < (by + 1) * mesh.n_fine; ++cy) {
    for (int cx = bx * mesh.n_fine; cx < (bx + 1) * mesh.n_fine; ++cx) {
      if (mesh.label(cx, cy) != i) continue;
      double cell_sum = 0.0;
      for (const auto& [dx, dy] : kCellCorners)
        cell_sum += sol.value_at(cx + dx, cy + dy);
      integral += cell_sum / 4.0;
      ++count;
    }
  }
  require(count > 0, "cell_continuum_average: continuum " +
                         std::to_string(i) + " has zero measure in block " +
                         std::to_string(p));
  return integral / static_cast<double>(count);
}

}  // namespace mch
