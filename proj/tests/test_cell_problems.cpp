#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mch/cell_problems.hpp"
#include "test_helpers.hpp"

using namespace mch;
using namespace mch_test;

namespace {

ScalarField unit_kappa() {
  return [](double, double) { return 1.0; };
}

/// Midpoint first moment of (x_m - c) over continuum j of block q,
/// recomputed independently of the production solver.
double moment_oracle(const PerforatedMesh& mesh, int q, int j, int m,
                     double c) {
  int bx = q % mesh.n_coarse, by = q / mesh.n_coarse;
  double sum = 0.0;
  for (int cy = by * mesh.n_fine; cy < (by + 1) * mesh.n_fine; ++cy)
    for (int cx = bx * mesh.n_fine; cx < (bx + 1) * mesh.n_fine; ++cx)
      if (mesh.label(cx, cy) == j)
        sum += ((m == 0) ? mesh.cell_mid_x(cx) : mesh.cell_mid_y(cy)) - c;
  return sum * mesh.h * mesh.h;
}

}  // namespace

TEST_CASE("average fields satisfy the Kronecker average constraints") {
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 3);
  int p = mesh.block_index(1, 1);
  CellBasisSet basis = solve_cell_basis(mesh, unit_kappa(), p, 1);
  const OversampleRegion& region = basis.region;
  for (int i = 0; i < 2; ++i) {
    for (int by = region.by0; by <= region.by1; ++by)
      for (int bx = region.bx0; bx <= region.bx1; ++bx) {
        int q = mesh.block_index(bx, by);
        for (int j = 1; j <= 2; ++j) {
          double measure = mesh.continuum_measure(q, j);
          double integral =
              continuum_field_integral(region, basis.phi[i], q, j);
          double target = (j == i + 1) ? measure : 0.0;
          CHECK_THAT(integral,
                     Catch::Matchers::WithinAbs(target, 1e-9 * measure));
        }
      }
  }
}

TEST_CASE("gradient fields satisfy the anchored moment constraints") {
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 3);
  int p = mesh.block_index(1, 1);
  CellBasisSet basis = solve_cell_basis(mesh, unit_kappa(), p, 1);
  const OversampleRegion& region = basis.region;
  for (int i = 0; i < 2; ++i) {
    for (int m = 0; m < 2; ++m) {
      double c = basis.c[m][i];
      // The anchor is the continuum centroid of the central block.
      CHECK_THAT(c, Catch::Matchers::WithinAbs(
                        mesh.centered_offset(p, i + 1, m), 1e-13));
      for (int by = region.by0; by <= region.by1; ++by)
        for (int bx = region.bx0; bx <= region.bx1; ++bx) {
          int q = mesh.block_index(bx, by);
          for (int j = 1; j <= 2; ++j) {
            double integral = continuum_field_integral(
                region, basis.phi_grad[i][m], q, j);
            double target =
                (j == i + 1) ? moment_oracle(mesh, q, i + 1, m, c) : 0.0;
            double scale =
                std::max(1e-6, mesh.eps * mesh.continuum_measure(q, j));
            CHECK_THAT(integral,
                       Catch::Matchers::WithinAbs(target, 1e-9 * scale));
          }
        }
    }
  }
}

TEST_CASE("moment of a neighbor block equals eps times its measure") {
  // Under periodic tiling the continuum centroid shifts by exactly eps from
  // block to block along direction m, so the anchored moment over the +m
  // neighbor is eps * measure.
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 3);
  int p = mesh.block_index(1, 1);
  for (int j = 1; j <= 2; ++j) {
    double cx = mesh.centered_offset(p, j, 0);
    int qx = mesh.block_index(2, 1);
    CHECK_THAT(moment_oracle(mesh, qx, j, 0, cx),
               Catch::Matchers::WithinRel(
                   mesh.eps * mesh.continuum_measure(qx, j), 1e-11));
    double cy = mesh.centered_offset(p, j, 1);
    int qy = mesh.block_index(1, 2);
    CHECK_THAT(moment_oracle(mesh, qy, j, 1, cy),
               Catch::Matchers::WithinRel(
                   mesh.eps * mesh.continuum_measure(qy, j), 1e-11));
  }
}

TEST_CASE("cell solves agree with the dense full-KKT oracle") {
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 3);
  ScalarField kappa = [](double x, double y) {
    return 1.5 + 0.5 * std::sin(2.0 * x + y);
  };
  int p = mesh.block_index(1, 1);
  CellProblemSolver solver(mesh, kappa, p, 1);
  CellBasisSet basis = solver.solve_all();
  const OversampleRegion& region = solver.region();
  const ConstraintBlock& cb = solver.constraints();
  Eigen::MatrixXd a = dense_stiffness_oracle(region, kappa);
  Eigen::MatrixXd c(cb.c);

  // phi_1: average constraint rhs.
  Vector g(cb.n_rows());
  for (int r = 0; r < cb.n_rows(); ++r)
    g[r] = (cb.row_key[r].first == 1) ? cb.row_measure[r] : 0.0;
  DenseSaddleResult oracle = dense_saddle_oracle(a, c, g);
  CHECK((basis.phi[0] - oracle.phi).norm() <=
        1e-8 * (1.0 + oracle.phi.norm()));

  // phi_2^1: gradient constraint rhs with the anchored centroid.
  double anchor = mesh.centered_offset(p, 2, 0);
  for (int r = 0; r < cb.n_rows(); ++r) {
    auto [j, q] = cb.row_key[r];
    g[r] = (j == 2) ? moment_oracle(mesh, q, 2, 0, anchor) : 0.0;
  }
  oracle = dense_saddle_oracle(a, c, g);
  CHECK((basis.phi_grad[1][0] - oracle.phi).norm() <=
        1e-8 * (1.0 + oracle.phi.norm()));
}

TEST_CASE("zero-layer gradient problems vanish identically") {
  // With l = 0 the only retained constraints are on the central block,
  // where the anchored first moment is zero by construction; the minimum-
  // energy field under homogeneous constraints is zero.
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 3);
  CellBasisSet basis = solve_cell_basis(mesh, unit_kappa(), 4, 0);
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < 2; ++m)
      CHECK(basis.phi_grad[i][m].norm() <= 1e-12);
  // Average problems stay nontrivial.
  CHECK(basis.phi[0].norm() > 0.0);
  CHECK(basis.phi[1].norm() > 0.0);
}

TEST_CASE("cell solutions translate with the block for uniform kappa") {
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 5);
  int pa = mesh.block_index(1, 1);
  int pb = mesh.block_index(3, 2);
  CellBasisSet a = solve_cell_basis(mesh, unit_kappa(), pa, 1);
  CellBasisSet b = solve_cell_basis(mesh, unit_kappa(), pb, 1);
  REQUIRE(a.region.ncx == b.region.ncx);
  REQUIRE(a.region.ncy == b.region.ncy);
  double worst = 0.0;
  for (int ly = 0; ly <= a.region.ncy; ++ly)
    for (int lx = 0; lx <= a.region.ncx; ++lx)
      for (int i = 0; i < 2; ++i) {
        worst = std::max(worst,
                         std::abs(field_value(a.region, a.phi[i], lx, ly) -
                                  field_value(b.region, b.phi[i], lx, ly)));
        for (int m = 0; m < 2; ++m)
          worst = std::max(
              worst,
              std::abs(field_value(a.region, a.phi_grad[i][m], lx, ly) -
                       field_value(b.region, b.phi_grad[i][m], lx, ly)));
      }
  CHECK(worst <= 1e-9);
}

TEST_CASE("cell solves are deterministic across repeat runs") {
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 3);
  CellBasisSet a = solve_cell_basis(mesh, unit_kappa(), 4, 1);
  CellBasisSet b = solve_cell_basis(mesh, unit_kappa(), 4, 1);
  for (int i = 0; i < 2; ++i) {
    REQUIRE((a.phi[i] - b.phi[i]).norm() == 0.0);
    for (int m = 0; m < 2; ++m)
      REQUIRE((a.phi_grad[i][m] - b.phi_grad[i][m]).norm() == 0.0);
  }
}

TEST_CASE("failures carry block and field context") {
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 2);
  // A vanishing conductivity zeroes the stiffness matrix; the solver must
  // refuse it instead of returning garbage.
  ScalarField bad = [](double, double) { return 0.0; };
  CHECK_THROWS_AS(solve_cell_basis(mesh, bad, 0, 1), Error);
}
