#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mch/upscaling.hpp"
#include "test_helpers.hpp"

using namespace mch;
using namespace mch_test;

namespace {

/// Central-block energy inner product by 2x2 Gauss quadrature of the
/// bilinear interpolants; independent of the element-matrix path used in
/// production.
double energy_oracle(const PerforatedMesh& mesh, const ScalarField& kappa,
                     const OversampleRegion& region, const Vector& u,
                     const Vector& v, int p) {
  const double h = mesh.h;
  const double gp = 0.5 / std::sqrt(3.0);
  const std::array<double, 2> pts{0.5 - gp, 0.5 + gp};
  int bx = p % mesh.n_coarse, by = p / mesh.n_coarse;
  double sum = 0.0;
  for (int cy = by * mesh.n_fine; cy < (by + 1) * mesh.n_fine; ++cy) {
    for (int cx = bx * mesh.n_fine; cx < (bx + 1) * mesh.n_fine; ++cx) {
      if (mesh.label(cx, cy) == kSolid) continue;
      double kc = kappa(mesh.cell_mid_x(cx), mesh.cell_mid_y(cy));
      int lx = cx - region.cx0, ly = cy - region.cy0;
      std::array<double, 4> uv, vv;
      for (int c = 0; c < 4; ++c) {
        uv[c] = field_value(region, u, lx + kCellCorners[c].first,
                            ly + kCellCorners[c].second);
        vv[c] = field_value(region, v, lx + kCellCorners[c].first,
                            ly + kCellCorners[c].second);
      }
      for (double xi : pts) {
        for (double eta : pts) {
          double ux = 0, uy = 0, vx = 0, vy = 0;
          for (int c = 0; c < 4; ++c) {
            double sx = kCellCorners[c].first ? 1.0 : -1.0;
            double sy = kCellCorners[c].second ? 1.0 : -1.0;
            double nx = kCellCorners[c].first ? xi : 1.0 - xi;
            double ny = kCellCorners[c].second ? eta : 1.0 - eta;
            ux += uv[c] * sx * ny / h;
            uy += uv[c] * sy * nx / h;
            vx += vv[c] * sx * ny / h;
            vy += vv[c] * sy * nx / h;
          }
          sum += 0.25 * h * h * kc * (ux * vx + uy * vy);
        }
      }
    }
  }
  return sum;
}

struct Setup {
  PerforatedMesh mesh;
  ScalarField kappa;
  ScalarField f;
  CellBasisSet basis;
  EffectiveCoefficients ec;
};

Setup make_setup(int p, const ScalarField& kappa) {
  Setup s;
  s.mesh = rasterize(cross_cell(8, 4, 2), 3);
  s.kappa = kappa;
  s.f = [](double x, double y) { return 1.0 + 2.0 * x - y; };
  s.basis = solve_cell_basis(s.mesh, s.kappa, p, 1);
  s.ec = compute_coefficients(s.mesh, s.kappa, s.f, s.basis);
  return s;
}

}  // namespace

TEST_CASE("coefficients match the Gauss-quadrature energy oracle") {
  ScalarField kappa = [](double x, double y) {
    return 2.0 + std::sin(2.0 * x) * std::cos(y);
  };
  Setup s = make_setup(4, kappa);
  const OversampleRegion& region = s.basis.region;
  std::array<const Vector*, 6> fields{
      &s.basis.phi[0], &s.basis.phi[1],
      &s.basis.phi_grad[0][0], &s.basis.phi_grad[0][1],
      &s.basis.phi_grad[1][0], &s.basis.phi_grad[1][1]};
  auto oracle = [&](int a, int b) {
    return energy_oracle(s.mesh, kappa, region, *fields[a], *fields[b], 4);
  };
  double scale = std::abs(oracle(1, 1)) + 1.0;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      CHECK_THAT(s.ec.B[j][i],
                 Catch::Matchers::WithinAbs(oracle(i, j), 1e-10 * scale));
      for (int m = 0; m < 2; ++m) {
        CHECK_THAT(s.ec.Bm[j][i][m],
                   Catch::Matchers::WithinAbs(oracle(2 + 2 * i + m, j),
                                              1e-10 * scale));
        CHECK_THAT(s.ec.Bbar[j][i][m],
                   Catch::Matchers::WithinAbs(oracle(i, 2 + 2 * j + m),
                                              1e-10 * scale));
        for (int n = 0; n < 2; ++n)
          CHECK_THAT(s.ec.Bmn[j][i][m][n],
                     Catch::Matchers::WithinAbs(
                         oracle(2 + 2 * i + m, 2 + 2 * j + n), 1e-10 * scale));
      }
    }
}

TEST_CASE("load pairings match a direct accumulation") {
  Setup s = make_setup(4, [](double, double) { return 1.0; });
  const OversampleRegion& region = s.basis.region;
  const double lw = s.mesh.h * s.mesh.h / 4.0;
  auto load_oracle = [&](const Vector& field) {
    double sum = 0.0;
    int bx = 1, by = 1;
    for (int cy = by * s.mesh.n_fine; cy < (by + 1) * s.mesh.n_fine; ++cy)
      for (int cx = bx * s.mesh.n_fine; cx < (bx + 1) * s.mesh.n_fine; ++cx) {
        if (s.mesh.label(cx, cy) == kSolid) continue;
        double fv = lw * s.f(s.mesh.cell_mid_x(cx), s.mesh.cell_mid_y(cy));
        for (const auto& [dx, dy] : kCellCorners)
          sum += fv * field_value(region, field, cx + dx - region.cx0,
                                  cy + dy - region.cy0);
      }
    return sum;
  };
  for (int j = 0; j < 2; ++j) {
    CHECK_THAT(s.ec.b[j], Catch::Matchers::WithinRel(
                              load_oracle(s.basis.phi[j]), 1e-12));
    for (int n = 0; n < 2; ++n)
      CHECK_THAT(s.ec.bgrad[j][n],
                 Catch::Matchers::WithinAbs(
                     load_oracle(s.basis.phi_grad[j][n]), 1e-14));
  }
}

TEST_CASE("stored tensors satisfy the exact symmetry identities") {
  Setup s = make_setup(4, [](double x, double y) {
    return 1.0 + 0.3 * x * y;
  });
  const EffectiveCoefficients& ec = s.ec;
  // These hold bitwise by construction of the Gram accumulation.
  CHECK(ec.B[0][1] == ec.B[1][0]);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i)
      for (int m = 0; m < 2; ++m) {
        CHECK(ec.Bbar[j][i][m] == ec.Bm[i][j][m]);
        for (int n = 0; n < 2; ++n)
          CHECK(ec.Bmn[j][i][m][n] == ec.Bmn[i][j][n][m]);
      }
}

TEST_CASE("diagonal entries are positive and Cauchy-Schwarz holds") {
  Setup s = make_setup(4, [](double, double) { return 1.0; });
  const EffectiveCoefficients& ec = s.ec;
  CHECK(ec.B[0][0] > 0.0);
  CHECK(ec.B[1][1] > 0.0);
  CHECK(ec.B[0][1] * ec.B[0][1] <= ec.B[0][0] * ec.B[1][1]);
  for (int i = 0; i < 2; ++i)
    for (int m = 0; m < 2; ++m)
      CHECK(ec.Bmn[i][i][m][m] >= 0.0);
  CHECK(ec.block_area == s.mesh.eps * s.mesh.eps);
  CHECK(ec.p == 4);
}

TEST_CASE("coefficients are translation invariant for uniform kappa") {
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 5);
  ScalarField kappa = [](double, double) { return 1.0; };
  ScalarField f = [](double, double) { return 1.0; };
  EffectiveCoefficients a = compute_coefficients(
      mesh, kappa, f, solve_cell_basis(mesh, kappa, mesh.block_index(1, 1), 1));
  EffectiveCoefficients b = compute_coefficients(
      mesh, kappa, f, solve_cell_basis(mesh, kappa, mesh.block_index(3, 3), 1));
  double scale = std::abs(a.B[1][1]);
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      CHECK(std::abs(a.B[j][i] - b.B[j][i]) <= 1e-9 * scale);
      for (int m = 0; m < 2; ++m)
        for (int n = 0; n < 2; ++n)
          CHECK(std::abs(a.Bmn[j][i][m][n] - b.Bmn[j][i][m][n]) <=
                1e-9 * scale);
    }
}

TEST_CASE("a mismatched basis region is rejected") {
  PerforatedMesh mesh = rasterize(cross_cell(8, 4, 2), 3);
  ScalarField kappa = [](double, double) { return 1.0; };
  CellBasisSet basis = solve_cell_basis(mesh, kappa, 0, 0);
  basis.region.p = 8;  // region no longer contains its claimed block
  CHECK_THROWS_AS(
      compute_coefficients(mesh, kappa, kappa, basis), Error);
}
