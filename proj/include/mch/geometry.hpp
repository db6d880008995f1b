#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mch/common.hpp"

namespace mch {

// Cell labels: 0 = solid, 1 = thick continuum, 2 = thin continuum.
enum CellLabel : int8_t { kSolid = 0, kContinuum1 = 1, kContinuum2 = 2 };

enum class Axis { kHorizontal, kVertical };

/// One straight channel spanning the full unit cell along its axis.
struct ChannelSpec {
  Axis axis;
  int offset;     // fine-cell index of the channel start across the axis
  int width;      // fine-cell count
  int continuum;  // 1 (thick) or 2 (thin)
};

/// Periodic unit-cell geometry: a union of channels on an n_fine x n_fine
/// fine-cell raster.
struct UnitCellSpec {
  int n_fine = 0;
  std::vector<ChannelSpec> channels;

  /// Rasterizes the channel union. Overlapping claims resolve to continuum 1
  /// (thick wins). Row-major, index = iy * n_fine + ix.
  std::vector<int8_t> rasterize_cell() const {
    std::vector<int8_t> labels(static_cast<size_t>(n_fine) * n_fine, kSolid);
    auto paint = [&](const ChannelSpec& ch) {
      for (int t = ch.offset; t < ch.offset + ch.width; ++t) {
        for (int s = 0; s < n_fine; ++s) {
          int ix = (ch.axis == Axis::kVertical) ? t : s;
          int iy = (ch.axis == Axis::kVertical) ? s : t;
          int8_t& cell = labels[static_cast<size_t>(iy) * n_fine + ix];
          if (cell != kContinuum1) cell = static_cast<int8_t>(ch.continuum);
        }
      }
    };
    for (const auto& ch : channels)
      if (ch.continuum == 2) paint(ch);
    for (const auto& ch : channels)
      if (ch.continuum == 1) paint(ch);
    return labels;
  }

  void validate() const {
    require(n_fine >= 1, "UnitCellSpec: n_fine must be positive");
    bool has1 = false, has2 = false;
    for (const auto& ch : channels) {
      require(ch.width >= 1 && ch.width <= n_fine,
              "ChannelSpec: width out of range");
      require(ch.offset >= 0 && ch.offset + ch.width <= n_fine,
              "ChannelSpec: offset+width exceeds unit cell");
      require(ch.continuum == 1 || ch.continuum == 2,
              "ChannelSpec: continuum must be 1 or 2");
      if (ch.continuum == 1) has1 = true;
      if (ch.continuum == 2) has2 = true;
    }
    require(has1 && has2, "UnitCellSpec: both continua must be present");
  }
};

/// Builds one of the two reference channel structures.
/// Structure 1: one thick vertical channel (width 10 at n_fine = 80) crossed
/// by one thin horizontal channel (width 2). Structure 2 adds a thin channel
/// network at the quarter lines in both directions.
inline UnitCellSpec build_structure(int structure_id, int n_fine) {
  require(structure_id == 1 || structure_id == 2,
          "build_structure: unknown structure_id " +
              std::to_string(structure_id));
  require(n_fine >= 20 && n_fine % 4 == 0,
          "build_structure: n_fine must be >= 20 and divisible by 4");
  const int thick_w = 10;
  const int thin_w = 2;
  UnitCellSpec spec;
  spec.n_fine = n_fine;
  spec.channels.push_back(
      {Axis::kVertical, (n_fine - thick_w) / 2, thick_w, 1});
  spec.channels.push_back(
      {Axis::kHorizontal, (n_fine - thin_w) / 2, thin_w, 2});
  if (structure_id == 2) {
    for (int k : {n_fine / 4 - 1, 3 * n_fine / 4 - 1}) {
      spec.channels.push_back({Axis::kVertical, k, thin_w, 2});
      spec.channels.push_back({Axis::kHorizontal, k, thin_w, 2});
    }
  }
  spec.validate();
  return spec;
}

/// Fine raster of the perforated domain [0,1]^2 with coarse-block indexing.
/// Coarse blocks are eps x eps squares, n_coarse per dimension; each holds
/// n_fine x n_fine fine cells of size h = eps / n_fine.
struct PerforatedMesh {
  int n_coarse = 0;  // coarse blocks per dimension, eps = 1 / n_coarse
  int n_fine = 0;    // fine cells per coarse block per dimension
  int n = 0;         // fine cells per dimension = n_coarse * n_fine
  double eps = 0.0;
  double h = 0.0;
  std::vector<int8_t> cell_labels;      // n*n, row-major iy*n+ix
  std::vector<uint8_t> node_active;     // (n+1)^2
  std::vector<uint8_t> node_dirichlet;  // (n+1)^2

  int cell_index(int ix, int iy) const { return iy * n + ix; }
  int node_index(int ix, int iy) const { return iy * (n + 1) + ix; }
  int8_t label(int ix, int iy) const { return cell_labels[cell_index(ix, iy)]; }

  /// Coarse block index p = by * n_coarse + bx of a fine cell.
  int coarse_of(int ix, int iy) const {
    return (iy / n_fine) * n_coarse + (ix / n_fine);
  }
  int block_index(int bx, int by) const { return by * n_coarse + bx; }

  double node_x(int ix) const { return h * ix; }
  double node_y(int iy) const { return h * iy; }
  double cell_mid_x(int ix) const { return h * (ix + 0.5); }
  double cell_mid_y(int iy) const { return h * (iy + 0.5); }

  /// Area of continuum j inside coarse block q. Zero is a legal return.
  double continuum_measure(int q, int j) const {
    int bx = q % n_coarse, by = q / n_coarse;
    long count = 0;
    for (int iy = by * n_fine; iy < (by + 1) * n_fine; ++iy)
      for (int ix = bx * n_fine; ix < (bx + 1) * n_fine; ++ix)
        if (label(ix, iy) == j) ++count;
    return static_cast<double>(count) * h * h;
  }

  /// Continuum-j centroid coordinate in direction m (0 = x1, 1 = x2) over
  /// block p, via midpoint quadrature. The first moment of (x_m - c) over
  /// the continuum then vanishes to round-off.
  double centered_offset(int p, int j, int m) const {
    int bx = p % n_coarse, by = p / n_coarse;
    double moment = 0.0;
    long count = 0;
    for (int iy = by * n_fine; iy < (by + 1) * n_fine; ++iy)
      for (int ix = bx * n_fine; ix < (bx + 1) * n_fine; ++ix)
        if (label(ix, iy) == j) {
          moment += (m == 0) ? cell_mid_x(ix) : cell_mid_y(iy);
          ++count;
        }
    require(count > 0, "centered_offset: continuum " + std::to_string(j) +
                           " has zero measure in block " + std::to_string(p));
    return moment / static_cast<double>(count);
  }
};

namespace detail {

/// Flood fill over non-solid cells with edge adjacency; true if connected.
inline bool active_region_connected(const std::vector<int8_t>& labels, int n) {
  std::vector<uint8_t> seen(labels.size(), 0);
  int start = -1;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != kSolid) { start = static_cast<int>(i); break; }
  if (start < 0) return false;
  std::vector<int> stack{start};
  seen[start] = 1;
  size_t reached = 0;
  while (!stack.empty()) {
    int c = stack.back();
    stack.pop_back();
    ++reached;
    int ix = c % n, iy = c / n;
    const std::array<std::pair<int, int>, 4> nbrs{
        {{ix - 1, iy}, {ix + 1, iy}, {ix, iy - 1}, {ix, iy + 1}}};
    for (auto [jx, jy] : nbrs) {
      if (jx < 0 || jx >= n || jy < 0 || jy >= n) continue;
      int d = jy * n + jx;
      if (!seen[d] && labels[d] != kSolid) {
        seen[d] = 1;
        stack.push_back(d);
      }
    }
  }
  size_t total = 0;
  for (int8_t l : labels)
    if (l != kSolid) ++total;
  return reached == total;
}

}  // namespace detail

/// Tiles the unit cell n_coarse x n_coarse times over [0,1]^2 and derives
/// node activity and Dirichlet flags. Throws if the active region is
/// disconnected (such a geometry cannot carry a well-posed problem).
inline PerforatedMesh rasterize(const UnitCellSpec& spec, int n_coarse) {
  spec.validate();
  require(n_coarse >= 1, "rasterize: n_coarse must be positive");
  PerforatedMesh mesh;
  mesh.n_coarse = n_coarse;
  mesh.n_fine = spec.n_fine;
  mesh.n = n_coarse * spec.n_fine;
  mesh.eps = 1.0 / n_coarse;
  mesh.h = mesh.eps / spec.n_fine;

  const std::vector<int8_t> unit = spec.rasterize_cell();
  const int n = mesh.n, nf = spec.n_fine;
  mesh.cell_labels.resize(static_cast<size_t>(n) * n);
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      mesh.cell_labels[mesh.cell_index(ix, iy)] =
          unit[static_cast<size_t>(iy % nf) * nf + (ix % nf)];

  require(detail::active_region_connected(mesh.cell_labels, n),
          "rasterize: active region is disconnected");

  const int nn = n + 1;
  mesh.node_active.assign(static_cast<size_t>(nn) * nn, 0);
  mesh.node_dirichlet.assign(static_cast<size_t>(nn) * nn, 0);
  for (int iy = 0; iy < nn; ++iy) {
    for (int ix = 0; ix < nn; ++ix) {
      bool active = false, touches_solid = false;
      for (int dy = -1; dy <= 0; ++dy) {
        for (int dx = -1; dx <= 0; ++dx) {
          int cx = ix + dx, cy = iy + dy;
          if (cx < 0 || cx >= n || cy < 0 || cy >= n) continue;
          if (mesh.label(cx, cy) != kSolid) active = true;
          else touches_solid = true;
        }
      }
      if (!active) continue;
      mesh.node_active[mesh.node_index(ix, iy)] = 1;
      bool on_domain_boundary = (ix == 0 || ix == n || iy == 0 || iy == n);
      if (on_domain_boundary || touches_solid)
        mesh.node_dirichlet[mesh.node_index(ix, iy)] = 1;
    }
  }
  return mesh;
}

/// Convenience overload taking the period directly; 1/eps must be integral.
inline PerforatedMesh rasterize(const UnitCellSpec& spec, double eps) {
  double inv = 1.0 / eps;
  int n_coarse = static_cast<int>(std::lround(inv));
  require(n_coarse >= 1 && std::abs(inv - n_coarse) < 1e-9,
          "rasterize: 1/eps must be a positive integer");
  return rasterize(spec, n_coarse);
}

/// Oversampled region around coarse block p: the Chebyshev-l neighborhood of
/// blocks, clipped to the domain. Carries the local node numbering used by
/// all assembly and solves. Nodes on the region's outer rectangle are
/// Dirichlet in addition to globally Dirichlet nodes.
struct OversampleRegion {
  const PerforatedMesh* mesh = nullptr;
  int p = 0;
  int layers = 0;
  int bx0 = 0, by0 = 0, bx1 = 0, by1 = 0;  // inclusive coarse-block range
  int cx0 = 0, cy0 = 0;                    // fine-cell origin
  int ncx = 0, ncy = 0;                    // fine-cell extent
  // Local node grid (ncx+1) x (ncy+1): -2 absent, -1 Dirichlet, else free dof.
  std::vector<int> node_dof;
  int n_free = 0;

  OversampleRegion() = default;

  OversampleRegion(const PerforatedMesh& m, int block, int l)
      : mesh(&m), p(block), layers(l) {
    require(block >= 0 && block < m.n_coarse * m.n_coarse,
            "OversampleRegion: block index out of range");
    require(l >= 0, "OversampleRegion: negative layer count");
    int bx = block % m.n_coarse, by = block / m.n_coarse;
    bx0 = std::max(0, bx - l);
    by0 = std::max(0, by - l);
    bx1 = std::min(m.n_coarse - 1, bx + l);
    by1 = std::min(m.n_coarse - 1, by + l);
    cx0 = bx0 * m.n_fine;
    cy0 = by0 * m.n_fine;
    ncx = (bx1 - bx0 + 1) * m.n_fine;
    ncy = (by1 - by0 + 1) * m.n_fine;

    node_dof.assign(static_cast<size_t>(ncx + 1) * (ncy + 1), -2);
    for (int ly = 0; ly <= ncy; ++ly) {
      for (int lx = 0; lx <= ncx; ++lx) {
        bool active = false;
        for (int dy = -1; dy <= 0; ++dy)
          for (int dx = -1; dx <= 0; ++dx) {
            int cx = lx + dx, cy = ly + dy;
            if (cx < 0 || cx >= ncx || cy < 0 || cy >= ncy) continue;
            if (m.label(cx0 + cx, cy0 + cy) != kSolid) active = true;
          }
        if (!active) continue;
        bool on_rim = (lx == 0 || lx == ncx || ly == 0 || ly == ncy);
        bool dirichlet =
            on_rim || m.node_dirichlet[m.node_index(cx0 + lx, cy0 + ly)];
        node_dof[local_node(lx, ly)] = dirichlet ? -1 : -3;
      }
    }
    // Number free dofs in raster order for determinism.
    n_free = 0;
    for (int& d : node_dof)
      if (d == -3) d = n_free++;
  }

  /// Region covering the whole domain; its rim coincides with the domain
  /// boundary, so no extra Dirichlet nodes are introduced.
  static OversampleRegion whole_domain(const PerforatedMesh& m) {
    return OversampleRegion(m, 0, m.n_coarse);
  }

  int local_node(int lx, int ly) const { return ly * (ncx + 1) + lx; }
  int dof_at(int lx, int ly) const { return node_dof[local_node(lx, ly)]; }
  bool contains_block(int bx, int by) const {
    return bx >= bx0 && bx <= bx1 && by >= by0 && by <= by1;
  }
  int num_blocks() const { return (bx1 - bx0 + 1) * (by1 - by0 + 1); }
};

}  // namespace mch
