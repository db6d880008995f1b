#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <type_traits>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mch/cell_problems.hpp"
#include "mch/common.hpp"
#include "mch/fem.hpp"
#include "mch/fine_solver.hpp"
#include "mch/geometry.hpp"
#include "mch/io.hpp"
#include "mch/macro_solver.hpp"
#include "mch/upscaling.hpp"

namespace mch {

inline constexpr double kPi = 3.14159265358979323846;

enum class KappaKind { kOne, kSine, kSineHalf };

inline std::string kappa_name(KappaKind k) {
  switch (k) {
    case KappaKind::kOne: return "one";
    case KappaKind::kSine: return "sine";
    case KappaKind::kSineHalf: return "sine_half";
  }
  return "?";
}

inline KappaKind parse_kappa(const std::string& name) {
  if (name == "one") return KappaKind::kOne;
  if (name == "sine") return KappaKind::kSine;
  if (name == "sine_half") return KappaKind::kSineHalf;
  throw Error("unknown kappa '" + name + "' (expected one|sine|sine_half)");
}

inline ScalarField make_kappa(KappaKind k) {
  switch (k) {
    case KappaKind::kOne:
      return [](double, double) { return 1.0; };
    case KappaKind::kSine:
      return [](double x, double y) {
        return 2.0 + std::sin(kPi * x) * std::sin(kPi * y);
      };
    case KappaKind::kSineHalf:
      return [](double x, double y) {
        return 2.0 + std::sin(kPi * x / 2.0) * std::sin(kPi * y / 2.0);
      };
  }
  throw Error("make_kappa: bad kind");
}

/// Fixed source term of all experiments.
inline ScalarField source_field(double scale = 1.0) {
  return [scale](double x, double y) {
    return scale * 5.0 * kPi * kPi * std::sin(2.0 * kPi * x) *
           std::sin(kPi * y);
  };
}

struct ExperimentConfig {
  int structure_id = 1;
  KappaKind kappa = KappaKind::kOne;
  int n_coarse = 10;  // eps = 1 / n_coarse
  int layers = 1;
  int n_fine = 80;
  bool grad_load = true;    // include the (f, phi_j^n) d_n V_j load pairing
  bool sqrt_error = true;   // report sqrt of the squared-sum ratio
  bool dump_basis = false;
  bool dump_geometry = false;
  double source_scale = 1.0;
  std::string out_dir;  // empty: no files written

  void validate() const {
    require(structure_id == 1 || structure_id == 2,
            "config: structure must be 1 or 2");
    require(n_coarse >= 2, "config: eps must be at most 1/2");
    require(layers >= 0 && layers <= 2, "config: layers must be 0, 1 or 2");
    require(n_fine >= 20 && n_fine % 4 == 0,
            "config: n_fine must be >= 20 and divisible by 4");
  }
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ErrorReport {
  ExperimentConfig config;
  double e[2] = {0.0, 0.0};
  // Per coarse block: continuum averages of the reference solution (NaN
  // where the continuum is absent) and block averages of U_i.
  std::vector<double> ref_avg[2];
  std::vector<double> macro_avg[2];
  std::vector<EffectiveCoefficients> coefficients;
  double e_alt_grad_load[2] = {0.0, 0.0};  // errors with the flag toggled
  std::vector<StageTiming> timings;
};

/// Relative L2-style error between coarse-block averages of U_i and
/// continuum-i averages of the reference solution, over blocks where the
/// continuum is present. With take_sqrt the genuine relative norm is
/// returned, otherwise the paper-style ratio of squared sums.
inline double relative_error(const std::vector<double>& macro_avg,
                             const std::vector<double>& ref_avg,
                             bool take_sqrt = true) {
  require(macro_avg.size() == ref_avg.size(),
          "relative_error: incompatible block tables");
  double num = 0.0, den = 0.0;
  for (size_t p = 0; p < ref_avg.size(); ++p) {
    if (std::isnan(ref_avg[p])) continue;
    double d = macro_avg[p] - ref_avg[p];
    num += d * d;
    den += ref_avg[p] * ref_avg[p];
  }
  require(den > 0.0,
          "relative_error: reference is identically zero on the continuum");
  double ratio = num / den;
  return take_sqrt ? std::sqrt(ratio) : ratio;
}

inline double relative_error(const MacroSolution& macro,
                             const ReferenceSolution& ref, int i,
                             bool take_sqrt = true) {
  const PerforatedMesh& mesh = *ref.region.mesh;
  int nb = mesh.n_coarse * mesh.n_coarse;
  std::vector<double> ra(nb), ma(nb);
  for (int p = 0; p < nb; ++p) {
    ma[p] = macro.block_average(p, i - 1);
    ra[p] = (mesh.continuum_measure(p, i) > 0.0)
                ? cell_continuum_average(ref, p, i)
                : std::nan("");
  }
  return relative_error(ma, ra, take_sqrt);
}

namespace detail {

class StageClock {
public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}
  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record(stage, t0);
      } else {
        auto out = fn();
        record(stage, t0);
        return out;
      }
    } catch (const Error& e) {
      throw Error("stage '" + stage + "' failed: " + e.what());
    }
  }

private:
  void record(const std::string& stage,
              std::chrono::steady_clock::time_point t0) {
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t0)
                   .count();
    sink_.push_back({stage, s});
  }
  std::vector<StageTiming>& sink_;
};

inline void write_manifest(const std::filesystem::path& dir,
                           const ErrorReport& rep) {
  const ExperimentConfig& c = rep.config;
  nlohmann::json j;
  j["structure_id"] = c.structure_id;
  j["kappa"] = kappa_name(c.kappa);
  j["eps"] = "1/" + std::to_string(c.n_coarse);
  j["n_coarse"] = c.n_coarse;
  j["n_fine"] = c.n_fine;
  if (c.n_fine != 80)
    j["note"] = "n_fine deviates from the default 80";
  j["layers"] = c.layers;
  j["grad_load"] = c.grad_load;
  j["error_convention"] = c.sqrt_error ? "sqrt" : "ratio";
  j["source_scale"] = c.source_scale;
  j["e1"] = rep.e[0];
  j["e2"] = rep.e[1];
  j["e1_grad_load_toggled"] = rep.e_alt_grad_load[0];
  j["e2_grad_load_toggled"] = rep.e_alt_grad_load[1];
  nlohmann::json jt;
  for (const auto& t : rep.timings) jt[t.stage] = t.seconds;
  j["timings_seconds"] = jt;
  std::ofstream out(dir / "manifest.json");
  require(out.good(), "cannot open manifest.json");
  out << j.dump(2) << "\n";
}

inline void write_outputs(const std::filesystem::path& dir,
                          const ErrorReport& rep, const PerforatedMesh& mesh,
                          const ReferenceSolution& ref,
                          const MacroSolution& macro) {
  const ExperimentConfig& c = rep.config;
  std::filesystem::create_directories(dir);

  write_manifest(dir, rep);

  {
    CsvWriter w(dir / "errors.csv",
                {"structure", "kappa", "eps", "l", "e1", "e2"});
    w.row({std::to_string(c.structure_id), kappa_name(c.kappa),
           "1/" + std::to_string(c.n_coarse), std::to_string(c.layers),
           format_double(rep.e[0]), format_double(rep.e[1])});
  }
  {
    std::vector<std::string> header{"p"};
    for (int j = 1; j <= 2; ++j)
      for (int i = 1; i <= 2; ++i)
        header.push_back("B_" + std::to_string(j) + std::to_string(i));
    for (int j = 1; j <= 2; ++j)
      for (int i = 1; i <= 2; ++i)
        for (int m = 1; m <= 2; ++m)
          header.push_back("Bm_" + std::to_string(j) + std::to_string(i) +
                           "_" + std::to_string(m));
    for (int j = 1; j <= 2; ++j)
      for (int i = 1; i <= 2; ++i)
        for (int n = 1; n <= 2; ++n)
          header.push_back("Bbar_" + std::to_string(j) + std::to_string(i) +
                           "_" + std::to_string(n));
    for (int j = 1; j <= 2; ++j)
      for (int i = 1; i <= 2; ++i)
        for (int m = 1; m <= 2; ++m)
          for (int n = 1; n <= 2; ++n)
            header.push_back("Bmn_" + std::to_string(j) + std::to_string(i) +
                             "_" + std::to_string(m) + std::to_string(n));
    header.push_back("b_1");
    header.push_back("b_2");
    CsvWriter w(dir / "coefficients.csv", header);
    for (const auto& ec : rep.coefficients) {
      std::vector<std::string> cells{std::to_string(ec.p)};
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
          cells.push_back(format_double(ec.B[j][i]));
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
          for (int m = 0; m < 2; ++m)
            cells.push_back(format_double(ec.Bm[j][i][m]));
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
          for (int n = 0; n < 2; ++n)
            cells.push_back(format_double(ec.Bbar[j][i][n]));
      for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
          for (int m = 0; m < 2; ++m)
            for (int n = 0; n < 2; ++n)
              cells.push_back(format_double(ec.Bmn[j][i][m][n]));
      cells.push_back(format_double(ec.b[0]));
      cells.push_back(format_double(ec.b[1]));
      w.row(cells);
    }
  }
  {
    // Per fine cell: midpoint, cell-mean reference value, label.
    CsvWriter w(dir / "fields_ref.csv", {"x1", "x2", "u", "label"});
    for (int cy = 0; cy < mesh.n; ++cy) {
      for (int cx = 0; cx < mesh.n; ++cx) {
        int8_t label = mesh.label(cx, cy);
        double u = 0.0;
        if (label != kSolid) {
          for (const auto& [dx, dy] : kCellCorners)
            u += ref.value_at(cx + dx, cy + dy);
          u /= 4.0;
        }
        w.row({format_double(mesh.cell_mid_x(cx)),
               format_double(mesh.cell_mid_y(cy)), format_double(u),
               std::to_string(static_cast<int>(label))});
      }
    }
  }
  {
    CsvWriter w(dir / "fields_macro.csv", {"x1", "x2", "U1", "U2"});
    for (int iy = 0; iy <= mesh.n_coarse; ++iy)
      for (int ix = 0; ix <= mesh.n_coarse; ++ix) {
        int node = macro.node_index(ix, iy);
        w.row({format_double(mesh.eps * ix), format_double(mesh.eps * iy),
               format_double(macro.u[0][node]),
               format_double(macro.u[1][node])});
      }
  }
  {
    CsvWriter w(dir / "averages.csv",
                {"p", "ref_avg1", "ref_avg2", "macro_avg1", "macro_avg2"});
    int nb = mesh.n_coarse * mesh.n_coarse;
    for (int p = 0; p < nb; ++p) {
      auto opt = [&](double v) {
        return std::isnan(v) ? std::string() : format_double(v);
      };
      w.row({std::to_string(p), opt(rep.ref_avg[0][p]), opt(rep.ref_avg[1][p]),
             format_double(rep.macro_avg[0][p]),
             format_double(rep.macro_avg[1][p])});
    }
  }
  if (c.dump_geometry) {
    CsvWriter w(dir / "labels.csv", {"row", "col", "label"});
    for (int cy = 0; cy < mesh.n; ++cy)
      for (int cx = 0; cx < mesh.n; ++cx)
        w.row({std::to_string(cy), std::to_string(cx),
               std::to_string(static_cast<int>(mesh.label(cx, cy)))});
  }
}

inline void dump_basis_csv(const std::filesystem::path& dir,
                           const CellBasisSet& basis) {
  const OversampleRegion& r = basis.region;
  const PerforatedMesh& mesh = *r.mesh;
  CsvWriter w(dir / ("basis_p" + std::to_string(r.p) + ".csv"),
              {"x1", "x2", "phi1", "phi2", "phi1_1", "phi1_2", "phi2_1",
               "phi2_2"});
  for (int ly = 0; ly <= r.ncy; ++ly) {
    for (int lx = 0; lx <= r.ncx; ++lx) {
      if (r.dof_at(lx, ly) == -2) continue;
      std::vector<std::string> cells{
          format_double(mesh.node_x(r.cx0 + lx)),
          format_double(mesh.node_y(r.cy0 + ly)),
          format_double(field_value(r, basis.phi[0], lx, ly)),
          format_double(field_value(r, basis.phi[1], lx, ly))};
      for (int i = 0; i < 2; ++i)
        for (int m = 0; m < 2; ++m)
          cells.push_back(
              format_double(field_value(r, basis.phi_grad[i][m], lx, ly)));
      w.row(cells);
    }
  }
}

}  // namespace detail

/// Runs one full case: rasterize, reference solve, per-block cell problems
/// and coefficients, macroscopic solve, error metrics; then writes all
/// output files if an output directory is configured. Outputs appear only
/// after every stage has succeeded.
inline ErrorReport run_case(const ExperimentConfig& config) {
  config.validate();
  ErrorReport rep;
  rep.config = config;
  detail::StageClock clock(rep.timings);

  PerforatedMesh mesh = clock.run("rasterize", [&] {
    return rasterize(build_structure(config.structure_id, config.n_fine),
                     config.n_coarse);
  });
  ScalarField kappa = make_kappa(config.kappa);
  ScalarField f = source_field(config.source_scale);

  ReferenceSolution ref = clock.run(
      "reference_solve", [&] { return solve_reference(mesh, kappa, f); });

  const int nb = mesh.n_coarse * mesh.n_coarse;
  rep.coefficients.resize(nb);
  std::vector<CellBasisSet> basis_dump;
  if (config.dump_basis) basis_dump.resize(nb);
  clock.run("cell_problems", [&] {
    parallel_for(nb, [&](int p) {
      CellBasisSet basis = solve_cell_basis(mesh, kappa, p, config.layers);
      rep.coefficients[p] = compute_coefficients(mesh, kappa, f, basis);
      if (config.dump_basis) basis_dump[p] = std::move(basis);
    });
  });

  MacroSolution macro = clock.run("macro_solve", [&] {
    return solve_macro(assemble_macro(rep.coefficients, mesh.n_coarse,
                                      mesh.eps, config.grad_load));
  });

  clock.run("errors", [&] {
    for (int i = 0; i < 2; ++i) {
      rep.ref_avg[i].resize(nb);
      rep.macro_avg[i].resize(nb);
      for (int p = 0; p < nb; ++p) {
        rep.macro_avg[i][p] = macro.block_average(p, i);
        rep.ref_avg[i][p] = (mesh.continuum_measure(p, i + 1) > 0.0)
                                ? cell_continuum_average(ref, p, i + 1)
                                : std::nan("");
      }
      rep.e[i] =
          relative_error(rep.macro_avg[i], rep.ref_avg[i], config.sqrt_error);
    }
    // Effect of the gradient-load pairing, recorded in the manifest.
    MacroSolution alt = solve_macro(assemble_macro(
        rep.coefficients, mesh.n_coarse, mesh.eps, !config.grad_load));
    for (int i = 0; i < 2; ++i) {
      std::vector<double> alt_avg(nb);
      for (int p = 0; p < nb; ++p) alt_avg[p] = alt.block_average(p, i);
      rep.e_alt_grad_load[i] =
          relative_error(alt_avg, rep.ref_avg[i], config.sqrt_error);
    }
  });

  if (!config.out_dir.empty()) {
    std::filesystem::path dir(config.out_dir);
    try {
      clock.run("write_outputs", [&] {
        detail::write_outputs(dir, rep, mesh, ref, macro);
        if (config.dump_basis)
          for (const auto& basis : basis_dump) detail::dump_basis_csv(dir, basis);
      });
    } catch (...) {
      std::filesystem::remove_all(dir);
      throw;
    }
  }
  return rep;
}

/// Outcome of a sweep; failed cases are recorded and excluded from tables.
struct SweepResult {
  std::vector<ErrorReport> reports;
  std::vector<std::string> failures;
};

/// Runs a list of cases and merges their errors into one CSV plus one
/// paper-style table per (structure, kappa): rows l, column pairs per eps.
inline SweepResult sweep(std::vector<ExperimentConfig> configs,
                         const std::string& out_dir) {
  require(!configs.empty(), "sweep: empty config list");
  std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  SweepResult result;
  for (size_t k = 0; k < configs.size(); ++k) {
    ExperimentConfig& c = configs[k];
    if (!c.out_dir.empty())
      c.out_dir = (dir / c.out_dir).string();
    std::string tag = "structure=" + std::to_string(c.structure_id) +
                      " kappa=" + kappa_name(c.kappa) + " eps=1/" +
                      std::to_string(c.n_coarse) +
                      " l=" + std::to_string(c.layers);
    try {
      result.reports.push_back(run_case(c));
    } catch (const Error& e) {
      result.failures.push_back(tag + ": " + e.what());
    }
  }

  {
    CsvWriter w(dir / "sweep_errors.csv",
                {"structure", "kappa", "eps", "l", "e1", "e2"});
    for (const auto& r : result.reports)
      w.row({std::to_string(r.config.structure_id),
             kappa_name(r.config.kappa),
             "1/" + std::to_string(r.config.n_coarse),
             std::to_string(r.config.layers), format_double(r.e[0]),
             format_double(r.e[1])});
  }

  // One table per (structure, kappa) present among successful runs.
  std::map<std::pair<int, KappaKind>, std::vector<const ErrorReport*>> groups;
  for (const auto& r : result.reports)
    groups[{r.config.structure_id, r.config.kappa}].push_back(&r);
  for (const auto& [key, runs] : groups) {
    std::vector<int> eps_list, l_list;
    for (const auto* r : runs) {
      if (std::find(eps_list.begin(), eps_list.end(), r->config.n_coarse) ==
          eps_list.end())
        eps_list.push_back(r->config.n_coarse);
      if (std::find(l_list.begin(), l_list.end(), r->config.layers) ==
          l_list.end())
        l_list.push_back(r->config.layers);
    }
    std::sort(eps_list.begin(), eps_list.end());
    std::sort(l_list.begin(), l_list.end());
    std::vector<std::string> header{"l"};
    for (int nc : eps_list) {
      header.push_back("e1_eps=1/" + std::to_string(nc));
      header.push_back("e2_eps=1/" + std::to_string(nc));
    }
    CsvWriter w(dir / ("table_structure" + std::to_string(key.first) +
                       "_kappa_" + kappa_name(key.second) + ".csv"),
                header);
    for (int l : l_list) {
      std::vector<std::string> cells{std::to_string(l)};
      for (int nc : eps_list) {
        const ErrorReport* hit = nullptr;
        for (const auto* r : runs)
          if (r->config.n_coarse == nc && r->config.layers == l) hit = r;
        cells.push_back(hit ? format_double(hit->e[0]) : "");
        cells.push_back(hit ? format_double(hit->e[1]) : "");
      }
      w.row(cells);
    }
  }

  if (!result.failures.empty()) {
    std::ofstream log(dir / "failures.log");
    for (const auto& fline : result.failures) log << fline << "\n";
  }
  return result;
}

}  // namespace mch
