// Command-line driver for the multicontinuum homogenization pipeline:
// `run` executes one case, `sweep` a grid of cases, writing CSV outputs
// and a manifest per run.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mch/experiments.hpp"

namespace {

int parse_eps(const std::string& text) {
  // Accepts "1/N" or plain "N" (meaning eps = 1/N).
  std::string s = text;
  if (s.rfind("1/", 0) == 0) s = s.substr(2);
  try {
    size_t used = 0;
    int n = std::stoi(s, &used);
    if (used == s.size() && n >= 2) return n;
  } catch (...) {
  }
  throw mch::Error("bad --eps value '" + text + "' (expected 1/N)");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

struct CliOptions {
  std::string structures = "1";
  std::string kappas = "one";
  std::string eps = "1/10";
  std::string layers = "1";
  int n_fine = 80;
  std::string grad_load = "on";
  std::string error_convention = "sqrt";
  bool dump_basis = false;
  bool dump_geometry = false;
  std::string out;
  std::string config_path;
};

void apply_config_file(CliOptions& opt) {
  if (opt.config_path.empty()) return;
  std::ifstream in(opt.config_path);
  if (!in.good())
    throw mch::Error("cannot open config file " + opt.config_path);
  nlohmann::json j = nlohmann::json::parse(in);
  auto str = [&](const char* key, std::string& slot) {
    if (j.contains(key))
      slot = j[key].is_string() ? j[key].get<std::string>() : j[key].dump();
  };
  str("structure", opt.structures);
  str("kappa", opt.kappas);
  str("eps", opt.eps);
  str("layers", opt.layers);
  str("grad_load", opt.grad_load);
  str("error_convention", opt.error_convention);
  if (j.contains("n_fine")) opt.n_fine = j["n_fine"].get<int>();
  if (j.contains("dump_basis")) opt.dump_basis = j["dump_basis"].get<bool>();
  if (j.contains("dump_geometry"))
    opt.dump_geometry = j["dump_geometry"].get<bool>();
  if (j.contains("out")) opt.out = j["out"].get<std::string>();
}

std::vector<mch::ExperimentConfig> expand_grid(const CliOptions& opt) {
  std::vector<mch::ExperimentConfig> configs;
  for (const auto& s : split_list(opt.structures)) {
    for (const auto& k : split_list(opt.kappas)) {
      for (const auto& e : split_list(opt.eps)) {
        for (const auto& l : split_list(opt.layers)) {
          mch::ExperimentConfig c;
          c.structure_id = std::stoi(s);
          c.kappa = mch::parse_kappa(k);
          c.n_coarse = parse_eps(e);
          c.layers = std::stoi(l);
          c.n_fine = opt.n_fine;
          c.grad_load = (opt.grad_load == "on");
          c.sqrt_error = (opt.error_convention == "sqrt");
          c.dump_basis = opt.dump_basis;
          c.dump_geometry = opt.dump_geometry;
          configs.push_back(c);
        }
      }
    }
  }
  return configs;
}

void add_common_flags(CLI::App* cmd, CliOptions& opt, bool lists) {
  const char* many = lists ? " (comma-separated list)" : "";
  cmd->add_option("--structure", opt.structures,
                  std::string("channel structure, 1 or 2") + many);
  cmd->add_option("--kappa", opt.kappas,
                  std::string("coefficient: one|sine|sine_half") + many);
  cmd->add_option("--eps", opt.eps,
                  std::string("period as 1/N, e.g. 1/10") + many);
  cmd->add_option("--layers", opt.layers,
                  std::string("oversampling layers, 0..2") + many);
  cmd->add_option("--n-fine", opt.n_fine,
                  "fine cells per coarse block per dimension (default 80)");
  cmd->add_option("--grad-load", opt.grad_load,
                  "include the gradient load pairing: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--error-convention", opt.error_convention,
                  "sqrt (relative L2 norm) or ratio (squared-sum ratio)")
      ->check(CLI::IsMember({"sqrt", "ratio"}));
  cmd->add_flag("--dump-basis", opt.dump_basis,
                "write per-block basis fields");
  cmd->add_flag("--dump-geometry", opt.dump_geometry,
                "write the fine-cell label raster");
  cmd->add_option("--out", opt.out, "output directory");
  cmd->add_option("--config", opt.config_path,
                  "JSON key-value config file (flags override nothing; "
                  "file values replace defaults)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multicontinuum homogenization for perforated domains"};
  app.require_subcommand(1);

  CliOptions run_opt, sweep_opt;
  CLI::App* run_cmd = app.add_subcommand("run", "run one case");
  add_common_flags(run_cmd, run_opt, false);
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "run a grid of cases and merge tables");
  add_common_flags(sweep_cmd, sweep_opt, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      apply_config_file(run_opt);
      auto configs = expand_grid(run_opt);
      if (configs.size() != 1)
        throw mch::Error("run: expected exactly one case; use sweep for "
                         "lists");
      configs[0].out_dir = run_opt.out;
      mch::ErrorReport rep = mch::run_case(configs[0]);
      std::printf("structure=%d kappa=%s eps=1/%d l=%d  e1=%.6e  e2=%.6e\n",
                  rep.config.structure_id,
                  mch::kappa_name(rep.config.kappa).c_str(),
                  rep.config.n_coarse, rep.config.layers, rep.e[0], rep.e[1]);
      for (const auto& t : rep.timings)
        std::printf("  %-16s %8.2fs\n", t.stage.c_str(), t.seconds);
    } else {
      apply_config_file(sweep_opt);
      auto configs = expand_grid(sweep_opt);
      if (sweep_opt.out.empty())
        throw mch::Error("sweep: --out is required");
      // Each case keeps its own subdirectory of per-run outputs.
      for (auto& c : configs)
        c.out_dir = "case_s" + std::to_string(c.structure_id) + "_" +
                    mch::kappa_name(c.kappa) + "_eps" +
                    std::to_string(c.n_coarse) + "_l" +
                    std::to_string(c.layers);
      mch::SweepResult result = mch::sweep(configs, sweep_opt.out);
      for (const auto& r : result.reports)
        std::printf("structure=%d kappa=%s eps=1/%d l=%d  e1=%.6e  e2=%.6e\n",
                    r.config.structure_id,
                    mch::kappa_name(r.config.kappa).c_str(), r.config.n_coarse,
                    r.config.layers, r.e[0], r.e[1]);
      if (!result.failures.empty()) {
        for (const auto& fline : result.failures)
          std::fprintf(stderr, "FAILED %s\n", fline.c_str());
        return 1;
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
