// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Exit status: 0 success, 1 configuration or usage
// error, 2 numerical failure.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cornersim/canonical.hpp"
#include "cornersim/errors.hpp"
#include "cornersim/fem.hpp"
#include "cornersim/mesh.hpp"
#include "cornersim/spectral.hpp"
#include "cornersim/sweep.hpp"

namespace {

using namespace cornersim;

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::optional<double> kappa;
  std::optional<double> delta;
  std::optional<std::uint64_t> seed;
  int count = 5;
  int mode = 1;
  int levels = 3;
  int trials = 200;
  int mesh = 0;
};

SweepConfig resolve_config(const Options& opt) {
  SweepConfig cfg;
  if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
  if (opt.kappa) {
    cfg.contrast = Contrast::from_kappa(*opt.kappa, cfg.contrast.sigma_plus());
    const Regime r = classify_contrast(cfg.contrast);
    if (r == Regime::LimitMinusOne || r == Regime::LimitMinusThird) {
      throw ConfigError(std::string("--kappa: limit contrast excluded (") + to_string(r) + ")", 0,
                        "kappa");
    }
  }
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.mesh > 0) cfg.n_t = cfg.n_theta = opt.mesh;
  cfg.validate();
  return cfg;
}

Contrast require_kappa(const Options& opt) {
  if (!opt.kappa) throw ConfigError("--kappa is required", 0, "kappa");
  return Contrast::from_kappa(*opt.kappa);
}

int cmd_spectral(const Options& opt) {
  const Contrast c = require_kappa(opt);
  const Regime regime = classify_contrast(c);
  std::printf("kappa          %.17g\n", c.kappa());
  std::printf("regime         %s\n", to_string(regime));
  if (regime != Regime::CriticalInterval) return 0;
  const SpectralData s = make_spectral_data(c);
  std::printf("mu             %.17g\n", s.mu);
  std::printf("mu_dispersion  %.17g\n", mu_dispersion(c));
  std::printf("c_phi          %.17g\n", s.c_phi);
  std::printf("lambda (|Re| <= 6):\n");
  for (const Complex& z : lambda_set(c, 6.0)) std::printf("  % .6f %+.6fi\n", z.real(), z.imag());
  return 0;
}

int cmd_resonances(const Options& opt) {
  const Contrast c = require_kappa(opt);
  if (classify_contrast(c) != Regime::CriticalInterval) {
    throw RegimeError("resonances exist only for kappa in (-1, -1/3)");
  }
  std::printf("n,delta_n,ln_delta_n\n");
  const auto deltas = resonance_deltas(c, opt.count);
  for (std::size_t n = 0; n < deltas.size(); ++n) {
    std::printf("%zu,%.17g,%.17g\n", n + 1, deltas[n], std::log(deltas[n]));
  }
  return 0;
}

int cmd_solve(const Options& opt) {
  const SweepConfig cfg = resolve_config(opt);
  if (!opt.delta) throw ConfigError("--delta is required", 0, "delta");
  if (!(*opt.delta > 0.0 && *opt.delta < 1.0)) throw ConfigError("--delta must lie in (0, 1)", 0, "delta");
  FemSolution solution;
  const SweepRecord rec = evaluate_delta(cfg, *opt.delta, &solution);
  std::printf("delta              %.17g\n", rec.delta);
  std::printf("status             %s\n", to_string(rec.status));
  if (rec.smallest_singular) std::printf("smallest_singular  %.6e\n", *rec.smallest_singular);
  if (rec.status != SolveStatus::Ok) return kExitNumerical;
  std::printf("h1_seminorm        %.17g\n", *rec.h1_seminorm);
  std::printf("l2_norm            %.17g\n", *rec.l2_norm);
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = (std::filesystem::path(cfg.output_dir) / "solution.vtk").string();
  write_field_vtk(solution, *solution.mesh, path);
  std::printf("wrote              %s\n", path.c_str());
  return 0;
}

int cmd_sweep(const Options& opt) {
  const SweepConfig cfg = resolve_config(opt);
  const auto records = run_sweep(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = (std::filesystem::path(cfg.output_dir) / "sweep.csv").string();
  write_csv(records, path);
  std::size_t near = 0;
  for (const auto& r : records) near += r.status == SolveStatus::NearSingular;
  std::printf("%zu records (%zu NearSingular) -> %s\n", records.size(), near, path.c_str());
  try {
    const auto peaks = detect_peaks(records, 3.0);
    std::printf("peaks (prominence 3):");
    for (double p : peaks) std::printf(" %.6f", p);
    std::printf("\n");
  } catch (const InsufficientDataError& e) {
    std::printf("peaks: %s\n", e.what());
  }
  return 0;
}

int cmd_kernel_check(const Options& opt) {
  const Contrast c = require_kappa(opt);
  const double delta_n = det57_root(c, opt.mode);
  const ModeData mode = kernel_coefficients(c, delta_n, opt.mode);
  std::printf("n %d  delta_n %.17g  u_minus/u_plus %.17g\n", opt.mode, delta_n, mode.u_minus_n);
  std::printf("mesh,relative_residual\n");
  int n = opt.mesh > 0 ? opt.mesh : 16;
  for (int level = 0; level < opt.levels; ++level, n *= 2) {
    const AnnulusMesh mesh = build_annulus_mesh(delta_n, n, n);
    std::printf("%d,%.6e\n", n, kernel_residual_check(c, delta_n, mode, mesh));
  }
  return 0;
}

int cmd_coercivity_check(const Options& opt) {
  const Contrast c = require_kappa(opt);
  if (!opt.delta) throw ConfigError("--delta is required", 0, "delta");
  const double kappa = c.kappa();
  const bool plus = kappa > -1.0;
  const int n = opt.mesh > 0 ? opt.mesh : 32;
  const AnnulusMesh mesh = build_tcoercivity_mesh(
      *opt.delta, 2 * n, n, plus ? MeshKind::TCoercivityPlus : MeshKind::TCoercivityMinus);
  const double ratio = coercivity_probe(c, mesh, opt.trials, plus ? TOperator::TPlus : TOperator::TMinus,
                                        opt.seed.value_or(0));
  std::printf("operator %s  trials %d  min_ratio %.6e\n", plus ? "T+" : "T-", opt.trials, ratio);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sign-changing transmission problems on a truncated corner"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "Output directory");
    sub->add_option("--kappa", opt.kappa, "Contrast sigma_minus / sigma_plus");
    sub->add_option("--delta", opt.delta, "Inner radius");
    sub->add_option("--seed", opt.seed, "Random seed");
  };
  CLI::App* spectral = app.add_subcommand("spectral", "Singular exponent, c_phi and the Lambda set");
  CLI::App* resonances = app.add_subcommand("resonances", "Table of resonant inner radii");
  CLI::App* solve = app.add_subcommand("solve", "Single solve, writes solution.vtk");
  CLI::App* sweep = app.add_subcommand("sweep", "Delta sweep, writes sweep.csv");
  CLI::App* kernel = app.add_subcommand("kernel-check", "Discrete residual of a kernel mode");
  CLI::App* coercivity = app.add_subcommand("coercivity-check", "T-coercivity probe");
  for (CLI::App* sub : {spectral, resonances, solve, sweep, kernel, coercivity}) add_common(sub);
  resonances->add_option("--count", opt.count, "Number of resonances")->check(CLI::Range(1, 1000));
  kernel->add_option("--mode", opt.mode, "Radial mode index n")->check(CLI::Range(1, 100));
  kernel->add_option("--levels", opt.levels, "Mesh doublings")->check(CLI::Range(1, 6));
  coercivity->add_option("--trials", opt.trials, "Random trials")->check(CLI::Range(1, 100000));
  for (CLI::App* sub : {solve, sweep, kernel, coercivity}) {
    sub->add_option("--mesh", opt.mesh, "Mesh resolution override")->check(CLI::Range(4, 4096));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*spectral) return cmd_spectral(opt);
    if (*resonances) return cmd_resonances(opt);
    if (*solve) return cmd_solve(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*kernel) return cmd_kernel_check(opt);
    if (*coercivity) return cmd_coercivity_check(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParamError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitConfig;
}
