#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "workstat/config.hpp"
#include "workstat/errors.hpp"
#include "workstat/experiments.hpp"
#include "workstat/numeric_format.hpp"

namespace fs = std::filesystem;
using namespace workstat;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfigError = 2, kCertificationError = 3 };

struct Overrides {
  std::string config;
  std::string output;
  double dt = 0.0;
  int threads = -1;
  bool full_scale = false;
  std::string fidelity;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
  cmd->add_option("--output", o.output, "output directory (overrides output_dir)");
  cmd->add_option("--dt", o.dt, "time step")->check(CLI::PositiveNumber);
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--full-scale", o.full_scale, "run the N = 11 chain (slow)");
  cmd->add_option("--fidelity-convention", o.fidelity, "f: 1 - F, sqrtf: 1 - sqrt(F)")
      ->check(CLI::IsMember({"f", "sqrtf"}));
  cmd->add_flag("-q,--quiet", o.quiet, "no progress output");
}

exp::RunConfig prepare(const Overrides& o, exp::ScanKind kind) {
  exp::RunConfig cfg = exp::load_config(o.config);
  cfg.scan = kind;
  if (!o.output.empty()) cfg.output_dir = o.output;
  if (o.dt > 0.0) cfg.dt = o.dt;
  if (o.threads >= 0) cfg.threads = o.threads;
  if (o.fidelity == "f") cfg.fidelity_convention = spectral::FidelityConvention::one_minus_F;
  if (o.fidelity == "sqrtf") cfg.fidelity_convention = spectral::FidelityConvention::one_minus_sqrtF;
  if (o.full_scale) {
    cfg.max_sites = std::max(cfg.max_sites, 11);
    if (kind == exp::ScanKind::size) {
      cfg.grid.clear();
      for (int n = 4; n <= 11; ++n) cfg.grid.push_back(n);
    } else {
      cfg.model.n_sites = 11;
    }
  }
  exp::validate(cfg);
  return cfg;
}

exp::Progress progress_for(const Overrides& o) {
  if (o.quiet) return {};
  return [](const std::string& msg) { std::cerr << "  " << msg << '\n'; };
}

std::string path_in(const exp::RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

void print_records(const std::vector<exp::ScanRecord>& records) {
  std::printf("%14s %14s %14s %12s %12s\n", "scan_value", "infidelity", "avg_work", "jarzynski", "variance");
  for (const auto& r : records) {
    std::printf("%14s %14.6e %14.6e %12.3e %12.3e\n", format_double(r.scan_value).c_str(), r.infidelity, r.avg_work,
                r.jarzynski_deviation, r.delta_variance);
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_scan(const Overrides& o, exp::ScanKind kind) {
  const auto t0 = std::chrono::steady_clock::now();
  const exp::RunConfig cfg = prepare(o, kind);
  exp::Summary summary;
  summary.config = cfg;
  const std::string stem = kind == exp::ScanKind::velocity ? "velocity_scan" : "size_scan";
  summary.records = kind == exp::ScanKind::velocity ? exp::run_velocity_scan(cfg, progress_for(o))
                                                    : exp::run_size_scan(cfg, progress_for(o));
  print_records(summary.records);
  exp::emit_csv(summary.records, path_in(cfg, stem + ".csv"));
  summary.wall_time = seconds_since(t0);
  exp::emit_json_summary(summary, path_in(cfg, stem + "_summary.json"));
  std::cout << "wrote " << path_in(cfg, stem + ".csv") << '\n';
  return kOk;
}

int run_lambda(const Overrides& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const exp::RunConfig cfg = prepare(o, exp::ScanKind::lambda_scaling);
  const auto rep = exp::run_lambda_scaling(cfg, progress_for(o));
  std::cout << "ramp v = " << format_double(rep.velocity) << '\n';
  print_records(rep.adiabatic);
  std::cout << "quench\n";
  print_records(rep.quench);
  std::printf("slope_adiabatic %.4f (r^2 %.6f)\nslope_quench    %.4f (r^2 %.6f)\n", rep.fit_adiabatic.slope,
              rep.fit_adiabatic.r_squared, rep.fit_quench.slope, rep.fit_quench.r_squared);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  exp::emit_csv(rep.adiabatic, path_in(cfg, "lambda_adiabatic.csv"));
  exp::emit_csv(rep.quench, path_in(cfg, "lambda_quench.csv"));
  exp::Summary summary;
  summary.config = cfg;
  summary.records = rep.adiabatic;
  summary.records.insert(summary.records.end(), rep.quench.begin(), rep.quench.end());
  summary.fits = {{"slope_adiabatic", rep.fit_adiabatic.slope},
                  {"intercept_adiabatic", rep.fit_adiabatic.intercept},
                  {"r_squared_adiabatic", rep.fit_adiabatic.r_squared},
                  {"slope_quench", rep.fit_quench.slope},
                  {"intercept_quench", rep.fit_quench.intercept},
                  {"r_squared_quench", rep.fit_quench.r_squared}};
  summary.warnings = rep.warnings;
  summary.wall_time = seconds_since(t0);
  exp::emit_json_summary(summary, path_in(cfg, "lambda_scaling_summary.json"));
  return kOk;
}

void write_pert_csv(const exp::PertComparePoint& pt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "u,re_exact,im_exact,re_second,im_second,re_third,im_third,re_quadrature,im_quadrature,abs_residual\n";
  for (std::size_t k = 0; k < pt.u.size(); ++k) {
    const Complex third = k < pt.third_order.size() ? pt.third_order[k] : Complex(0.0, 0.0);
    const Complex quad = k < pt.quadrature.size() ? pt.quadrature[k] : Complex(NAN, NAN);
    out << format_double(pt.u[k]) << ',' << format_double(pt.exact[k].real()) << ','
        << format_double(pt.exact[k].imag()) << ',' << format_double(pt.second_order[k].real()) << ','
        << format_double(pt.second_order[k].imag()) << ',' << format_double(third.real()) << ','
        << format_double(third.imag()) << ',' << format_double(quad.real()) << ',' << format_double(quad.imag())
        << ',' << format_double(std::abs(pt.exact[k] - pt.second_order[k])) << '\n';
  }
}

int run_pert(const Overrides& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const exp::RunConfig cfg = prepare(o, exp::ScanKind::pert_compare);
  const auto rep = exp::run_pert_compare(cfg, progress_for(o));
  fs::create_directories(cfg.output_dir);
  exp::Summary summary;
  summary.config = cfg;
  std::printf("%10s %14s %14s %14s %14s\n", "lambda1", "max_residual", "lin_exact", "lin_second", "quad_gap");
  for (const auto& pt : rep.points) {
    std::printf("%10s %14.6e %14.6e %14.6e %14.6e\n", format_double(pt.lambda1).c_str(), pt.max_residual,
                pt.linearity_exact.relative_residual, pt.linearity_second.relative_residual, pt.max_quadrature_gap);
    write_pert_csv(pt, path_in(cfg, "pert_compare_lambda_" + format_double(pt.lambda1) + ".csv"));
    summary.records.push_back(pt.record);
    const std::string tag = "lambda_" + format_double(pt.lambda1) + "_";
    summary.fits.emplace_back(tag + "max_residual", pt.max_residual);
    summary.fits.emplace_back(tag + "linearity_exact", pt.linearity_exact.relative_residual);
    summary.fits.emplace_back(tag + "linearity_second", pt.linearity_second.relative_residual);
    summary.fits.emplace_back(tag + "linearity_second_excluded", pt.linearity_second_excluded.relative_residual);
    summary.fits.emplace_back(tag + "w0_second", pt.linearity_second.w0_fit);
    summary.fits.emplace_back(tag + "zero_mode_weight", pt.zero_mode_weight);
    if (!pt.quadrature.empty()) summary.fits.emplace_back(tag + "quadrature_gap", pt.max_quadrature_gap);
  }
  if (rep.has_fit) {
    std::printf("residual slope %.4f (r^2 %.6f)\n", rep.residual_fit.slope, rep.residual_fit.r_squared);
    summary.fits.emplace_back("residual_slope", rep.residual_fit.slope);
    summary.fits.emplace_back("residual_r_squared", rep.residual_fit.r_squared);
  }
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  summary.warnings = rep.warnings;
  summary.wall_time = seconds_since(t0);
  exp::emit_json_summary(summary, path_in(cfg, "pert_compare_summary.json"));
  return kOk;
}

int run_single_cmd(const Overrides& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const exp::RunConfig cfg = prepare(o, exp::ScanKind::single);
  exp::Summary summary;
  summary.config = cfg;
  summary.records = {exp::run_single(cfg)};
  print_records(summary.records);
  exp::emit_csv(summary.records, path_in(cfg, "single.csv"));
  summary.wall_time = seconds_since(t0);
  exp::emit_json_summary(summary, path_in(cfg, "single_summary.json"));
  return kOk;
}

int run_validate(const std::string& path) {
  const exp::RunConfig cfg = exp::load_config(path);
  std::cout << exp::dump_config(cfg);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Work statistics of driven XXZ chains"};
  app.set_version_flag("--version", exp::tool_version());
  app.require_subcommand(1);

  Overrides o;
  auto* velocity = app.add_subcommand("scan-velocity", "infidelity vs ramp velocity, quench included");
  auto* size = app.add_subcommand("scan-size", "infidelity vs chain length");
  auto* lambda = app.add_subcommand("scan-lambda", "log-log scaling of infidelity in lambda1");
  auto* pert = app.add_subcommand("pert-compare", "exact ln chi against the cumulant expansion");
  auto* single = app.add_subcommand("single", "one protocol run");
  for (auto* cmd : {velocity, size, lambda, pert, single}) add_common(cmd, o);
  std::string validate_path;
  auto* validate = app.add_subcommand("validate-config", "parse a config and print it normalized");
  validate->add_option("--config", validate_path, "JSON run configuration")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*velocity) return run_scan(o, exp::ScanKind::velocity);
    if (*size) return run_scan(o, exp::ScanKind::size);
    if (*lambda) return run_lambda(o);
    if (*pert) return run_pert(o);
    if (*single) return run_single_cmd(o);
    if (*validate) return run_validate(validate_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const CertificationError& e) {
    std::cerr << "certification failed: " << e.what() << '\n';
    return kCertificationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
