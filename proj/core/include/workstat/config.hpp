#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "workstat/drive.hpp"
#include "workstat/perturbative.hpp"
#include "workstat/spectral.hpp"
#include "workstat/spin_model.hpp"

namespace workstat::exp {

enum class ScanKind { velocity, size, lambda_scaling, pert_compare, single };

std::string to_string(ScanKind kind);
ScanKind parse_scan_kind(const std::string& text);

/// Drive parameters as written in the config. The concrete DriveProtocol is
/// built per scan point.
struct ProtocolParams {
  drive::ProtocolKind kind = drive::ProtocolKind::ramp_hold;
  double velocity = 0.2;  // +inf selects a quench
  double t_total = 0.0;   // 0: derived from the scan (see the scan functions)
  bool allow_partial = false;
  std::vector<std::pair<double, double>> samples;  // sampled kind only

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

struct RunConfig {
  spin::SpinChainSpec model{9, 2.0};
  double beta = 1.0;
  double lambda1 = 0.1;
  ProtocolParams protocol;
  ScanKind scan = ScanKind::single;
  std::vector<double> grid;  // empty: scan default
  double dt = 0.01;
  spectral::FidelityConvention fidelity_convention = spectral::FidelityConvention::one_minus_F;
  std::uint64_t seed = 0;
  std::string output_dir = "results";

  // numerics
  drive::Method method = drive::Method::yoshida4;
  int threads = 0;  // 0: hardware concurrency
  bool sector_blocks = true;
  bool certify = true;
  bool record_timing = false;
  pert::ZeroModePolicy zero_mode = pert::ZeroModePolicy::regularize;
  int max_sites = spin::kDefaultMaxSites;
  int u_points = 201;
  double u_half_width = 5.0;
  bool quadrature_check = false;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ConfigError naming the offending key.
void validate(const RunConfig& cfg);

/// Parses the JSON config text. Unknown keys, wrong types and missing
/// required keys raise ConfigError; syntax errors carry line and column.
RunConfig parse_config(const std::string& text);

/// parse_config on the file contents, then the WORKSTAT_OUTPUT_DIR
/// environment override.
RunConfig load_config(const std::string& path);

/// Every field written out explicitly; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

}  // namespace workstat::exp
