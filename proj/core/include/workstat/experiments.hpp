#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "workstat/config.hpp"
#include "workstat/drive.hpp"
#include "workstat/perturbative.hpp"
#include "workstat/work_statistics.hpp"

namespace workstat::exp {

struct ScanRecord {
  double scan_value = 0.0;
  double infidelity = 0.0;
  double avg_work = 0.0;
  double jarzynski_deviation = 0.0;
  double delta_variance = 0.0;
  double runtime_seconds = 0.0;

  // diagnostics, not part of the CSV schema
  double probe_shift = 0.0;           // |infidelity(dt) - infidelity(dt/2)|, 0 without certification
  double probe_relative_shift = 0.0;
  double unitarity_defect = 0.0;
};

using Progress = std::function<void(const std::string&)>;

/// Model, protocol and numerics of one pipeline evaluation.
struct PointSpec {
  spin::SpinChainSpec model;
  int max_sites = spin::kDefaultMaxSites;
  double beta = 1.0;
  drive::DriveProtocol protocol = drive::DriveProtocol::quench(0.0, 1.0);
  double dt = 0.01;
  drive::Method method = drive::Method::yoshida4;
  bool sector_blocks = true;
  bool certify = true;
  bool record_timing = false;
  spectral::FidelityConvention convention = spectral::FidelityConvention::one_minus_F;
};

/// Relative infidelity change under dt -> dt/2 that aborts a certified run.
inline constexpr double kCertificationTolerance = 1e-6;
/// Absolute shifts below this are round-off and never abort.
inline constexpr double kCertificationFloor = 1e-13;

/// Propagate, evolve the H0 Gibbs state, compare with the Gibbs state of the
/// final Hamiltonian and collect TPM work diagnostics. Throws
/// CertificationError when the dt/2 probe moves the infidelity too much.
ScanRecord run_point(const PointSpec& spec, double scan_value);

/// Runs jobs[0..n) on a bounded pool; results keep the job order. The first
/// exception (by job index) is rethrown.
std::vector<ScanRecord> run_parallel(const std::vector<std::function<ScanRecord()>>& jobs, int threads);

/// Default velocity grid: 12 geometric points from 1e-3 to 10 plus +inf (quench).
std::vector<double> default_velocity_grid();

/// Ramp-hold per velocity (quench for +inf) with t_total = protocol.t_total,
/// or lambda1 / min(finite grid) when that is 0. Sorted by velocity.
std::vector<ScanRecord> run_velocity_scan(const RunConfig& cfg, const Progress& progress = {});

/// Same pipeline per chain length at fixed protocol.velocity / t_total.
std::vector<ScanRecord> run_size_scan(const RunConfig& cfg, const Progress& progress = {});

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares of log(y) on log(x). Pairs with y < 1e-14 are
/// skipped and reported in `skipped`. Throws InvalidArgument for fewer than
/// two input points.
LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y, std::size_t* skipped = nullptr);

struct LambdaScalingReport {
  std::vector<ScanRecord> adiabatic;  // ramp at protocol.velocity, t_total = lambda1 / v
  std::vector<ScanRecord> quench;
  LinearFit fit_adiabatic;
  LinearFit fit_quench;
  double velocity = 0.0;
  std::vector<std::string> warnings;
};

/// Default lambda grid {0.05, 0.1, 0.2}; the adiabatic velocity is
/// protocol.velocity (1e-3 in the shipped config).
LambdaScalingReport run_lambda_scaling(const RunConfig& cfg, const Progress& progress = {});

struct PertComparePoint {
  double lambda1 = 0.0;
  std::vector<double> u;
  std::vector<Complex> exact;
  std::vector<Complex> second_order;
  std::vector<Complex> third_order;  // empty for non-adiabatic runs
  std::vector<Complex> quadrature;   // empty unless quadrature_check
  double max_residual = 0.0;         // max_u |exact - second_order|
  double max_quadrature_gap = 0.0;   // max_u |second_order - quadrature|
  work::LinearityReport linearity_exact;
  work::LinearityReport linearity_second;
  work::LinearityReport linearity_second_excluded;  // same with the zero-mode atoms dropped
  double zero_mode_weight = 0.0;
  double dropped_weight = 0.0;
  double third_order_dropped_weight = 0.0;
  ScanRecord record;
};

struct PertCompareReport {
  std::vector<PertComparePoint> points;
  LinearFit residual_fit;  // log max_residual vs log lambda1 (needs >= 2 points)
  bool has_fit = false;
  std::vector<std::string> warnings;
};

/// Exact ln chi from the TPM distribution against the second-order
/// prediction (and the third-order adiabatic term for ramps) per lambda1.
/// Ramps use t_total = protocol.t_total, or lambda1 / velocity when that is 0.
PertCompareReport run_pert_compare(const RunConfig& cfg, const Progress& progress = {});

ScanRecord run_single(const RunConfig& cfg);

/// Builds the DriveProtocol of `cfg` for coupling lambda1 (velocity +inf or
/// kind quench gives a quench).
drive::DriveProtocol make_protocol(const ProtocolParams& params, double lambda1, double t_total);

PointSpec point_spec(const RunConfig& cfg, const spin::SpinChainSpec& model, drive::DriveProtocol protocol);

/// Header scan_value,infidelity,avg_work,jarzynski_deviation,delta_variance,runtime_seconds;
/// full round-trip precision; +inf written as "inf".
void emit_csv(const std::vector<ScanRecord>& records, const std::string& path);
std::string csv_text(const std::vector<ScanRecord>& records);

struct Summary {
  RunConfig config;
  std::vector<ScanRecord> records;
  std::vector<std::pair<std::string, double>> fits;
  std::vector<std::string> warnings;
  double wall_time = 0.0;
};

/// {config, records, fits, warnings, tool_version, wall_time}. Non-finite
/// numbers are written as strings ("inf").
void emit_json_summary(const Summary& summary, const std::string& path);

std::string tool_version();

}  // namespace workstat::exp
