#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "workstat/operator.hpp"
#include "workstat/spectral.hpp"

namespace workstat::drive {

enum class ProtocolKind { ramp_hold, quench, sampled };

std::string to_string(ProtocolKind kind);

/// Coupling schedule lambda(t) on [0, t_total] with lambda(0) = 0.
///
///  ramp_hold: lambda(t) = min(v t, lambda_final); the ramp ends at
///             t_r = lambda_final / v and the coupling is held afterwards.
///  quench:    lambda(0) = 0, lambda(t) = lambda_final for t > 0.
///  sampled:   piecewise-linear interpolation of (t, lambda) samples that
///             start at (0, 0); t_total and lambda_final come from the last sample.
class DriveProtocol {
 public:
  /// Throws InvalidArgument unless v * t_total >= lambda_final (or
  /// allow_partial is set), v >= 0 and t_total > 0.
  static DriveProtocol ramp_hold(double velocity, double lambda_final, double t_total,
                                 bool allow_partial = false);
  static DriveProtocol quench(double lambda_final, double t_total);
  static DriveProtocol sampled(std::vector<std::pair<double, double>> samples);

  ProtocolKind kind() const noexcept { return kind_; }
  double velocity() const noexcept { return velocity_; }
  double lambda_final() const noexcept { return lambda_final_; }
  double t_total() const noexcept { return t_total_; }
  const std::vector<std::pair<double, double>>& samples() const noexcept { return samples_; }

  /// End of the time-dependent part: t_r for ramp_hold (capped at t_total),
  /// 0 for quench, t_total for sampled.
  double ramp_end() const noexcept;

  /// lambda(t_total) == lambda_final.
  bool completed() const noexcept;

  /// lambda(t_total).
  double lambda_end() const;

  /// Schedule value; throws InvalidArgument for t outside [0, t_total].
  /// The quench returns 0 at t = 0 and lambda_final for t > 0.
  double lambda_at(double t) const;

 private:
  DriveProtocol() = default;

  ProtocolKind kind_ = ProtocolKind::quench;
  double velocity_ = 0.0;
  double lambda_final_ = 0.0;
  double t_total_ = 0.0;
  std::vector<std::pair<double, double>> samples_;
};

enum class Method { strang, midpoint_exact, magnus4, yoshida4 };

std::string to_string(Method method);

struct PropagatorResult {
  OperatorMatrix unitary;
  double dt_used = 0.0;
  Method method = Method::midpoint_exact;
  double unitarity_defect = 0.0;
  std::size_t steps = 0;
};

struct PropagateOptions {
  /// Propagate each magnetization sector separately. Both h0 and h1 must be
  /// block diagonal in the sector decomposition.
  bool use_sectors = false;
  /// Unitarity defect (Frobenius) above which propagate() aborts.
  double max_unitarity_defect = 1e-6;
};

/// Time-ordered propagator for H(t) = h0 + lambda(t) h1 (hbar = 1).
///
/// The time-dependent part [0, ramp_end] is stepped with step dt, sampling
/// lambda at each step midpoint. The step straddling ramp_end is split so the
/// cap is met exactly; the remaining constant-coupling segment is applied as
/// one exact exponential (a quench is a single exact exponential).
///
///  strang:         exp(-i h0 dt/2) exp(-i lambda_mid h1 dt) exp(-i h0 dt/2),
///                  h1 must be diagonal; half-step factors are precomputed.
///  midpoint_exact: exp(-i H(t_mid) dt) from a fresh diagonalization per step.
///  magnus4:        fourth-order Magnus step from the two Gauss points t_1,2,
///                  exp(-i dt [H0 + lbar H1 - (sqrt3 dt / 12)(l2 - l1) i[H1, H0]]),
///                  one diagonalization per step.
///  yoshida4:       triple-jump composition of three Strang steps with weights
///                  w1, 1 - 2 w1, w1 (w1 = 1 / (2 - 2^(1/3))); fourth order,
///                  h1 diagonal, no diagonalization inside the loop.
/// Steps never straddle a kink of lambda(t) (ramp end, sampled knots).
PropagatorResult propagate(const OperatorMatrix& h0, const OperatorMatrix& h1, const DriveProtocol& protocol,
                           double dt, Method method, const PropagateOptions& options = {});

/// U rho U^dagger.
spectral::DensityMatrix evolve_density(const spectral::DensityMatrix& rho0, const PropagatorResult& u);

/// Fidelity between U rho_G(H_i) U^dagger and rho_G(H_f), computed from the
/// exact Boltzmann populations of both spectra.
double transfer_fidelity(const spectral::SpectralDecomposition& spec_i,
                         const spectral::SpectralDecomposition& spec_f, const ComplexMatrix& u, double beta);

/// A(omega) = |int_0^t ds lambda'(s) exp(i omega s)|^2.
double spectral_response(const DriveProtocol& protocol, double omega);

/// lambda_end^2 - A(omega), evaluated without cancellation near omega = 0.
double spectral_response_deficit(const DriveProtocol& protocol, double omega);

struct ConvergenceReport {
  double dt = 0.0;
  double unitary_change = 0.0;  // ||U_dt - U_dt/2||_F
  double infidelity_coarse = 0.0;
  double infidelity_fine = 0.0;
  double infidelity_shift = 0.0;  // |coarse - fine|
  double relative_shift = 0.0;    // shift / fine (0 when both vanish)
  PropagatorResult coarse;
  PropagatorResult fine;
};

/// Runs propagate() at dt and dt/2 and reports how much the propagator and
/// the Gibbs-transfer infidelity move.
ConvergenceReport convergence_probe(const OperatorMatrix& h0, const OperatorMatrix& h1,
                                    const DriveProtocol& protocol, double dt, Method method, double beta,
                                    const PropagateOptions& options = {},
                                    spectral::FidelityConvention convention =
                                        spectral::FidelityConvention::one_minus_F);

}  // namespace workstat::drive
