#pragma once

#include <iosfwd>
#include <vector>

#include "workstat/drive.hpp"
#include "workstat/operator.hpp"
#include "workstat/spectral.hpp"
#include "workstat/work_statistics.hpp"

/// Cumulant expansion of ln chi(u) in the coupling of H1.
///
/// Fourier convention: a discrete measure {(omega_k, g_k)} stands for
///   G(s) = sum_k g_k exp(-i omega_k s),
/// so integrals  int domega/2pi G(omega) f(omega)  become  sum_k g_k f(omega_k).
/// The (-i)^n prefactors of the cumulant correlators live in the weights.
namespace workstat::pert {

struct SpectralAtom2 {
  double omega = 0.0;
  double weight = 0.0;
};

/// Connected two-point measure of H1 in the H0 Gibbs state:
///   G_c(s) = (-i)^2 <H1(s) H1(0)>_c.
/// Atoms sit at omega = E_m - E_n with weight -p_n |<n|H1|m>|^2; the
/// connected part adds +<H1>^2 at omega = 0.
struct SpectralMeasure2 {
  std::vector<SpectralAtom2> atoms;  // sorted by omega
  bool connected = true;
  double spectral_range = 0.0;  // of H0

  double total_weight() const;
  Complex inverse_transform(double s) const;
};

struct SpectralAtom3 {
  double omega1 = 0.0;
  double omega2 = 0.0;
  Complex weight;
};

/// G_c(s1, s2) = (-i)^3 <H1(s1) H1(s2) H1(0)>_c with atoms at
/// (E_m - E_n, E_k - E_m) weighted by i p_n B_nm B_mk B_kn, B = <.|H1|.>.
struct SpectralMeasure3 {
  std::vector<SpectralAtom3> atoms;  // sorted by (omega1, omega2)
  double spectral_range = 0.0;

  Complex total_weight() const;
  Complex inverse_transform(double s1, double s2) const;
};

/// <H1> in the Gibbs state of H0 (beta >= 0).
double first_cumulant(const spectral::SpectralDecomposition& h0_spec, const OperatorMatrix& h1, double beta);

/// Atoms closer than 1e-12 in frequency are merged.
SpectralMeasure2 two_point_measure(const spectral::SpectralDecomposition& h0_spec, const OperatorMatrix& h1,
                                   double beta);
SpectralMeasure3 three_point_measure(const spectral::SpectralDecomposition& h0_spec, const OperatorMatrix& h1,
                                     double beta);

struct FrequencyFloors {
  double omega_floor_relative = 1e-9;  // times the spectral range of H0
  double weight_floor = 1e-12;
};

/// Treatment of measure atoms with |omega| < omega_floor in the second-order
/// formula. `regularize` uses the omega -> 0 limit of the summand,
/// lambda1^2 u^2 / 2 per unit weight; `exclude` drops them.
enum class ZeroModePolicy { regularize, exclude };

struct SecondOrderOptions {
  FrequencyFloors floors;
  ZeroModePolicy zero_mode = ZeroModePolicy::regularize;
};

struct SecondOrderResult {
  work::CfwSamples samples;  // ln_chi holds the prediction, chi = exp(ln_chi)
  std::vector<Complex> first_order;      // i u lambda1 <H1>
  std::vector<Complex> adiabatic_term;   // i u lambda1^2 sum g / omega
  std::vector<Complex> response_term;    // sum g (1 - e^{i omega u}) A(omega) / omega^2
  std::vector<Complex> zero_mode_term;   // regularized omega ~ 0 atoms
  double omega_floor = 0.0;
  double zero_mode_weight = 0.0;  // sum |g| over |omega| < omega_floor
  double dropped_weight = 0.0;    // zero-mode weight left out (exclude policy)
  bool degeneracy_warning = false;  // dropped_weight > weight_floor
};

/// Second-order ln chi for a drive that starts at lambda = 0 and ends at
/// lambda1. Throws InvalidArgument if lambda1 differs from protocol.lambda_end().
SecondOrderResult lnchi_second_order(const SpectralMeasure2& measure, const drive::DriveProtocol& protocol,
                                     double first_cum, double lambda1, const std::vector<double>& u_grid,
                                     const SecondOrderOptions& options = {});

struct QuadratureOptions {
  int nodes = 8;              // Gauss-Legendre nodes per panel
  double max_panel_phase = 1.0;  // largest |omega| * panel length
  double tolerance = 1e-7;    // allowed change when panels are halved
};

/// Same quantity by direct time-domain quadrature of the contour double
/// integral (no frequency denominators). Throws NumericalError when halving
/// the panels moves any point by more than options.tolerance.
work::CfwSamples lnchi_second_order_quadrature(const spectral::SpectralDecomposition& h0_spec,
                                               const OperatorMatrix& h1, double beta,
                                               const drive::DriveProtocol& protocol, double lambda1,
                                               const std::vector<double>& u_grid,
                                               const QuadratureOptions& options = {});

work::CfwSamples lnchi_second_order_quadrature(const SpectralMeasure2& measure, double first_cum,
                                               const drive::DriveProtocol& protocol, double lambda1,
                                               const std::vector<double>& u_grid,
                                               const QuadratureOptions& options = {});

struct ThirdOrderResult {
  work::CfwSamples samples;  // ln_chi = u * coefficient
  Complex coefficient;       // lambda1^3 sum g / (omega1 (omega1 + omega2))
  double omega_floor = 0.0;
  double dropped_weight = 0.0;
  bool degeneracy_warning = false;
};

/// Third-order adiabatic correction i u lambda1^3 sum g / (i omega1 (omega1 + omega2)).
ThirdOrderResult lnchi_third_order_adiabatic(const SpectralMeasure3& m3, double lambda1,
                                             const std::vector<double>& u_grid, const FrequencyFloors& floors = {});

/// Columns omega, re_weight, im_weight.
void write_measure_csv(std::ostream& out, const SpectralMeasure2& m);
/// Columns omega, omega2, re_weight, im_weight.
void write_measure_csv(std::ostream& out, const SpectralMeasure3& m);

}  // namespace workstat::pert
