#pragma once

#include <iosfwd>
#include <vector>

#include "workstat/drive.hpp"
#include "workstat/operator.hpp"
#include "workstat/spectral.hpp"

namespace workstat::work {

struct WorkAtom {
  double w = 0.0;
  double p = 0.0;
};

/// Discrete two-point-measurement work distribution, atoms sorted by w.
class WorkDistribution {
 public:
  /// Sorts the atoms, merges works closer than merge_tolerance into their
  /// probability-weighted mean and checks normalization. Throws
  /// NumericalError if sum p drifts from 1 by more than 1e-8, InvalidArgument
  /// on negative or non-finite atoms.
  static WorkDistribution from_atoms(std::vector<WorkAtom> atoms, double merge_tolerance,
                                     double energy_scale = 0.0);

  const std::vector<WorkAtom>& atoms() const noexcept { return atoms_; }
  std::size_t size() const noexcept { return atoms_.size(); }
  double merge_tolerance() const noexcept { return merge_tolerance_; }
  /// Sum of the spectral ranges of the initial and final Hamiltonians
  /// (0 when built from bare atoms).
  double energy_scale() const noexcept { return energy_scale_; }
  double total_probability() const;

 private:
  std::vector<WorkAtom> atoms_;
  double merge_tolerance_ = 0.0;
  double energy_scale_ = 0.0;
};

/// Transition probabilities below this are treated as round-off and dropped.
inline constexpr double kKernelFloor = 1e-20;

/// Atoms w = E_f[m] - E_i[n] with weight |<m_f|U|n_i>|^2 p_n, merged at
/// 1e-9 * (range_i + range_f).
WorkDistribution tpm_distribution(const spectral::SpectralDecomposition& spec_i,
                                  const spectral::SpectralDecomposition& spec_f, const ComplexMatrix& u,
                                  double beta);
WorkDistribution tpm_distribution(const spectral::SpectralDecomposition& spec_i,
                                  const spectral::SpectralDecomposition& spec_f,
                                  const drive::PropagatorResult& u, double beta);

struct CfwSamples {
  std::vector<double> u;
  std::vector<Complex> chi;
  std::vector<Complex> ln_chi;  // empty when unwrapping was not requested
};

/// `points` values evenly spaced on [-half_width * beta, half_width * beta].
std::vector<double> default_u_grid(double beta, int points = 201, double half_width = 5.0);

/// ln chi with the imaginary part continued along the grid, anchored at the
/// grid point closest to u = 0 (principal branch there). Throws
/// ResolutionError when |chi| < 1e-12 or a phase step exceeds 0.9 pi.
std::vector<Complex> unwrap_log(const std::vector<double>& u, const std::vector<Complex>& chi);

/// chi(u) = sum_k p_k exp(i u w_k).
CfwSamples cfw_from_distribution(const WorkDistribution& d, const std::vector<double>& u_grid,
                                 bool unwrap = true);

/// tr[U^dag exp(i u H_f) U exp(-(i u + beta) H_i)] / Z_i for complex u,
/// built from matrix exponentials in the computational basis (the transition
/// kernel is never formed). u = i beta gives Z_f / Z_i.
Complex characteristic_trace(const ComplexMatrix& u_prop, const spectral::SpectralDecomposition& spec_i,
                             const spectral::SpectralDecomposition& spec_f, double beta, Complex u);

CfwSamples cfw_trace(const ComplexMatrix& u_prop, const spectral::SpectralDecomposition& spec_i,
                     const spectral::SpectralDecomposition& spec_f, double beta,
                     const std::vector<double>& u_grid, bool unwrap = true);

struct JarzynskiReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_deviation = 0.0;
};

/// lhs = sum p e^{-beta w}, rhs = exp(lnZ_f - lnZ_i).
JarzynskiReport jarzynski_check(const WorkDistribution& d, double ln_z_i, double ln_z_f, double beta);

double average_work(const WorkDistribution& d);

/// tr[rho_f H_f] - tr[rho_i H_i].
double lemma1_average(const spectral::DensityMatrix& rho_f, const OperatorMatrix& h_f,
                      const spectral::DensityMatrix& rho_i, const OperatorMatrix& h_i);

struct DeltaReport {
  double mean = 0.0;
  double variance = 0.0;
  double epsilon = 0.0;
  double mass_within_epsilon = 0.0;
  bool is_delta = false;
};

/// is_delta iff variance < epsilon^2 and the mass within epsilon of the mean
/// is at least 1 - 1e-10. A negative epsilon selects 1e-6 * energy_scale.
DeltaReport delta_concentration(const WorkDistribution& d, double epsilon = -1.0);

struct LinearityReport {
  double w0_fit = 0.0;            // slope of Im ln chi through the origin
  double max_abs_residual = 0.0;  // max |Im ln chi - w0 u|
  double max_abs_real = 0.0;      // max |Re ln chi|
  double max_abs_deviation = 0.0; // max |ln chi - i w0 u|
  double relative_residual = 0.0; // max_abs_residual / |w0 u_max|
};

/// Least-squares fit of ln chi to the non-interacting form i u w0.
LinearityReport corollary1_linearity(const CfwSamples& c);

/// Columns w, p.
void write_distribution_csv(std::ostream& out, const WorkDistribution& d);
/// Columns u, re_chi, im_chi, re_ln_chi, im_ln_chi.
void write_cfw_csv(std::ostream& out, const CfwSamples& c);

}  // namespace workstat::work
