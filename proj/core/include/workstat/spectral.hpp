#pragma once

#include <functional>

#include "workstat/operator.hpp"
#include "workstat/spin_model.hpp"

namespace workstat::spectral {

/// Ascending eigenvalues and orthonormal eigenvector columns.
struct SpectralDecomposition {
  RealVector eigenvalues;
  ComplexMatrix eigenvectors;

  Index dimension() const noexcept { return eigenvalues.size(); }
  double min_energy() const { return eigenvalues(0); }
  double max_energy() const { return eigenvalues(eigenvalues.size() - 1); }
  double spectral_range() const { return max_energy() - min_energy(); }
};

/// Hermitian, unit-trace, positive semidefinite matrix.
class DensityMatrix {
 public:
  /// Validates Hermiticity, trace = 1 within 1e-12 and smallest eigenvalue
  /// >= -1e-12. Throws NumericalError otherwise.
  explicit DensityMatrix(ComplexMatrix entries);

  /// Skips the eigenvalue check; the caller guarantees positivity
  /// (Gibbs states, unitary images of valid states). Trace and
  /// Hermiticity are still enforced.
  static DensityMatrix trusted(ComplexMatrix entries);

  static DensityMatrix maximally_mixed(Index dimension);

  Index dimension() const noexcept { return m_.rows(); }
  const ComplexMatrix& matrix() const noexcept { return m_; }
  double purity() const;

 private:
  struct TrustedTag {};
  DensityMatrix(ComplexMatrix entries, TrustedTag);
  ComplexMatrix m_;
};

/// Throws InvalidArgument for non-Hermitian input.
SpectralDecomposition eigendecompose(const OperatorMatrix& h);

/// Same result as eigendecompose() but diagonalizes each magnetization sector
/// separately. `h` must not couple different sectors.
SpectralDecomposition eigendecompose_blocked(const OperatorMatrix& h, const spin::SectorList& sectors);

/// V diag(values) V^dagger
ComplexMatrix reconstruct(const SpectralDecomposition& spec, const ComplexVector& values);

/// Boltzmann populations exp(-beta (E_n - E_min)) / sum, beta >= 0.
RealVector boltzmann_weights(const SpectralDecomposition& spec, double beta);

DensityMatrix gibbs_state(const SpectralDecomposition& spec, double beta);

/// ln Z evaluated with the log-sum-exp shift by E_min.
double log_partition_function(const SpectralDecomposition& spec, double beta);

/// V f(Lambda) V^dagger. The result carries the Hermitian flag when f is real
/// on the whole spectrum. Throws NumericalError if f is not finite there.
OperatorMatrix matrix_function(const SpectralDecomposition& spec,
                               const std::function<Complex(double)>& f);

/// tr[rho_G a] for the Gibbs state of `h_spec` at inverse temperature beta
/// (beta = 0 gives the maximally mixed average).
double thermal_expectation(const SpectralDecomposition& h_spec, double beta, const OperatorMatrix& a);

/// tr[rho a], real part.
double expectation(const DensityMatrix& rho, const OperatorMatrix& a);

/// F = (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, the squared-trace Uhlmann fidelity.
double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);

/// Fidelity from precomputed square roots, (sum of singular values of
/// sqrt_rho * sqrt_sigma)^2. Lets callers that know exact populations avoid
/// re-diagonalizing the states.
double fidelity_from_square_roots(const ComplexMatrix& sqrt_rho, const ComplexMatrix& sqrt_sigma);

/// sqrt of the Gibbs state, built from exact Boltzmann populations.
ComplexMatrix gibbs_square_root(const SpectralDecomposition& spec, double beta);

enum class FidelityConvention { one_minus_F, one_minus_sqrtF };

/// 1 - F or 1 - sqrt(F), clipped to [0, 1].
double infidelity_from_fidelity(double fidelity, FidelityConvention convention);

/// 1 - F or 1 - sqrt(F) depending on the convention, clipped to [0, 1].
double infidelity(const DensityMatrix& rho, const DensityMatrix& sigma,
                  FidelityConvention convention = FidelityConvention::one_minus_F);

}  // namespace workstat::spectral
