#pragma once

#include <complex>

#include <Eigen/Dense>

namespace workstat {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Dense operator on a 2^N-dimensional spin Hilbert space.
///
/// Hermitian operators are checked at construction: the largest elementwise
/// deviation |H - H^dagger| must stay below 1e-12 * ||H||_F. Propagators and
/// other non-Hermitian operators carry hermitian() == false.
class OperatorMatrix {
 public:
  OperatorMatrix() = default;
  OperatorMatrix(ComplexMatrix entries, bool hermitian);

  static OperatorMatrix zero(Index dimension);
  static OperatorMatrix identity(Index dimension);
  static OperatorMatrix diagonal(const RealVector& entries);

  Index dimension() const noexcept { return m_.rows(); }
  bool hermitian() const noexcept { return hermitian_; }
  const ComplexMatrix& matrix() const noexcept { return m_; }
  Complex operator()(Index row, Index col) const { return m_(row, col); }

  /// True when every off-diagonal entry is exactly zero.
  bool is_diagonal() const;
  double frobenius_norm() const { return m_.norm(); }
  Complex trace() const { return m_.trace(); }

 private:
  ComplexMatrix m_;
  bool hermitian_ = false;
};

bool is_power_of_two(Index n) noexcept;

/// Number of sites N for a 2^N-dimensional space; throws if not a power of two.
int sites_for_dimension(Index dimension);

/// max_ij |A_ij - conj(A_ji)|
double hermiticity_defect(const ComplexMatrix& a);

/// Frobenius norm of [A, B].
double commutator_norm(const ComplexMatrix& a, const ComplexMatrix& b);

/// Frobenius norm of U^dagger U - I. An upper bound on the spectral-norm defect.
double unitarity_defect(const ComplexMatrix& u);

}  // namespace workstat
