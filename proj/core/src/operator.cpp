#include "workstat/operator.hpp"

#include <string>

#include "workstat/errors.hpp"

namespace workstat {

OperatorMatrix::OperatorMatrix(ComplexMatrix entries, bool hermitian)
    : m_(std::move(entries)), hermitian_(hermitian) {
  if (m_.rows() != m_.cols()) {
    throw InvalidArgument("operator matrix must be square, got " + std::to_string(m_.rows()) +
                          "x" + std::to_string(m_.cols()));
  }
  if (!is_power_of_two(m_.rows())) {
    throw InvalidArgument("operator dimension " + std::to_string(m_.rows()) +
                          " is not a power of two");
  }
  if (!m_.allFinite()) {
    throw NumericalError("operator matrix has non-finite entries");
  }
  if (hermitian_) {
    const double defect = hermiticity_defect(m_);
    if (defect > 1e-12 * m_.norm()) {
      throw InvalidArgument("operator flagged Hermitian deviates by " + std::to_string(defect));
    }
  }
}

OperatorMatrix OperatorMatrix::zero(Index dimension) {
  return OperatorMatrix(ComplexMatrix::Zero(dimension, dimension), true);
}

OperatorMatrix OperatorMatrix::identity(Index dimension) {
  return OperatorMatrix(ComplexMatrix::Identity(dimension, dimension), true);
}

OperatorMatrix OperatorMatrix::diagonal(const RealVector& entries) {
  ComplexMatrix m = ComplexMatrix::Zero(entries.size(), entries.size());
  m.diagonal() = entries.cast<Complex>();
  return OperatorMatrix(std::move(m), true);
}

bool OperatorMatrix::is_diagonal() const {
  for (Index j = 0; j < m_.cols(); ++j) {
    for (Index i = 0; i < m_.rows(); ++i) {
      if (i != j && m_(i, j) != Complex(0.0, 0.0)) return false;
    }
  }
  return true;
}

bool is_power_of_two(Index n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

int sites_for_dimension(Index dimension) {
  if (!is_power_of_two(dimension)) {
    throw InvalidArgument("dimension " + std::to_string(dimension) + " is not a power of two");
  }
  int sites = 0;
  while ((Index{1} << sites) < dimension) ++sites;
  return sites;
}

double hermiticity_defect(const ComplexMatrix& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

double commutator_norm(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a * b - b * a).norm();
}

double unitarity_defect(const ComplexMatrix& u) {
  return (u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols())).norm();
}

}  // namespace workstat
