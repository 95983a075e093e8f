#include "workstat/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/SVD>

#include "workstat/errors.hpp"
#include "workstat/numeric_format.hpp"

namespace workstat::spectral {
namespace {

constexpr double kTraceTolerance = 1e-12;
constexpr double kNegativityTolerance = 1e-12;

void check_beta(double beta, bool allow_zero) {
  if (!std::isfinite(beta) || beta < 0.0 || (!allow_zero && beta == 0.0)) {
    throw InvalidArgument("beta must be finite and " + std::string(allow_zero ? ">= 0" : "> 0") +
                          ", got " + std::to_string(beta));
  }
}

ComplexMatrix hermitize(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

// Eigen-based square root with the small-negativity clip.
ComplexMatrix psd_square_root(const ComplexMatrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(hermitize(m));
  if (solver.info() != Eigen::Success) throw NumericalError("eigensolver failed on density matrix");
  RealVector ev = solver.eigenvalues();
  if (ev.minCoeff() < -kNegativityTolerance) {
    throw NumericalError(std::string(what) + " is not positive semidefinite (eigenvalue " +
                         std::to_string(ev.minCoeff()) + ")");
  }
  const RealVector roots = ev.cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.cast<Complex>().asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace

DensityMatrix::DensityMatrix(ComplexMatrix entries, TrustedTag) : m_(std::move(entries)) {
  if (m_.rows() != m_.cols() || !is_power_of_two(m_.rows())) {
    throw InvalidArgument("density matrix must be square with power-of-two dimension");
  }
  if (!m_.allFinite()) throw NumericalError("density matrix has non-finite entries");
  const double defect = hermiticity_defect(m_);
  if (defect > 1e-10 * std::max(1.0, m_.norm())) {
    throw NumericalError("density matrix is not Hermitian (defect " + std::to_string(defect) + ")");
  }
  m_ = hermitize(m_);
  const double tr = m_.trace().real();
  if (std::abs(tr - 1.0) > kTraceTolerance) {
    throw NumericalError("density matrix trace is " + format_double(tr) + ", expected 1");
  }
}

DensityMatrix::DensityMatrix(ComplexMatrix entries) : DensityMatrix(std::move(entries), TrustedTag{}) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(m_, Eigen::EigenvaluesOnly);
  const double min_ev = solver.eigenvalues().minCoeff();
  if (min_ev < -kNegativityTolerance) {
    throw NumericalError("density matrix has negative eigenvalue " + std::to_string(min_ev));
  }
}

DensityMatrix DensityMatrix::trusted(ComplexMatrix entries) {
  return DensityMatrix(std::move(entries), TrustedTag{});
}

DensityMatrix DensityMatrix::maximally_mixed(Index dimension) {
  return trusted(ComplexMatrix::Identity(dimension, dimension) / static_cast<double>(dimension));
}

double DensityMatrix::purity() const { return (m_ * m_).trace().real(); }

SpectralDecomposition eigendecompose(const OperatorMatrix& h) {
  if (!h.hermitian()) throw InvalidArgument("eigendecompose: operator is not flagged Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h.matrix());
  if (solver.info() != Eigen::Success) throw NumericalError("eigendecompose: eigensolver failed");
  return SpectralDecomposition{solver.eigenvalues(), solver.eigenvectors()};
}

SpectralDecomposition eigendecompose_blocked(const OperatorMatrix& h, const spin::SectorList& sectors) {
  if (!h.hermitian()) throw InvalidArgument("eigendecompose_blocked: operator is not flagged Hermitian");
  if (!spin::is_block_diagonal(h.matrix(), sectors)) {
    throw InvalidArgument("eigendecompose_blocked: operator couples magnetization sectors");
  }
  const Index dim = h.dimension();
  struct Column {
    double energy;
    std::size_t sector;
    Index local;
  };
  std::vector<Column> columns;
  columns.reserve(static_cast<std::size_t>(dim));
  std::vector<Eigen::SelfAdjointEigenSolver<ComplexMatrix>> solvers(sectors.size());
  for (std::size_t s = 0; s < sectors.size(); ++s) {
    const auto& idx = sectors[s];
    const auto n = static_cast<Index>(idx.size());
    ComplexMatrix block(n, n);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) block(i, j) = h(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    solvers[s].compute(block);
    if (solvers[s].info() != Eigen::Success) throw NumericalError("eigendecompose_blocked: eigensolver failed");
    for (Index k = 0; k < n; ++k) columns.push_back({solvers[s].eigenvalues()(k), s, k});
  }
  std::stable_sort(columns.begin(), columns.end(),
                   [](const Column& a, const Column& b) { return a.energy < b.energy; });
  SpectralDecomposition out{RealVector(dim), ComplexMatrix::Zero(dim, dim)};
  for (Index c = 0; c < dim; ++c) {
    const Column& col = columns[static_cast<std::size_t>(c)];
    out.eigenvalues(c) = col.energy;
    const auto& idx = sectors[col.sector];
    const auto& vecs = solvers[col.sector].eigenvectors();
    for (std::size_t i = 0; i < idx.size(); ++i) out.eigenvectors(idx[i], c) = vecs(static_cast<Index>(i), col.local);
  }
  return out;
}

ComplexMatrix reconstruct(const SpectralDecomposition& spec, const ComplexVector& values) {
  return spec.eigenvectors * values.asDiagonal() * spec.eigenvectors.adjoint();
}

RealVector boltzmann_weights(const SpectralDecomposition& spec, double beta) {
  check_beta(beta, true);
  RealVector w = (-beta * (spec.eigenvalues.array() - spec.min_energy())).exp();
  return w / w.sum();
}

DensityMatrix gibbs_state(const SpectralDecomposition& spec, double beta) {
  check_beta(beta, false);
  const RealVector p = boltzmann_weights(spec, beta);
  return DensityMatrix::trusted(hermitize(reconstruct(spec, p.cast<Complex>())));
}

double log_partition_function(const SpectralDecomposition& spec, double beta) {
  check_beta(beta, false);
  const double e_min = spec.min_energy();
  const double shifted = (-beta * (spec.eigenvalues.array() - e_min)).exp().sum();
  return -beta * e_min + std::log(shifted);
}

OperatorMatrix matrix_function(const SpectralDecomposition& spec, const std::function<Complex(double)>& f) {
  ComplexVector values(spec.dimension());
  bool real_valued = true;
  for (Index i = 0; i < values.size(); ++i) {
    values(i) = f(spec.eigenvalues(i));
    if (!std::isfinite(values(i).real()) || !std::isfinite(values(i).imag())) {
      throw NumericalError("matrix_function: f is not finite at eigenvalue " +
                           std::to_string(spec.eigenvalues(i)));
    }
    real_valued = real_valued && values(i).imag() == 0.0;
  }
  ComplexMatrix m = reconstruct(spec, values);
  if (real_valued) m = hermitize(m);
  return OperatorMatrix(std::move(m), real_valued);
}

double thermal_expectation(const SpectralDecomposition& h_spec, double beta, const OperatorMatrix& a) {
  if (a.dimension() != h_spec.dimension()) {
    throw InvalidArgument("thermal_expectation: dimension mismatch");
  }
  const RealVector p = boltzmann_weights(h_spec, beta);
  // sum_n p_n <n|a|n>
  const ComplexMatrix av = a.matrix() * h_spec.eigenvectors;
  double total = 0.0;
  for (Index n = 0; n < p.size(); ++n) {
    total += p(n) * h_spec.eigenvectors.col(n).dot(av.col(n)).real();
  }
  return total;
}

double expectation(const DensityMatrix& rho, const OperatorMatrix& a) {
  if (a.dimension() != rho.dimension()) throw InvalidArgument("expectation: dimension mismatch");
  return (rho.matrix().cwiseProduct(a.matrix().transpose())).sum().real();
}

double uhlmann_fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.dimension() != sigma.dimension()) throw InvalidArgument("uhlmann_fidelity: dimension mismatch");
  return fidelity_from_square_roots(psd_square_root(rho.matrix(), "rho"),
                                    psd_square_root(sigma.matrix(), "sigma"));
}

double fidelity_from_square_roots(const ComplexMatrix& sqrt_rho, const ComplexMatrix& sqrt_sigma) {
  if (sqrt_rho.rows() != sqrt_sigma.rows() || sqrt_rho.cols() != sqrt_sigma.cols()) {
    throw InvalidArgument("fidelity_from_square_roots: dimension mismatch");
  }
  // tr sqrt(sqrt(rho) sigma sqrt(rho)) is the trace norm of sqrt(rho) sqrt(sigma);
  // summing singular values keeps the small contributions accurate, where
  // square roots of noisy near-zero eigenvalues would not.
  Eigen::BDCSVD<ComplexMatrix> svd(sqrt_rho * sqrt_sigma);
  const double root = svd.singularValues().sum();
  return std::clamp(root * root, 0.0, 1.0);
}

ComplexMatrix gibbs_square_root(const SpectralDecomposition& spec, double beta) {
  check_beta(beta, false);
  const RealVector p = boltzmann_weights(spec, beta);
  return reconstruct(spec, p.cwiseSqrt().cast<Complex>());
}

double infidelity(const DensityMatrix& rho, const DensityMatrix& sigma, FidelityConvention convention) {
  return infidelity_from_fidelity(uhlmann_fidelity(rho, sigma), convention);
}

double infidelity_from_fidelity(double fidelity, FidelityConvention convention) {
  const double value =
      convention == FidelityConvention::one_minus_F ? 1.0 - fidelity : 1.0 - std::sqrt(fidelity);
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace workstat::spectral
