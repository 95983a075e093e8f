#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "workstat/errors.hpp"
#include "workstat/spectral.hpp"
#include "workstat/spin_model.hpp"

using namespace workstat;
using namespace workstat::spectral;

namespace {

OperatorMatrix herm(const ComplexMatrix& m) { return OperatorMatrix(m, true); }

double max_abs(const ComplexMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("eigendecompose examples") {
  const auto id = eigendecompose(OperatorMatrix::identity(8));
  CHECK((id.eigenvalues.array() - 1.0).abs().maxCoeff() < 1e-14);

  RealVector diag(4);
  diag << 3.0, -1.0, 2.0, 0.5;
  const auto d = eigendecompose(OperatorMatrix::diagonal(diag));
  CHECK(d.eigenvalues(0) == -1.0);
  CHECK(d.eigenvalues(1) == 0.5);
  CHECK(d.eigenvalues(2) == 2.0);
  CHECK(d.eigenvalues(3) == 3.0);

  ComplexMatrix bad = ComplexMatrix::Zero(2, 2);
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(eigendecompose(OperatorMatrix(bad, false)), InvalidArgument);
  CHECK_THROWS(OperatorMatrix(bad, true));
}

TEST_CASE("property: decomposition invariants on random Hermitian matrices") {
  oracle::Gen gen(0x5eed02);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = Index(1) << gen.integer(0, 5);
    const ComplexMatrix h = gen.hermitian(d);
    const auto spec = eigendecompose(herm(h));
    const ComplexMatrix& v = spec.eigenvectors;
    CHECK(max_abs(v * spec.eigenvalues.cast<Complex>().asDiagonal() * v.adjoint() - h) < 1e-10 * h.norm());
    CHECK(max_abs(v.adjoint() * v - ComplexMatrix::Identity(d, d)) < 1e-10);
    for (Index i = 1; i < d; ++i) CHECK(spec.eigenvalues(i - 1) <= spec.eigenvalues(i));
  }
}

TEST_CASE("gibbs_state") {
  const auto spec = eigendecompose(spin::build_hopping({2, 2.0}));
  const auto p = boltzmann_weights(spec, 1.0);
  const double z = std::exp(2.0) + 2.0 + std::exp(-2.0);
  CHECK(p(0) == doctest::Approx(std::exp(2.0) / z).epsilon(1e-14));
  CHECK(p(1) == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(p(2) == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(p(3) == doctest::Approx(std::exp(-2.0) / z).epsilon(1e-14));

  // ground-state projector at large beta
  const auto h = spin::assemble(spin::build_hopping({2, 2.0}), spin::build_zz({2, 2.0}), 0.1);
  const auto hs = eigendecompose(h);
  const ComplexVector g = hs.eigenvectors.col(0);
  const DensityMatrix proj(g * g.adjoint());
  CHECK(uhlmann_fidelity(gibbs_state(hs, 200.0), proj) > 1.0 - 1e-8);

  // H = 0 at any beta: maximally mixed
  const auto zero = eigendecompose(OperatorMatrix::zero(8));
  for (double beta : {0.1, 1.0, 50.0}) {
    CHECK(max_abs(gibbs_state(zero, beta).matrix() - ComplexMatrix::Identity(8, 8) / 8.0) < 1e-15);
  }
  CHECK_THROWS_AS(gibbs_state(zero, 0.0), InvalidArgument);
  CHECK_THROWS_AS(gibbs_state(zero, -1.0), InvalidArgument);
  CHECK_THROWS_AS(gibbs_state(zero, std::nan("")), InvalidArgument);

  // against exp(-beta H) / Z
  const auto rho = gibbs_state(hs, 0.7);
  CHECK(max_abs(rho.matrix() - oracle::gibbs(h.matrix(), 0.7)) < 1e-13);
}

TEST_CASE("Boltzmann weights stay finite at large beta") {
  RealVector diag(4);
  diag << -1e4, 0.0, 1e4, 2e4;
  const auto spec = eigendecompose(OperatorMatrix::diagonal(diag));
  const auto p = boltzmann_weights(spec, 10.0);
  CHECK(p(0) == 1.0);
  CHECK(p(2) == 0.0);
  CHECK(std::isfinite(log_partition_function(spec, 10.0)));
  CHECK(log_partition_function(spec, 10.0) == doctest::Approx(1e5));
}

TEST_CASE("property: Gibbs populations decrease with energy") {
  oracle::Gen gen(0x5eed03);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = eigendecompose(herm(gen.hermitian(Index(1) << gen.integer(1, 5))));
    const auto p = boltzmann_weights(spec, gen.log_uniform(0.01, 20.0));
    for (Index i = 1; i < p.size(); ++i) CHECK(p(i) <= p(i - 1));
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("log_partition_function") {
  const auto zero = eigendecompose(OperatorMatrix::zero(16));
  CHECK(log_partition_function(zero, 1.0) == doctest::Approx(std::log(16.0)).epsilon(1e-15));
  CHECK(log_partition_function(zero, 2.0) == doctest::Approx(std::log(16.0)).epsilon(1e-15));
  const auto spec = eigendecompose(spin::build_hopping({2, 2.0}));
  CHECK(log_partition_function(spec, 1.0) ==
        doctest::Approx(std::log(std::exp(2.0) + 2.0 + std::exp(-2.0))).epsilon(1e-14));
  const auto h = spin::assemble(spin::build_hopping({4, 2.0}), spin::build_zz({4, 2.0}), 0.3);
  CHECK(log_partition_function(eigendecompose(h), 0.8) == doctest::Approx(oracle::log_z(h.matrix(), 0.8)).epsilon(1e-12));
}

TEST_CASE("matrix_function") {
  const auto h = spin::assemble(spin::build_hopping({3, 2.0}), spin::build_zz({3, 2.0}), 0.4);
  const auto spec = eigendecompose(h);
  const auto same = matrix_function(spec, [](double x) { return Complex(x, 0.0); });
  CHECK(same.hermitian());
  CHECK(max_abs(same.matrix() - h.matrix()) < 1e-12);
  const auto one = matrix_function(spec, [](double x) { return std::exp(Complex(0.0, -x * 0.0)); });
  CHECK(max_abs(one.matrix() - ComplexMatrix::Identity(8, 8)) < 1e-12);
  const double beta = 1.3;
  const auto boltz = matrix_function(spec, [&](double x) { return Complex(std::exp(-beta * x), 0.0); });
  CHECK(std::log(boltz.trace().real()) == doctest::Approx(log_partition_function(spec, beta)).epsilon(1e-12));
  const auto u = matrix_function(spec, [](double x) { return std::exp(Complex(0.0, -0.9 * x)); });
  CHECK_FALSE(u.hermitian());
  CHECK(unitarity_defect(u.matrix()) < 1e-10);
  CHECK(max_abs(u.matrix() - oracle::expm(Complex(0.0, -0.9) * h.matrix())) < 1e-12);
  CHECK_THROWS_AS(matrix_function(spec, [](double x) { return Complex(std::exp(1e4 * x), 0.0); }), NumericalError);
}

TEST_CASE("thermal_expectation") {
  const auto h0 = spin::build_hopping({2, 2.0});
  const auto h1 = spin::build_zz({2, 2.0});
  const auto spec = eigendecompose(h0);
  CHECK(thermal_expectation(spec, 1.0, OperatorMatrix::identity(4)) == doctest::Approx(1.0).epsilon(1e-14));
  const double brute = (oracle::gibbs(oracle::hopping(2, 2.0), 1.0) * oracle::zz(2, 2.0)).trace().real();
  CHECK(thermal_expectation(spec, 1.0, h1) == doctest::Approx(brute).epsilon(1e-12));
  CHECK_THROWS_AS(thermal_expectation(spec, 1.0, OperatorMatrix::identity(8)), InvalidArgument);
}

TEST_CASE("property: <H> = -d lnZ / d beta") {
  oracle::Gen gen(0x5eed04);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = gen.integer(2, 6);
    const auto h = spin::assemble(spin::build_hopping({n, gen.uniform(0.5, 3.0)}), spin::build_zz({n, 2.0}),
                                  gen.uniform(-1.0, 1.0));
    const auto spec = eigendecompose(h);
    const double beta = gen.uniform(0.2, 3.0);
    const double step = 1e-5;
    const double fd =
        -(log_partition_function(spec, beta + step) - log_partition_function(spec, beta - step)) / (2.0 * step);
    const double e = thermal_expectation(spec, beta, h);
    CHECK(std::abs(fd - e) <= 1e-6 * std::max(1.0, std::abs(e)));
  }
}

TEST_CASE("density matrix validation") {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = 0.6;
  m(1, 1) = 0.5;
  CHECK_THROWS_AS(DensityMatrix{m}, NumericalError);
  m(0, 0) = 1.2;
  m(1, 1) = -0.2;
  CHECK_THROWS_AS(DensityMatrix{m}, NumericalError);
  m(0, 0) = 0.5;
  m(1, 1) = 0.5;
  CHECK(DensityMatrix(m).purity() == doctest::Approx(0.5));
  CHECK(DensityMatrix::maximally_mixed(4).purity() == doctest::Approx(0.25));
}

TEST_CASE("uhlmann_fidelity examples") {
  const auto rho = DensityMatrix::maximally_mixed(4);
  CHECK(uhlmann_fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-14));

  ComplexMatrix a = ComplexMatrix::Zero(2, 2), b = ComplexMatrix::Zero(2, 2);
  a(0, 0) = 1.0;
  b(1, 1) = 1.0;
  CHECK(std::abs(uhlmann_fidelity(DensityMatrix(a), DensityMatrix(b))) < 1e-14);

  a(0, 0) = 0.7;
  a(1, 1) = 0.3;
  b(0, 0) = 0.5;
  b(1, 1) = 0.5;
  const double expected = std::pow(std::sqrt(0.35) + std::sqrt(0.15), 2);
  CHECK(uhlmann_fidelity(DensityMatrix(a), DensityMatrix(b)) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("property: fidelity symmetry, bounds, unitary invariance and the oracle") {
  oracle::Gen gen(0x5eed05);
  for (int trial = 0; trial < 25; ++trial) {
    const Index d = Index(1) << gen.integer(1, 4);
    const DensityMatrix rho(gen.density(d));
    const DensityMatrix sigma(gen.density(d));
    const double f = uhlmann_fidelity(rho, sigma);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0 + 1e-12);
    CHECK(std::abs(f - uhlmann_fidelity(sigma, rho)) < 1e-10);
    CHECK(std::abs(f - oracle::fidelity(rho.matrix(), sigma.matrix())) < 1e-10);
    const ComplexMatrix u = gen.unitary(d);
    const DensityMatrix r2 = DensityMatrix::trusted(u * rho.matrix() * u.adjoint());
    const DensityMatrix s2 = DensityMatrix::trusted(u * sigma.matrix() * u.adjoint());
    CHECK(std::abs(f - uhlmann_fidelity(r2, s2)) < 1e-10);
  }
}

TEST_CASE("property: a unitary commuting with rho leaves the fidelity at 1") {
  oracle::Gen gen(0x5eed06);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = Index(1) << gen.integer(1, 4);
    const auto h = herm(gen.hermitian(d));
    const auto spec = eigendecompose(h);
    const auto rho = gibbs_state(spec, gen.uniform(0.1, 3.0));
    const double t = gen.uniform(0.0, 10.0);
    const auto u = matrix_function(spec, [&](double x) { return std::exp(Complex(0.0, -t * x)); });
    const auto rho_t = DensityMatrix::trusted(u.matrix() * rho.matrix() * u.matrix().adjoint());
    CHECK(uhlmann_fidelity(rho, rho_t) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("fidelity from Gibbs square roots matches the dense route") {
  const auto h0 = spin::build_hopping({4, 2.0});
  const auto h = spin::assemble(h0, spin::build_zz({4, 2.0}), 0.2);
  const auto si = eigendecompose(h0), sf = eigendecompose(h);
  const double fast = fidelity_from_square_roots(gibbs_square_root(si, 1.0), gibbs_square_root(sf, 1.0));
  CHECK(fast == doctest::Approx(uhlmann_fidelity(gibbs_state(si, 1.0), gibbs_state(sf, 1.0))).epsilon(1e-12));
}

TEST_CASE("infidelity conventions") {
  CHECK(infidelity_from_fidelity(0.81, FidelityConvention::one_minus_F) == doctest::Approx(0.19));
  CHECK(infidelity_from_fidelity(0.81, FidelityConvention::one_minus_sqrtF) == doctest::Approx(0.1));
  CHECK(infidelity_from_fidelity(1.0 + 1e-15, FidelityConvention::one_minus_F) == 0.0);
  CHECK(infidelity_from_fidelity(-1e-15, FidelityConvention::one_minus_F) == 1.0);
}
