#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "oracle.hpp"
#include "workstat/drive.hpp"
#include "workstat/errors.hpp"
#include "workstat/perturbative.hpp"
#include "workstat/spectral.hpp"
#include "workstat/spin_model.hpp"

using namespace workstat;
using namespace workstat::pert;

namespace {

struct Setup {
  OperatorMatrix h0, h1;
  spectral::SpectralDecomposition spec;
  Setup(int n, double j) : h0(spin::build_hopping({n, j})), h1(spin::build_zz({n, j})), spec(spectral::eigendecompose(h0)) {}
};

const Complex kI{0.0, 1.0};

// Closed-form second order over the atoms with |omega| >= floor:
// i u l <H1> + i u l^2 sum g / w + sum g (1 - e^{i w u}) A(w) / w^2
std::vector<Complex> second_order_direct(const SpectralMeasure2& m, const drive::DriveProtocol& p, double first,
                                         double lambda, const std::vector<double>& grid, double floor) {
  std::vector<Complex> out;
  for (double u : grid) {
    Complex acc = kI * u * lambda * first;
    for (const auto& a : m.atoms) {
      if (std::abs(a.omega) < floor) continue;
      const double w = a.omega;
      acc += kI * u * lambda * lambda * a.weight / w;
      acc += a.weight * (1.0 - std::exp(kI * w * u)) * drive::spectral_response(p, w) / (w * w);
    }
    out.push_back(acc);
  }
  return out;
}

// third-order coefficient from a direct triple sum with the cumulant subtractions
Complex third_order_direct(const oracle::Mat& h0, const oracle::Mat& h1, double beta, double lambda, double floor) {
  Eigen::SelfAdjointEigenSolver<oracle::Mat> es(h0);
  const auto& e = es.eigenvalues();
  const oracle::Mat b = es.eigenvectors().adjoint() * h1 * es.eigenvectors();
  const Eigen::Index d = e.size();
  std::vector<double> p(d);
  double z = 0.0;
  for (Eigen::Index n = 0; n < d; ++n) z += (p[n] = std::exp(-beta * (e(n) - e(0))));
  double mean = 0.0;
  for (Eigen::Index n = 0; n < d; ++n) {
    p[n] /= z;
    mean += p[n] * b(n, n).real();
  }
  Complex sum = 0.0;
  auto add = [&](double w1, double w2, Complex g) {
    if (std::abs(w1) < floor || std::abs(w1 + w2) < floor) return;
    sum += g / (w1 * (w1 + w2));
  };
  for (Eigen::Index n = 0; n < d; ++n)
    for (Eigen::Index m = 0; m < d; ++m) {
      for (Eigen::Index k = 0; k < d; ++k) add(e(m) - e(n), e(k) - e(m), kI * p[n] * b(n, m) * b(m, k) * b(k, n));
      const Complex c = -kI * mean * p[n] * std::norm(b(n, m));
      const double w = e(m) - e(n);
      add(w, -w, c);
      add(w, 0.0, c);
      add(0.0, w, c);
    }
  add(0.0, 0.0, 2.0 * kI * mean * mean * mean);
  return lambda * lambda * lambda * sum;
}

}  // namespace

TEST_CASE("first_cumulant") {
  const Setup s(2, 2.0);
  const double brute = (oracle::gibbs(oracle::hopping(2, 2.0), 1.0) * oracle::zz(2, 2.0)).trace().real();
  CHECK(first_cumulant(s.spec, s.h1, 1.0) == doctest::Approx(brute).epsilon(1e-12));
  CHECK(std::abs(first_cumulant(s.spec, s.h1, 0.0)) < 1e-15);
  CHECK(first_cumulant(s.spec, OperatorMatrix(2.5 * ComplexMatrix::Identity(4, 4), true), 1.0) ==
        doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("two-point measure against the time-domain correlator") {
  for (int n : {2, 3, 4}) {
    const Setup s(n, 2.0);
    for (double beta : {0.5, 1.0, 2.0}) {
      const auto m = two_point_measure(s.spec, s.h1, beta);
      for (double t : {0.0, 0.3, 1.7, -2.2}) {
        const Complex ref = oracle::two_point_correlator(s.h0.matrix(), s.h1.matrix(), beta, t);
        CHECK(std::abs(m.inverse_transform(t) - ref) < 1e-10);
      }
      const double mean = first_cumulant(s.spec, s.h1, beta);
      const double second = (oracle::gibbs(s.h0.matrix(), beta) * s.h1.matrix() * s.h1.matrix()).trace().real();
      CHECK(m.total_weight() == doctest::Approx(-(second - mean * mean)).epsilon(1e-10));
      for (std::size_t k = 1; k < m.atoms.size(); ++k) CHECK(m.atoms[k].omega > m.atoms[k - 1].omega + 1e-12);
    }
  }
}

TEST_CASE("two-point measure of N = 2 against the brute-force pair sum") {
  const Setup s(2, 2.0);
  const auto m = two_point_measure(s.spec, s.h1, 1.0);
  Eigen::SelfAdjointEigenSolver<oracle::Mat> es(oracle::hopping(2, 2.0));
  const oracle::Mat b = es.eigenvectors().adjoint() * oracle::zz(2, 2.0) * es.eigenvectors();
  const auto& e = es.eigenvalues();
  double z = 0.0;
  for (int i = 0; i < 4; ++i) z += std::exp(-e(i));
  std::vector<oracle::Atom> atoms;
  double mean = 0.0;
  for (int i = 0; i < 4; ++i) mean += std::exp(-e(i)) / z * b(i, i).real();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) atoms.push_back({e(j) - e(i), -std::exp(-e(i)) / z * std::norm(b(i, j))});
  atoms.push_back({0.0, mean * mean});
  // the merge here is by frequency only, so weight-zero atoms stay
  const auto ref = oracle::merge(atoms, 1e-12);
  std::map<long, double> lib, want;
  for (const auto& a : m.atoms) lib[std::lround(a.omega * 1e6)] += a.weight;
  for (const auto& a : ref) want[std::lround(a.w * 1e6)] += a.p;
  for (const auto& [key, w] : want) CHECK(std::abs(lib[key] - w) < 1e-10);
  for (const auto& [key, w] : lib) CHECK(std::abs(want[key] - w) < 1e-10);
}

TEST_CASE("two-point measure detailed balance") {
  for (int n : {3, 4, 5}) {
    const Setup s(n, 1.5);
    const double beta = 0.8;
    const auto m = two_point_measure(s.spec, s.h1, beta);
    for (const auto& a : m.atoms) {
      if (a.omega <= 1e-9 || std::abs(a.weight) < 1e-14) continue;
      const auto partner = std::find_if(m.atoms.begin(), m.atoms.end(),
                                        [&](const SpectralAtom2& b) { return std::abs(b.omega + a.omega) < 1e-10; });
      REQUIRE(partner != m.atoms.end());
      CHECK(partner->weight / a.weight == doctest::Approx(std::exp(-beta * a.omega)).epsilon(1e-9));
    }
  }
}

TEST_CASE("two-point measure of an operator commuting with H0") {
  const Setup s(3, 2.0);
  const OperatorMatrix f(s.h0.matrix() * s.h0.matrix(), true);
  const auto m = two_point_measure(s.spec, f, 1.0);
  double off = 0.0;
  for (const auto& a : m.atoms) if (std::abs(a.omega) > 1e-12) off += std::abs(a.weight);
  CHECK(off < 1e-12);
}

TEST_CASE("three-point measure against the time-domain third cumulant") {
  for (int n : {2, 3}) {
    const Setup s(n, 2.0);
    for (double beta : {0.5, 1.0}) {
      const auto m = three_point_measure(s.spec, s.h1, beta);
      for (auto [t1, t2] : {std::pair{0.0, 0.0}, std::pair{0.4, -0.9}, std::pair{1.3, 0.2}, std::pair{-0.7, 2.1}}) {
        const Complex ref = oracle::three_point_correlator(s.h0.matrix(), s.h1.matrix(), beta, t1, t2);
        CHECK(std::abs(m.inverse_transform(t1, t2) - ref) < 1e-10);
      }
      // (-i)^3 <(H1 - <H1>)^3>
      const ComplexMatrix c = s.h1.matrix() - first_cumulant(s.spec, s.h1, beta) * ComplexMatrix::Identity(1 << n, 1 << n);
      const Complex k3 = (oracle::gibbs(s.h0.matrix(), beta) * c * c * c).trace();
      CHECK(std::abs(m.total_weight() - kI * k3) < 1e-10);
    }
  }
}

TEST_CASE("three-point measure: constants have no connected part, weights are imaginary for a real chain") {
  const Setup s(3, 2.0);
  const auto constant = three_point_measure(s.spec, OperatorMatrix(1.7 * ComplexMatrix::Identity(8, 8), true), 1.0);
  for (const auto& a : constant.atoms) CHECK(std::abs(a.weight) < 1e-12);
  const auto m = three_point_measure(s.spec, s.h1, 1.0);
  double re = 0.0, im = 0.0;
  for (const auto& a : m.atoms) {
    re = std::max(re, std::abs(a.weight.real()));
    im = std::max(im, std::abs(a.weight.imag()));
  }
  // real H0, H1: B_nm B_mk B_kn is real
  CHECK(re < 1e-12);
  CHECK(im > 1e-6);
}

TEST_CASE("second order against the direct formula") {
  const Setup s(4, 2.0);
  const double beta = 1.0;
  const auto m = two_point_measure(s.spec, s.h1, beta);
  const double first = first_cumulant(s.spec, s.h1, beta);
  const auto grid = work::default_u_grid(beta, 41, 3.0);
  for (const auto& p : {drive::DriveProtocol::quench(0.1, 2.0), drive::DriveProtocol::ramp_hold(0.2, 0.1, 3.0),
                        drive::DriveProtocol::sampled({{0.0, 0.0}, {0.5, 0.2}, {1.0, 0.1}})}) {
    const double lam = p.lambda_end();
    SecondOrderOptions excl;
    excl.zero_mode = ZeroModePolicy::exclude;
    const auto r = lnchi_second_order(m, p, first, lam, grid, excl);
    const auto reg = lnchi_second_order(m, p, first, lam, grid);
    const auto ref = second_order_direct(m, p, first, lam, grid, r.omega_floor);
    double zero_weight = 0.0;
    for (const auto& a : m.atoms) if (std::abs(a.omega) < r.omega_floor) zero_weight += a.weight;
    CHECK(r.dropped_weight > 0.0);
    CHECK(r.degeneracy_warning);
    CHECK(reg.dropped_weight == 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      CHECK(std::abs(r.samples.ln_chi[k] - ref[k]) < 1e-12);
      const Complex zm = 0.5 * lam * lam * grid[k] * grid[k] * zero_weight;
      CHECK(std::abs(reg.samples.ln_chi[k] - ref[k] - zm) < 1e-12);
      CHECK(std::abs(reg.first_order[k] + reg.adiabatic_term[k] + reg.response_term[k] + reg.zero_mode_term[k] -
                     reg.samples.ln_chi[k]) < 1e-12);
    }
  }
}

TEST_CASE("second order vanishes at zero coupling") {
  const Setup s(3, 2.0);
  const auto m = two_point_measure(s.spec, s.h1, 1.0);
  const auto grid = work::default_u_grid(1.0);
  const auto r = lnchi_second_order(m, drive::DriveProtocol::quench(0.0, 1.0), 0.3, 0.0, grid);
  for (const auto& v : r.samples.ln_chi) CHECK(std::abs(v) == 0.0);
  const auto q = lnchi_second_order_quadrature(s.spec, s.h1, 1.0, drive::DriveProtocol::quench(0.0, 1.0), 0.0, grid);
  for (const auto& v : q.ln_chi) CHECK(std::abs(v) < 1e-15);
  CHECK_THROWS_AS(lnchi_second_order(m, drive::DriveProtocol::quench(0.1, 1.0), 0.3, 0.2, grid), InvalidArgument);
}

TEST_CASE("spectral sums agree with the time-domain quadrature") {
  for (int n : {2, 3}) {
    const Setup s(n, 2.0);
    const double beta = 1.0;
    const auto m = two_point_measure(s.spec, s.h1, beta);
    const double first = first_cumulant(s.spec, s.h1, beta);
    const auto grid = work::default_u_grid(beta, 21, 5.0);
    for (const auto& p : {drive::DriveProtocol::quench(0.1, 2.0), drive::DriveProtocol::ramp_hold(0.3, 0.2, 1.5),
                          drive::DriveProtocol::sampled({{0.0, 0.0}, {0.4, 0.15}, {0.9, -0.05}})}) {
      const auto sum = lnchi_second_order(m, p, first, p.lambda_end(), grid);
      const auto quad = lnchi_second_order_quadrature(s.spec, s.h1, beta, p, p.lambda_end(), grid);
      for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(sum.samples.ln_chi[k] - quad.ln_chi[k]) < 1e-6);
    }
  }
}

TEST_CASE("second order is the small-coupling limit of the exact ln chi") {
  const Setup s(3, 2.0);
  const double beta = 1.0;
  const std::vector<double> grid{-3.0, 2.0, 5.0};
  const oracle::Mat h0 = oracle::hopping(3, 2.0), h1 = oracle::zz(3, 2.0);
  const oracle::Mat rho = oracle::gibbs(h0, beta);
  // ramp to 0.2 eps over 2/3, then hold to 1.5
  auto exact_log = [&](double eps) {
    const double lf = 0.2 * eps, tr = 2.0 / 3.0;
    oracle::Mat u = oracle::propagate_rk4(h0, h1, [&](double t) { return lf * t / tr; }, tr, 4000);
    u = oracle::expm(Complex(0.0, -(1.5 - tr)) * (h0 + lf * h1)) * u;
    std::vector<Complex> out;
    for (double v : grid) {
      const oracle::Mat k = u.adjoint() * oracle::expm(Complex(0.0, v) * (h0 + lf * h1)) * u *
                            oracle::expm(Complex(0.0, -v) * h0) * rho;
      out.push_back(std::log(k.trace()));
    }
    return out;
  };
  // even part in eps over eps^2, Richardson in eps^2
  auto even = [&](double eps) {
    const auto a = exact_log(eps), b = exact_log(-eps);
    std::vector<Complex> c;
    for (std::size_t k = 0; k < grid.size(); ++k) c.push_back((a[k] + b[k]) / (2.0 * eps * eps));
    return c;
  };
  const auto c1 = even(0.05), c2 = even(0.025);

  const auto p = drive::DriveProtocol::sampled({{0.0, 0.0}, {2.0 / 3.0, 0.2}, {1.5, 0.2}});
  const auto m = two_point_measure(s.spec, s.h1, beta);
  const double first = first_cumulant(s.spec, s.h1, beta);
  const auto sum = lnchi_second_order(m, p, first, 0.2, grid);
  const auto quad = lnchi_second_order_quadrature(s.spec, s.h1, beta, p, 0.2, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Complex limit = c2[k] + (c2[k] - c1[k]) / 3.0;
    const Complex linear = kI * grid[k] * 0.2 * first;
    CHECK(std::abs(sum.samples.ln_chi[k] - linear - limit) < 1e-5);
    CHECK(std::abs(quad.ln_chi[k] - linear - limit) < 1e-5);
  }
}

TEST_CASE("response term fades for slow ramps") {
  const Setup s(4, 2.0);
  const auto m = two_point_measure(s.spec, s.h1, 1.0);
  const double first = first_cumulant(s.spec, s.h1, 1.0);
  const auto grid = work::default_u_grid(1.0);
  auto largest = [&](double v) {
    const auto r = lnchi_second_order(m, drive::DriveProtocol::ramp_hold(v, 0.1, 0.1 / v), first, 0.1, grid);
    double out = 0.0;
    for (const auto& z : r.response_term) out = std::max(out, std::abs(z));
    return out;
  };
  const double a = largest(0.01), b = largest(0.001);
  CHECK(b < 0.02 * a);
  CHECK(b < 1e-7);
}

TEST_CASE("third order against the direct triple sum") {
  for (int n : {2, 3}) {
    const Setup s(n, 2.0);
    const auto m3 = three_point_measure(s.spec, s.h1, 1.0);
    const auto grid = work::default_u_grid(1.0, 11, 2.0);
    const auto r = lnchi_third_order_adiabatic(m3, 0.1, grid);
    const Complex ref = third_order_direct(s.h0.matrix(), s.h1.matrix(), 1.0, 0.1, r.omega_floor);
    CHECK(std::abs(r.coefficient - ref) < 1e-10 * std::max(1.0, std::abs(ref)));
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(r.samples.ln_chi[k] - grid[k] * r.coefficient) < 1e-15);
    const auto zero = lnchi_third_order_adiabatic(m3, 0.0, grid);
    for (const auto& v : zero.samples.ln_chi) CHECK(std::abs(v) == 0.0);
  }
}

TEST_CASE("measure CSV columns") {
  const Setup s(2, 2.0);
  std::ostringstream a, b;
  write_measure_csv(a, two_point_measure(s.spec, s.h1, 1.0));
  write_measure_csv(b, three_point_measure(s.spec, s.h1, 1.0));
  CHECK(a.str().rfind("omega,re_weight,im_weight\n", 0) == 0);
  CHECK(b.str().rfind("omega,omega2,re_weight,im_weight\n", 0) == 0);
}
