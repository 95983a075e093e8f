#pragma once

// Brute-force reference constructions for the tests. Nothing here calls into
// the library's spectral or propagation code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using C = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXd;

inline Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
// basis (up, down): s+ takes down to up
inline Mat sigma_plus() {
  Mat m(2, 2);
  m << 0, 1, 0, 0;
  return m;
}
inline Mat sigma_minus() { return sigma_plus().adjoint(); }

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// a on site i, b on site i + 1, identity elsewhere; site 0 is the leftmost factor
inline Mat bond(int n, int i, const Mat& a, const Mat& b) {
  Mat out = Mat::Identity(1, 1);
  for (int s = 0; s < n; ++s) {
    if (s == i) out = kron(out, a);
    else if (s == i + 1) out = kron(out, b);
    else out = kron(out, Mat::Identity(2, 2));
  }
  return out;
}

inline Mat hopping(int n, double j) {
  const int d = 1 << n;
  Mat h = Mat::Zero(d, d);
  for (int i = 0; i + 1 < n; ++i) {
    h += bond(n, i, sigma_plus(), sigma_minus()) + bond(n, i, sigma_minus(), sigma_plus());
  }
  return j * h;
}

inline Mat zz(int n, double j) {
  const int d = 1 << n;
  Mat h = Mat::Zero(d, d);
  for (int i = 0; i + 1 < n; ++i) h += bond(n, i, pauli_z(), pauli_z());
  return j * h;
}

inline Mat magnetization(int n) {
  const int d = 1 << n;
  Mat m = Mat::Zero(d, d);
  for (int s = 0; s < n; ++s) {
    Mat t = Mat::Identity(1, 1);
    for (int k = 0; k < n; ++k) t = kron(t, k == s ? pauli_z() : Mat(Mat::Identity(2, 2)));
    m += t;
  }
  return m;
}

// exp(a) by scaling and squaring of a 30-term Taylor series
inline Mat expm(const Mat& a) {
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  double scale = 1.0;
  while (norm * scale > 0.25) {
    scale *= 0.5;
    ++squarings;
  }
  const Mat x = a * scale;
  Mat term = Mat::Identity(a.rows(), a.cols());
  Mat sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * x / static_cast<double>(k);
    sum += term;
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

inline Mat gibbs(const Mat& h, double beta) {
  const Mat e = expm(-beta * h);
  return e / e.trace().real();
}

inline double log_z(const Mat& h, double beta) { return std::log(expm(-beta * h).trace().real()); }

// PSD square root through the self-adjoint solver, negative noise clipped
inline Mat sqrtm_psd(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

inline double fidelity(const Mat& rho, const Mat& sigma) {
  const Mat s = sqrtm_psd(rho);
  Eigen::SelfAdjointEigenSolver<Mat> es(s * sigma * s);
  double tr = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) tr += std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  return tr * tr;
}

// classical RK4 on U' = -i H(t) U
inline Mat propagate_rk4(const Mat& h0, const Mat& h1, const std::function<double(double)>& lambda, double t_total,
                         int steps) {
  const Eigen::Index d = h0.rows();
  Mat u = Mat::Identity(d, d);
  const double h = t_total / steps;
  const C mi(0.0, -1.0);
  auto f = [&](double t, const Mat& y) -> Mat { return mi * ((h0 + lambda(t) * h1) * y); };
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const Mat k1 = f(t, u);
    const Mat k2 = f(t + 0.5 * h, u + 0.5 * h * k1);
    const Mat k3 = f(t + 0.5 * h, u + 0.5 * h * k2);
    const Mat k4 = f(t + h, u + h * k3);
    u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return u;
}

struct Atom {
  double w;
  double p;
};

// probability-weighted merge of sorted atoms closer than tol
inline std::vector<Atom> merge(std::vector<Atom> atoms, double tol) {
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.w < b.w; });
  std::vector<Atom> out;
  for (const Atom& a : atoms) {
    if (!out.empty() && a.w - out.back().w <= tol) {
      const double p = out.back().p + a.p;
      if (p > 0.0) out.back().w = (out.back().w * out.back().p + a.w * a.p) / p;
      out.back().p = p;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

// every (n, m) outcome of the two-point measurement
inline std::vector<Atom> tpm_atoms(const Mat& h_i, const Mat& h_f, const Mat& u, double beta) {
  Eigen::SelfAdjointEigenSolver<Mat> ei(h_i), ef(h_f);
  const Vec& e_i = ei.eigenvalues();
  const Vec& e_f = ef.eigenvalues();
  double z = 0.0;
  for (Eigen::Index n = 0; n < e_i.size(); ++n) z += std::exp(-beta * e_i(n));
  std::vector<Atom> atoms;
  for (Eigen::Index n = 0; n < e_i.size(); ++n) {
    const double pn = std::exp(-beta * e_i(n)) / z;
    for (Eigen::Index m = 0; m < e_f.size(); ++m) {
      const C amp = ef.eigenvectors().col(m).dot(u * ei.eigenvectors().col(n));
      atoms.push_back({e_f(m) - e_i(n), std::norm(amp) * pn});
    }
  }
  return atoms;
}

// H1 in the interaction picture of H0
inline Mat heisenberg(const Mat& h0, const Mat& h1, double s) {
  const Mat u = expm(C(0.0, s) * h0);
  return u * h1 * u.adjoint();
}

// (-i)^2 <H1(s) H1(0)>_c in the H0 Gibbs state
inline C two_point_correlator(const Mat& h0, const Mat& h1, double beta, double s) {
  const Mat rho = gibbs(h0, beta);
  const C mean = (rho * h1).trace();
  const C ab = (rho * heisenberg(h0, h1, s) * h1).trace();
  return -(ab - mean * mean);
}

// (-i)^3 <H1(s1) H1(s2) H1(0)>_c
inline C three_point_correlator(const Mat& h0, const Mat& h1, double beta, double s1, double s2) {
  const Mat rho = gibbs(h0, beta);
  const Mat a = heisenberg(h0, h1, s1);
  const Mat b = heisenberg(h0, h1, s2);
  const Mat& c = h1;
  auto ev = [&](const Mat& x) { return (rho * x).trace(); };
  const C m = ev(c);
  const C third = ev(a * b * c) - ev(a * b) * m - ev(a * c) * m - ev(b * c) * m + 2.0 * m * m * m;
  return C(0.0, 1.0) * third;
}

// Hand-rolled generators for the property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }

  Mat complex_gaussian(Eigen::Index d) {
    Mat m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) m(i, j) = C(normal(), normal());
    return m;
  }
  Mat hermitian(Eigen::Index d) {
    const Mat g = complex_gaussian(d);
    return 0.5 * (g + g.adjoint());
  }
  Mat unitary(Eigen::Index d) {
    Eigen::HouseholderQR<Mat> qr(complex_gaussian(d));
    return qr.householderQ();
  }
  Mat density(Eigen::Index d) {
    const Mat g = complex_gaussian(d);
    const Mat r = g * g.adjoint();
    return r / r.trace().real();
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace oracle
