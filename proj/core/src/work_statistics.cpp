#include "workstat/work_statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "workstat/errors.hpp"
#include "workstat/numeric_format.hpp"

namespace workstat::work {
namespace {

constexpr Complex kI{0.0, 1.0};

void check_dims(const spectral::SpectralDecomposition& a, const spectral::SpectralDecomposition& b,
                const ComplexMatrix& u, const char* who) {
  if (a.dimension() != b.dimension() || u.rows() != a.dimension() || u.cols() != a.dimension()) {
    throw InvalidArgument(std::string(who) + ": dimension mismatch");
  }
}

}  // namespace

WorkDistribution WorkDistribution::from_atoms(std::vector<WorkAtom> atoms, double merge_tolerance,
                                              double energy_scale) {
  if (!(merge_tolerance >= 0.0)) throw InvalidArgument("merge_tolerance must be >= 0");
  for (const auto& a : atoms) {
    if (!std::isfinite(a.w) || !std::isfinite(a.p)) throw InvalidArgument("work atom is not finite");
    if (a.p < 0.0) throw InvalidArgument("work atom has negative probability");
  }
  std::sort(atoms.begin(), atoms.end(), [](const WorkAtom& x, const WorkAtom& y) { return x.w < y.w; });

  WorkDistribution d;
  d.merge_tolerance_ = merge_tolerance;
  d.energy_scale_ = energy_scale;
  std::size_t i = 0;
  while (i < atoms.size()) {
    const double start = atoms[i].w;
    double p = 0.0, pw = 0.0, plain = 0.0;
    std::size_t j = i;
    for (; j < atoms.size() && atoms[j].w - start <= merge_tolerance; ++j) {
      p += atoms[j].p;
      pw += atoms[j].p * atoms[j].w;
      plain += atoms[j].w;
    }
    const double w = p > 0.0 ? pw / p : plain / static_cast<double>(j - i);
    d.atoms_.push_back({w, p});
    i = j;
  }
  const double drift = std::abs(d.total_probability() - 1.0);
  if (drift > 1e-8) {
    throw NumericalError("work distribution normalization drift " + format_double(drift));
  }
  return d;
}

double WorkDistribution::total_probability() const {
  double s = 0.0;
  for (const auto& a : atoms_) s += a.p;
  return s;
}

WorkDistribution tpm_distribution(const spectral::SpectralDecomposition& spec_i,
                                  const spectral::SpectralDecomposition& spec_f, const ComplexMatrix& u,
                                  double beta) {
  check_dims(spec_i, spec_f, u, "tpm_distribution");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("tpm_distribution: beta must be > 0");
  const RealVector p = spectral::boltzmann_weights(spec_i, beta);
  const Eigen::MatrixXd kernel = (spec_f.eigenvectors.adjoint() * u * spec_i.eigenvectors).cwiseAbs2();
  const Index dim = spec_i.dimension();
  std::vector<WorkAtom> atoms;
  atoms.reserve(static_cast<std::size_t>(dim));
  for (Index n = 0; n < dim; ++n) {
    for (Index m = 0; m < dim; ++m) {
      if (kernel(m, n) < kKernelFloor) continue;
      const double weight = kernel(m, n) * p(n);
      if (weight == 0.0) continue;
      atoms.push_back({spec_f.eigenvalues(m) - spec_i.eigenvalues(n), weight});
    }
  }
  const double scale = spec_i.spectral_range() + spec_f.spectral_range();
  return WorkDistribution::from_atoms(std::move(atoms), 1e-9 * scale, scale);
}

WorkDistribution tpm_distribution(const spectral::SpectralDecomposition& spec_i,
                                  const spectral::SpectralDecomposition& spec_f,
                                  const drive::PropagatorResult& u, double beta) {
  return tpm_distribution(spec_i, spec_f, u.unitary.matrix(), beta);
}

std::vector<double> default_u_grid(double beta, int points, double half_width) {
  if (!(beta > 0.0)) throw InvalidArgument("default_u_grid: beta must be > 0");
  if (points < 2) throw InvalidArgument("default_u_grid: need at least two points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double lo = -half_width * beta;
  const double step = 2.0 * half_width * beta / (points - 1);
  for (int k = 0; k < points; ++k) grid[static_cast<std::size_t>(k)] = lo + k * step;
  grid.back() = half_width * beta;
  // exact zero at the centre of an odd grid
  if (points % 2 == 1) grid[static_cast<std::size_t>(points / 2)] = 0.0;
  return grid;
}

std::vector<Complex> unwrap_log(const std::vector<double>& u, const std::vector<Complex>& chi) {
  if (u.size() != chi.size()) throw InvalidArgument("unwrap_log: size mismatch");
  std::vector<Complex> out(chi.size());
  if (chi.empty()) return out;
  for (std::size_t k = 0; k < chi.size(); ++k) {
    if (!(std::abs(chi[k]) >= 1e-12)) {
      throw ResolutionError("ln chi undefined: |chi| = " + format_double(std::abs(chi[k])) +
                            " at u = " + format_double(u[k]));
    }
  }
  std::size_t anchor = 0;
  for (std::size_t k = 1; k < u.size(); ++k) {
    if (std::abs(u[k]) < std::abs(u[anchor])) anchor = k;
  }
  out[anchor] = std::log(chi[anchor]);
  auto step = [&](std::size_t from, std::size_t to) {
    const double d = std::arg(chi[to] / chi[from]);
    if (std::abs(d) > 0.9 * std::numbers::pi) {
      throw ResolutionError("phase of chi jumps by " + format_double(d) + " between u = " + format_double(u[from]) +
                            " and u = " + format_double(u[to]) + "; refine the u grid");
    }
    out[to] = Complex(std::log(std::abs(chi[to])), out[from].imag() + d);
  };
  for (std::size_t k = anchor + 1; k < u.size(); ++k) step(k - 1, k);
  for (std::size_t k = anchor; k-- > 0;) step(k + 1, k);
  return out;
}

CfwSamples cfw_from_distribution(const WorkDistribution& d, const std::vector<double>& u_grid, bool unwrap) {
  CfwSamples c;
  c.u = u_grid;
  c.chi.resize(u_grid.size());
  for (std::size_t k = 0; k < u_grid.size(); ++k) {
    Complex s{0.0, 0.0};
    for (const auto& a : d.atoms()) s += a.p * std::exp(kI * (u_grid[k] * a.w));
    c.chi[k] = s;
  }
  if (unwrap) c.ln_chi = unwrap_log(c.u, c.chi);
  return c;
}

Complex characteristic_trace(const ComplexMatrix& u_prop, const spectral::SpectralDecomposition& spec_i,
                             const spectral::SpectralDecomposition& spec_f, double beta, Complex u) {
  check_dims(spec_i, spec_f, u_prop, "characteristic_trace");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidArgument("characteristic_trace: beta must be > 0");
  const double ei = spec_i.min_energy();
  const double ef = spec_f.min_energy();
  // energies shifted by the ground state of each spectrum; the shifts come back as one phase
  const OperatorMatrix fwd = spectral::matrix_function(spec_f, [&](double e) { return std::exp(kI * u * (e - ef)); });
  const OperatorMatrix bwd =
      spectral::matrix_function(spec_i, [&](double e) { return std::exp(-(kI * u + beta) * (e - ei)); });
  double z_i = 0.0;
  for (Index k = 0; k < spec_i.dimension(); ++k) z_i += std::exp(-beta * (spec_i.eigenvalues(k) - ei));
  const ComplexMatrix left = u_prop.adjoint() * fwd.matrix() * u_prop;
  // tr[L R] = sum_ij L_ij R_ji
  const Complex tr = left.cwiseProduct(bwd.matrix().transpose()).sum();
  return tr / z_i * std::exp(kI * u * (ef - ei));
}

CfwSamples cfw_trace(const ComplexMatrix& u_prop, const spectral::SpectralDecomposition& spec_i,
                     const spectral::SpectralDecomposition& spec_f, double beta, const std::vector<double>& u_grid,
                     bool unwrap) {
  CfwSamples c;
  c.u = u_grid;
  c.chi.resize(u_grid.size());
  for (std::size_t k = 0; k < u_grid.size(); ++k) {
    c.chi[k] = characteristic_trace(u_prop, spec_i, spec_f, beta, Complex(u_grid[k], 0.0));
  }
  if (unwrap) c.ln_chi = unwrap_log(c.u, c.chi);
  return c;
}

JarzynskiReport jarzynski_check(const WorkDistribution& d, double ln_z_i, double ln_z_f, double beta) {
  JarzynskiReport r;
  for (const auto& a : d.atoms()) r.lhs += a.p * std::exp(-beta * a.w);
  r.rhs = std::exp(ln_z_f - ln_z_i);
  r.abs_deviation = std::abs(r.lhs - r.rhs);
  return r;
}

double average_work(const WorkDistribution& d) {
  double s = 0.0;
  for (const auto& a : d.atoms()) s += a.p * a.w;
  return s;
}

double lemma1_average(const spectral::DensityMatrix& rho_f, const OperatorMatrix& h_f,
                      const spectral::DensityMatrix& rho_i, const OperatorMatrix& h_i) {
  if (rho_f.dimension() != h_f.dimension() || rho_i.dimension() != h_i.dimension() ||
      rho_f.dimension() != rho_i.dimension()) {
    throw InvalidArgument("lemma1_average: dimension mismatch");
  }
  return spectral::expectation(rho_f, h_f) - spectral::expectation(rho_i, h_i);
}

DeltaReport delta_concentration(const WorkDistribution& d, double epsilon) {
  DeltaReport r;
  if (epsilon < 0.0) epsilon = d.energy_scale() > 0.0 ? 1e-6 * d.energy_scale() : 1e-6;
  r.epsilon = epsilon;
  r.mean = average_work(d);
  for (const auto& a : d.atoms()) {
    const double dev = a.w - r.mean;
    r.variance += a.p * dev * dev;
    if (std::abs(dev) <= epsilon) r.mass_within_epsilon += a.p;
  }
  r.is_delta = r.variance < epsilon * epsilon && r.mass_within_epsilon >= 1.0 - 1e-10;
  return r;
}

LinearityReport corollary1_linearity(const CfwSamples& c) {
  if (c.ln_chi.size() != c.u.size()) throw InvalidArgument("corollary1_linearity: ln chi not unwrapped");
  LinearityReport r;
  double su2 = 0.0, suy = 0.0, u_max = 0.0;
  for (std::size_t k = 0; k < c.u.size(); ++k) {
    su2 += c.u[k] * c.u[k];
    suy += c.u[k] * c.ln_chi[k].imag();
    u_max = std::max(u_max, std::abs(c.u[k]));
  }
  r.w0_fit = su2 > 0.0 ? suy / su2 : 0.0;
  for (std::size_t k = 0; k < c.u.size(); ++k) {
    const double res = c.ln_chi[k].imag() - r.w0_fit * c.u[k];
    r.max_abs_residual = std::max(r.max_abs_residual, std::abs(res));
    r.max_abs_real = std::max(r.max_abs_real, std::abs(c.ln_chi[k].real()));
    r.max_abs_deviation = std::max(r.max_abs_deviation, std::hypot(c.ln_chi[k].real(), res));
  }
  const double scale = std::abs(r.w0_fit) * u_max;
  r.relative_residual = scale > 0.0 ? r.max_abs_residual / scale : (r.max_abs_residual > 0.0 ? INFINITY : 0.0);
  return r;
}

void write_distribution_csv(std::ostream& out, const WorkDistribution& d) {
  out << "w,p\n";
  for (const auto& a : d.atoms()) out << format_double(a.w) << ',' << format_double(a.p) << '\n';
}

void write_cfw_csv(std::ostream& out, const CfwSamples& c) {
  out << "u,re_chi,im_chi,re_ln_chi,im_ln_chi\n";
  for (std::size_t k = 0; k < c.u.size(); ++k) {
    const Complex l = k < c.ln_chi.size() ? c.ln_chi[k] : Complex(NAN, NAN);
    out << format_double(c.u[k]) << ',' << format_double(c.chi[k].real()) << ',' << format_double(c.chi[k].imag())
        << ',' << format_double(l.real()) << ',' << format_double(l.imag()) << '\n';
  }
}

}  // namespace workstat::work
