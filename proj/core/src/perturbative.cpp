#include "workstat/perturbative.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "workstat/errors.hpp"
#include "workstat/numeric_format.hpp"

namespace workstat::pert {
namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kMergeTolerance = 1e-12;

ComplexMatrix h1_in_eigenbasis(const spectral::SpectralDecomposition& spec, const OperatorMatrix& h1) {
  if (h1.dimension() != spec.dimension()) throw InvalidArgument("H1 and H0 spectrum dimension mismatch");
  return spec.eigenvectors.adjoint() * h1.matrix() * spec.eigenvectors;
}

void check_lambda(const drive::DriveProtocol& p, double lambda1) {
  if (!std::isfinite(lambda1)) throw InvalidArgument("lambda1 must be finite");
  const double end = p.lambda_end();
  if (std::abs(end - lambda1) > 1e-12 * std::max(1.0, std::abs(lambda1))) {
    throw InvalidArgument("lambda1 = " + format_double(lambda1) + " but the protocol ends at " + format_double(end));
  }
}

// (exp(ix) - 1 - ix) / x^2
Complex second_remainder(double x) {
  if (std::abs(x) < 0.5) {
    Complex sum{0.0, 0.0};
    Complex term = -0.5;  // (ix)^2 / 2! / x^2
    for (int k = 2; k < 22; ++k) {
      sum += term;
      term *= kI * x / static_cast<double>(k + 1);
    }
    return sum;
  }
  const double h = std::sin(0.5 * x);
  return Complex(-2.0 * h * h, std::sin(x) - x) / (x * x);
}

Complex expm1_imag(double x) {
  const double h = std::sin(0.5 * x);
  return {-2.0 * h * h, std::sin(x)};
}

std::vector<SpectralAtom2> merge_sorted(std::vector<SpectralAtom2> atoms) {
  std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) { return a.omega < b.omega; });
  std::vector<SpectralAtom2> out;
  std::size_t i = 0;
  while (i < atoms.size()) {
    const double start = atoms[i].omega;
    double w = 0.0, om = 0.0;
    std::size_t j = i;
    for (; j < atoms.size() && atoms[j].omega - start <= kMergeTolerance; ++j) {
      w += atoms[j].weight;
      om += atoms[j].omega;
    }
    out.push_back({om / static_cast<double>(j - i), w});
    i = j;
  }
  return out;
}

// Assigns each value to a cluster representative (plain mean of the cluster).
std::vector<double> cluster_values(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> rep(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    const double start = values[order[i]];
    double sum = 0.0;
    std::size_t j = i;
    for (; j < order.size() && values[order[j]] - start <= kMergeTolerance; ++j) sum += values[order[j]];
    const double mean = sum / static_cast<double>(j - i);
    for (std::size_t k = i; k < j; ++k) rep[order[k]] = mean;
    i = j;
  }
  return rep;
}

std::vector<SpectralAtom3> merge_atoms3(std::vector<SpectralAtom3> atoms) {
  std::vector<double> w1(atoms.size()), w2(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    w1[i] = atoms[i].omega1;
    w2[i] = atoms[i].omega2;
  }
  const auto r1 = cluster_values(w1);
  const auto r2 = cluster_values(w2);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    atoms[i].omega1 = r1[i];
    atoms[i].omega2 = r2[i];
  }
  std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) {
    return a.omega1 < b.omega1 || (a.omega1 == b.omega1 && a.omega2 < b.omega2);
  });
  std::vector<SpectralAtom3> out;
  for (const auto& a : atoms) {
    if (!out.empty() && out.back().omega1 == a.omega1 && out.back().omega2 == a.omega2) {
      out.back().weight += a.weight;
    } else {
      out.push_back(a);
    }
  }
  return out;
}

work::CfwSamples samples_from_log(const std::vector<double>& u, std::vector<Complex> ln_chi) {
  work::CfwSamples s;
  s.u = u;
  s.chi.resize(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) s.chi[k] = std::exp(ln_chi[k]);
  s.ln_chi = std::move(ln_chi);
  return s;
}

// ---- time-domain quadrature ----

struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
};

GaussRule gauss_legendre(int n) {
  GaussRule r{std::vector<double>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.x[static_cast<std::size_t>(i)] = x;
    r.w[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

// Straight contour piece from za to zb with lambda linear in between.
struct Piece {
  double za, zb, la, lb;
};

std::vector<double> protocol_knots(const drive::DriveProtocol& p) {
  std::vector<double> knots{0.0};
  if (p.kind() == drive::ProtocolKind::sampled) {
    for (std::size_t i = 1; i < p.samples().size(); ++i) knots.push_back(p.samples()[i].first);
  } else {
    const double tr = p.ramp_end();
    if (tr > 0.0 && tr < p.t_total()) knots.push_back(tr);
    knots.push_back(p.t_total());
  }
  return knots;
}

// Contour: forward from u to u + t with lambda(z - u), back from u + t to t
// at the final coupling, then back from t to 0 with lambda(z).
std::vector<Piece> contour_pieces(const drive::DriveProtocol& p, double u) {
  const auto knots = protocol_knots(p);
  struct Interval {
    double a, b, la, lb;
  };
  std::vector<Interval> iv;
  for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
    const double a = knots[j], b = knots[j + 1], h = b - a;
    if (!(h > 0.0)) continue;
    // lambda is linear inside; evaluate away from the ends to get one-sided limits
    const double q1 = p.lambda_at(a + 0.25 * h), q3 = p.lambda_at(a + 0.75 * h);
    const double quarter_rise = 0.5 * (q3 - q1);
    iv.push_back({a, b, q1 - quarter_rise, q3 + quarter_rise});
  }
  std::vector<Piece> pieces;
  for (const auto& s : iv) pieces.push_back({u + s.a, u + s.b, s.la, s.lb});
  const double t = p.t_total();
  if (u != 0.0) pieces.push_back({u + t, t, p.lambda_end(), p.lambda_end()});
  for (auto it = iv.rbegin(); it != iv.rend(); ++it) pieces.push_back({it->b, it->a, it->lb, it->la});
  return pieces;
}

// Second-order contour double integral for every atom at one value of u.
Complex contour_double_integral(const std::vector<SpectralAtom2>& atoms, const std::vector<Piece>& pieces,
                                const GaussRule& rule, double omega_max, double max_phase, int refine,
                                Complex& first_integral) {
  const std::size_t n = rule.x.size();
  std::vector<Complex> inner(atoms.size(), Complex{0.0, 0.0});
  std::vector<Complex> acc(atoms.size(), Complex{0.0, 0.0});
  first_integral = 0.0;
  std::vector<double> xs(n), ws(n), ls(n);
  std::vector<double> ys(n * n), wys(n * n);
  for (const Piece& pc : pieces) {
    const double len = pc.zb - pc.za;
    if (len == 0.0) continue;
    const int base = std::max(1, static_cast<int>(std::ceil(std::abs(len) * omega_max / max_phase)));
    const int panels = base * refine;
    const double plen = len / panels;
    auto lam = [&](double z) { return pc.la + (pc.lb - pc.la) * (z - pc.za) / len; };
    for (int q = 0; q < panels; ++q) {
      const double a = pc.za + q * plen;
      const double half = 0.5 * plen;
      for (std::size_t j = 0; j < n; ++j) {
        xs[j] = a + half * (1.0 + rule.x[j]);
        ws[j] = half * rule.w[j];
        ls[j] = lam(xs[j]);
        first_integral += ws[j] * ls[j];
        const double hj = 0.5 * (xs[j] - a);
        for (std::size_t l = 0; l < n; ++l) {
          const double y = a + hj * (1.0 + rule.x[l]);
          ys[j * n + l] = y;
          wys[j * n + l] = hj * rule.w[l] * lam(y);
        }
      }
      for (std::size_t k = 0; k < atoms.size(); ++k) {
        const double om = atoms[k].omega;
        Complex panel_total{0.0, 0.0};
        for (std::size_t j = 0; j < n; ++j) {
          Complex partial{0.0, 0.0};
          for (std::size_t l = 0; l < n; ++l) partial += wys[j * n + l] * std::exp(kI * (om * ys[j * n + l]));
          const Complex e = std::exp(kI * (om * xs[j]));
          acc[k] += ws[j] * ls[j] * std::conj(e) * (inner[k] + partial);
          panel_total += ws[j] * ls[j] * e;
        }
        inner[k] += panel_total;
      }
    }
  }
  Complex total{0.0, 0.0};
  for (std::size_t k = 0; k < atoms.size(); ++k) total += atoms[k].weight * acc[k];
  return total;
}

}  // namespace

double SpectralMeasure2::total_weight() const {
  double s = 0.0;
  for (const auto& a : atoms) s += a.weight;
  return s;
}

Complex SpectralMeasure2::inverse_transform(double s) const {
  Complex total{0.0, 0.0};
  for (const auto& a : atoms) total += a.weight * std::exp(-kI * (a.omega * s));
  return total;
}

Complex SpectralMeasure3::total_weight() const {
  Complex s{0.0, 0.0};
  for (const auto& a : atoms) s += a.weight;
  return s;
}

Complex SpectralMeasure3::inverse_transform(double s1, double s2) const {
  Complex total{0.0, 0.0};
  for (const auto& a : atoms) total += a.weight * std::exp(-kI * (a.omega1 * s1 + a.omega2 * s2));
  return total;
}

double first_cumulant(const spectral::SpectralDecomposition& h0_spec, const OperatorMatrix& h1, double beta) {
  return spectral::thermal_expectation(h0_spec, beta, h1);
}

SpectralMeasure2 two_point_measure(const spectral::SpectralDecomposition& h0_spec, const OperatorMatrix& h1,
                                   double beta) {
  const ComplexMatrix b = h1_in_eigenbasis(h0_spec, h1);
  const RealVector p = spectral::boltzmann_weights(h0_spec, beta);
  const Index dim = h0_spec.dimension();
  double mean = 0.0;
  for (Index n = 0; n < dim; ++n) mean += p(n) * b(n, n).real();
  std::vector<SpectralAtom2> atoms;
  atoms.reserve(static_cast<std::size_t>(dim * dim) + 1);
  for (Index n = 0; n < dim; ++n) {
    if (p(n) == 0.0) continue;
    for (Index m = 0; m < dim; ++m) {
      const double a2 = std::norm(b(n, m));
      if (a2 == 0.0) continue;
      atoms.push_back({h0_spec.eigenvalues(m) - h0_spec.eigenvalues(n), -p(n) * a2});
    }
  }
  atoms.push_back({0.0, mean * mean});
  SpectralMeasure2 out;
  out.atoms = merge_sorted(std::move(atoms));
  out.connected = true;
  out.spectral_range = h0_spec.spectral_range();
  return out;
}

SpectralMeasure3 three_point_measure(const spectral::SpectralDecomposition& h0_spec, const OperatorMatrix& h1,
                                     double beta) {
  const ComplexMatrix b = h1_in_eigenbasis(h0_spec, h1);
  const RealVector p = spectral::boltzmann_weights(h0_spec, beta);
  const Index dim = h0_spec.dimension();
  const RealVector& e = h0_spec.eigenvalues;
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  const double cut = 1e-15 * scale;

  // nonzero pattern per row keeps sector-sparse H1 cheap
  std::vector<std::vector<Index>> nz(static_cast<std::size_t>(dim));
  for (Index n = 0; n < dim; ++n) {
    for (Index m = 0; m < dim; ++m) {
      if (std::abs(b(n, m)) > cut) nz[static_cast<std::size_t>(n)].push_back(m);
    }
  }
  double mean = 0.0;
  for (Index n = 0; n < dim; ++n) mean += p(n) * b(n, n).real();

  std::vector<SpectralAtom3> atoms;
  // <A B C>
  for (Index n = 0; n < dim; ++n) {
    if (p(n) == 0.0) continue;
    for (Index m : nz[static_cast<std::size_t>(n)]) {
      const Complex bnm = p(n) * b(n, m);
      for (Index k : nz[static_cast<std::size_t>(m)]) {
        const Complex bkn = b(k, n);
        if (std::abs(bkn) <= cut) continue;
        atoms.push_back({e(m) - e(n), e(k) - e(m), kI * bnm * b(m, k) * bkn});
      }
    }
  }
  // -h <A B>, -h <A C>, -h <B C>; the pair moment <H1(s) H1(0)> has atoms at E_m - E_n
  for (Index n = 0; n < dim; ++n) {
    if (p(n) == 0.0) continue;
    for (Index m : nz[static_cast<std::size_t>(n)]) {
      const double w = p(n) * std::norm(b(n, m));
      const double om = e(m) - e(n);
      const Complex c = -kI * mean * w;
      atoms.push_back({om, -om, c});
      atoms.push_back({om, 0.0, c});
      atoms.push_back({0.0, om, c});
    }
  }
  atoms.push_back({0.0, 0.0, kI * 2.0 * mean * mean * mean});

  SpectralMeasure3 out;
  out.atoms = merge_atoms3(std::move(atoms));
  out.spectral_range = h0_spec.spectral_range();
  return out;
}

SecondOrderResult lnchi_second_order(const SpectralMeasure2& measure, const drive::DriveProtocol& protocol,
                                     double first_cum, double lambda1, const std::vector<double>& u_grid,
                                     const SecondOrderOptions& options) {
  check_lambda(protocol, lambda1);
  const std::size_t nu = u_grid.size();
  SecondOrderResult r;
  r.first_order.assign(nu, Complex{0.0, 0.0});
  r.adiabatic_term.assign(nu, Complex{0.0, 0.0});
  r.response_term.assign(nu, Complex{0.0, 0.0});
  r.zero_mode_term.assign(nu, Complex{0.0, 0.0});
  r.omega_floor = options.floors.omega_floor_relative * measure.spectral_range;
  const double l2 = lambda1 * lambda1;

  std::vector<Complex> total(nu, Complex{0.0, 0.0});
  for (std::size_t k = 0; k < nu; ++k) {
    r.first_order[k] = kI * u_grid[k] * lambda1 * first_cum;
    total[k] = r.first_order[k];
  }
  for (const auto& atom : measure.atoms) {
    const double om = atom.omega;
    const double g = atom.weight;
    if (std::abs(om) < r.omega_floor) {
      r.zero_mode_weight += std::abs(g);
      if (options.zero_mode == ZeroModePolicy::exclude) {
        r.dropped_weight += std::abs(g);
        continue;
      }
      for (std::size_t k = 0; k < nu; ++k) {
        const Complex z = g * l2 * u_grid[k] * u_grid[k] * 0.5;
        r.zero_mode_term[k] += z;
        total[k] += z;
      }
      continue;
    }
    const double deficit = drive::spectral_response_deficit(protocol, om);
    const double a = l2 - deficit;
    for (std::size_t k = 0; k < nu; ++k) {
      const double u = u_grid[k];
      const double x = om * u;
      // i u l2 / om + (1 - e^{ix}) A / om^2, rearranged so both pieces stay finite as om -> 0
      const Complex value =
          g * ((expm1_imag(x) * deficit) / (om * om) - l2 * u * u * second_remainder(x));
      const Complex linear = g * kI * u * l2 / om;
      r.adiabatic_term[k] += linear;
      r.response_term[k] += g * (-expm1_imag(x)) * a / (om * om);
      total[k] += value;
    }
  }
  r.degeneracy_warning = r.dropped_weight > options.floors.weight_floor;
  r.samples = samples_from_log(u_grid, std::move(total));
  return r;
}

work::CfwSamples lnchi_second_order_quadrature(const SpectralMeasure2& measure, double first_cum,
                                               const drive::DriveProtocol& protocol, double lambda1,
                                               const std::vector<double>& u_grid, const QuadratureOptions& options) {
  check_lambda(protocol, lambda1);
  if (options.nodes < 2 || !(options.max_panel_phase > 0.0)) throw InvalidArgument("quadrature: bad options");
  const GaussRule rule = gauss_legendre(options.nodes);
  double omega_max = 0.0;
  for (const auto& a : measure.atoms) omega_max = std::max(omega_max, std::abs(a.omega));

  std::vector<Complex> out(u_grid.size());
  for (std::size_t k = 0; k < u_grid.size(); ++k) {
    const auto pieces = contour_pieces(protocol, u_grid[k]);
    Complex first_coarse, first_fine;
    const Complex coarse =
        contour_double_integral(measure.atoms, pieces, rule, omega_max, options.max_panel_phase, 1, first_coarse);
    const Complex fine =
        contour_double_integral(measure.atoms, pieces, rule, omega_max, options.max_panel_phase, 2, first_fine);
    const double change = std::abs(fine - coarse) + std::abs(first_fine - first_coarse) * std::abs(first_cum);
    if (change > options.tolerance) {
      throw NumericalError("quadrature did not converge at u = " + format_double(u_grid[k]) + " (change " +
                           format_double(change) + ")");
    }
    out[k] = -kI * first_cum * first_fine + fine;
  }
  return samples_from_log(u_grid, std::move(out));
}

work::CfwSamples lnchi_second_order_quadrature(const spectral::SpectralDecomposition& h0_spec,
                                               const OperatorMatrix& h1, double beta,
                                               const drive::DriveProtocol& protocol, double lambda1,
                                               const std::vector<double>& u_grid, const QuadratureOptions& options) {
  return lnchi_second_order_quadrature(two_point_measure(h0_spec, h1, beta), first_cumulant(h0_spec, h1, beta),
                                       protocol, lambda1, u_grid, options);
}

ThirdOrderResult lnchi_third_order_adiabatic(const SpectralMeasure3& m3, double lambda1,
                                             const std::vector<double>& u_grid, const FrequencyFloors& floors) {
  if (!std::isfinite(lambda1)) throw InvalidArgument("lambda1 must be finite");
  ThirdOrderResult r;
  r.omega_floor = floors.omega_floor_relative * m3.spectral_range;
  Complex sum{0.0, 0.0};
  for (const auto& a : m3.atoms) {
    const double d1 = a.omega1;
    const double d2 = a.omega1 + a.omega2;
    if (std::abs(d1) < r.omega_floor || std::abs(d2) < r.omega_floor) {
      r.dropped_weight += std::abs(a.weight);
      continue;
    }
    sum += a.weight / (d1 * d2);
  }
  r.coefficient = lambda1 * lambda1 * lambda1 * sum;
  r.degeneracy_warning = r.dropped_weight > floors.weight_floor;
  std::vector<Complex> ln(u_grid.size());
  for (std::size_t k = 0; k < u_grid.size(); ++k) ln[k] = u_grid[k] * r.coefficient;
  r.samples = samples_from_log(u_grid, std::move(ln));
  return r;
}

void write_measure_csv(std::ostream& out, const SpectralMeasure2& m) {
  out << "omega,re_weight,im_weight\n";
  for (const auto& a : m.atoms) out << format_double(a.omega) << ',' << format_double(a.weight) << ",0\n";
}

void write_measure_csv(std::ostream& out, const SpectralMeasure3& m) {
  out << "omega,omega2,re_weight,im_weight\n";
  for (const auto& a : m.atoms) {
    out << format_double(a.omega1) << ',' << format_double(a.omega2) << ',' << format_double(a.weight.real()) << ','
        << format_double(a.weight.imag()) << '\n';
  }
}

}  // namespace workstat::pert
