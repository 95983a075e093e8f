#include "workstat/drive.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "workstat/errors.hpp"
#include "workstat/spin_model.hpp"

namespace workstat::drive {
namespace {

constexpr Complex kI{0.0, 1.0};

void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw InvalidArgument(std::string(what) + " must be finite");
}

// (exp(z) - 1) / z for purely imaginary z = i x.
Complex phi_imag(double x) {
  if (std::abs(x) < 1e-4) {
    const Complex z = kI * x;
    return 1.0 + z / 2.0 + z * z / 6.0 + z * z * z / 24.0;
  }
  // exp(ix) - 1 = -2 sin^2(x/2) + i sin(x)
  const double s = std::sin(0.5 * x);
  return Complex(-2.0 * s * s, std::sin(x)) / (kI * x);
}

double sinc(double y) { return std::abs(y) < 1e-8 ? 1.0 - y * y / 6.0 : std::sin(y) / y; }

// 1 - sinc(y)^2 without cancellation.
double one_minus_sinc_sq(double y) {
  if (std::abs(y) < 1e-2) {
    const double y2 = y * y;
    return y2 / 3.0 - 2.0 * y2 * y2 / 45.0 + y2 * y2 * y2 / 315.0;
  }
  const double s = sinc(y);
  return 1.0 - s * s;
}

struct Step {
  double t0;
  double duration;
};

struct Schedule {
  std::vector<Step> steps;  // time-dependent part, in time order
  double hold_duration = 0.0;
  double hold_lambda = 0.0;
};

// Steps of dt inside each smooth piece of lambda(t); the last step of a piece
// is shortened to land on its end.
Schedule make_schedule(const DriveProtocol& p, double dt) {
  Schedule s;
  const double t_end = p.ramp_end();
  std::vector<double> knots{0.0};
  if (p.kind() == ProtocolKind::sampled) {
    for (const auto& [t, l] : p.samples()) {
      if (t > 0.0 && t <= t_end) knots.push_back(t);
    }
  } else if (t_end > 0.0) {
    knots.push_back(t_end);
  }
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double a = knots[k], len = knots[k + 1] - a;
    auto n_full = static_cast<std::size_t>(std::floor(len / dt * (1.0 + 1e-12)));
    double remainder = len - static_cast<double>(n_full) * dt;
    if (remainder < 1e-12 * dt) remainder = 0.0;
    for (std::size_t j = 0; j < n_full; ++j) s.steps.push_back({a + static_cast<double>(j) * dt, dt});
    if (remainder > 0.0) s.steps.push_back({a + static_cast<double>(n_full) * dt, remainder});
  }
  s.hold_duration = p.t_total() - t_end;
  if (s.hold_duration < 1e-14 * p.t_total()) s.hold_duration = 0.0;
  s.hold_lambda = p.lambda_end();
  return s;
}

double lambda_clamped(const DriveProtocol& p, double t) { return p.lambda_at(std::clamp(t, 0.0, p.t_total())); }

// exp(-i h t) applied from the left: u <- V exp(-i E t) V^dagger u.
void apply_exact(const ComplexMatrix& h, double t, ComplexMatrix& u) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("propagate: eigensolver failed");
  const ComplexVector phases = (-kI * t * solver.eigenvalues().cast<Complex>()).array().exp();
  ComplexMatrix tmp = solver.eigenvectors().adjoint() * u;
  tmp = phases.asDiagonal() * tmp;
  u.noalias() = solver.eigenvectors() * tmp;
}

struct Block {
  std::vector<Index> indices;
  ComplexMatrix h0;
  ComplexMatrix h1;
};

// Partitioned composition exp(-i a_k dt h0) exp(-i b_k dt lambda(t_k) h1) ...
// with h1 diagonal; t_k advances with the h0 flows. The trailing h0 flow of a
// step is merged with the leading one of the next.
struct Splitting {
  std::vector<double> a;  // size b.size() + 1
  std::vector<double> b;
};

Splitting splitting_for(Method method) {
  if (method == Method::strang) return {{0.5, 0.5}, {1.0}};
  // triple jump of Strang steps
  const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
  const double w0 = 1.0 - 2.0 * w1;
  return {{0.5 * w1, 0.5 * (w1 + w0), 0.5 * (w0 + w1), 0.5 * w1}, {w1, w0, w1}};
}

void apply_splitting(const Block& blk, const Schedule& schedule, const DriveProtocol& p, const Splitting& sp,
                     ComplexMatrix& u) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(blk.h0);
  if (solver.info() != Eigen::Success) throw NumericalError("propagate: eigensolver failed");
  std::map<double, ComplexMatrix> cache;
  auto free_factor = [&](double t) -> const ComplexMatrix& {
    auto it = cache.find(t);
    if (it == cache.end()) {
      const ComplexVector ph = (-kI * t * solver.eigenvalues().cast<Complex>()).array().exp();
      it = cache.emplace(t, solver.eigenvectors() * ph.asDiagonal() * solver.eigenvectors().adjoint()).first;
    }
    return it->second;
  };
  const ComplexVector h1_diag = blk.h1.diagonal();
  ComplexMatrix tmp(u.rows(), u.cols());
  const std::size_t stages = sp.b.size();
  double carry = 0.0;
  for (const Step& st : schedule.steps) {
    const double tau = st.duration;
    double t = st.t0;
    for (std::size_t i = 0; i < stages; ++i) {
      tmp.noalias() = free_factor(sp.a[i] * tau + (i == 0 ? carry : 0.0)) * u;
      t += sp.a[i] * tau;
      const double lam = lambda_clamped(p, t);
      u = (-kI * (lam * sp.b[i] * tau) * h1_diag).array().exp().matrix().asDiagonal() * tmp;
    }
    carry = sp.a[stages] * tau;
  }
  tmp.noalias() = free_factor(carry) * u;
  u = tmp;
}

ComplexMatrix propagate_block(const Block& b, const Schedule& schedule, const DriveProtocol& p, Method method) {
  const Index n = static_cast<Index>(b.indices.size());
  ComplexMatrix u = ComplexMatrix::Identity(n, n);
  if (!schedule.steps.empty()) {
    if (method == Method::midpoint_exact) {
      for (const Step& st : schedule.steps) {
        apply_exact(b.h0 + lambda_clamped(p, st.t0 + 0.5 * st.duration) * b.h1, st.duration, u);
      }
    } else if (method == Method::magnus4) {
      const ComplexMatrix comm = kI * (b.h1 * b.h0 - b.h0 * b.h1);
      const double c = std::sqrt(3.0) / 6.0;
      for (const Step& st : schedule.steps) {
        const double l1 = lambda_clamped(p, st.t0 + (0.5 - c) * st.duration);
        const double l2 = lambda_clamped(p, st.t0 + (0.5 + c) * st.duration);
        ComplexMatrix heff = b.h0 + 0.5 * (l1 + l2) * b.h1;
        if (l2 != l1) heff -= (std::sqrt(3.0) * st.duration / 12.0) * (l2 - l1) * comm;
        apply_exact(heff, st.duration, u);
      }
    } else {
      apply_splitting(b, schedule, p, splitting_for(method), u);
    }
  }
  if (schedule.hold_duration > 0.0) apply_exact(b.h0 + schedule.hold_lambda * b.h1, schedule.hold_duration, u);
  return u;
}

Block extract_block(const ComplexMatrix& h0, const ComplexMatrix& h1, std::vector<Index> idx) {
  const auto n = static_cast<Index>(idx.size());
  Block b{std::move(idx), ComplexMatrix(n, n), ComplexMatrix(n, n)};
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      b.h0(i, j) = h0(b.indices[static_cast<std::size_t>(i)], b.indices[static_cast<std::size_t>(j)]);
      b.h1(i, j) = h1(b.indices[static_cast<std::size_t>(i)], b.indices[static_cast<std::size_t>(j)]);
    }
  }
  return b;
}

}  // namespace

std::string to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::ramp_hold: return "ramp_hold";
    case ProtocolKind::quench: return "quench";
    case ProtocolKind::sampled: return "sampled";
  }
  return "unknown";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::strang: return "strang";
    case Method::midpoint_exact: return "midpoint_exact";
    case Method::magnus4: return "magnus4";
    case Method::yoshida4: return "yoshida4";
  }
  return "unknown";
}

DriveProtocol DriveProtocol::ramp_hold(double velocity, double lambda_final, double t_total, bool allow_partial) {
  require_finite(velocity, "velocity");
  require_finite(lambda_final, "lambda_final");
  require_finite(t_total, "t_total");
  if (velocity < 0.0) throw InvalidArgument("ramp_hold: velocity must be >= 0");
  if (t_total <= 0.0) throw InvalidArgument("ramp_hold: t_total must be > 0");
  if (lambda_final < 0.0) throw InvalidArgument("ramp_hold: lambda_final must be >= 0");
  if (!allow_partial && velocity * t_total < lambda_final * (1.0 - 1e-12)) {
    throw InvalidArgument("ramp_hold: v * t_total = " + std::to_string(velocity * t_total) +
                          " does not reach lambda_final = " + std::to_string(lambda_final) +
                          " (set allow_partial to permit)");
  }
  DriveProtocol p;
  p.kind_ = ProtocolKind::ramp_hold;
  p.velocity_ = velocity;
  p.lambda_final_ = lambda_final;
  p.t_total_ = t_total;
  return p;
}

DriveProtocol DriveProtocol::quench(double lambda_final, double t_total) {
  require_finite(lambda_final, "lambda_final");
  require_finite(t_total, "t_total");
  if (t_total <= 0.0) throw InvalidArgument("quench: t_total must be > 0");
  DriveProtocol p;
  p.kind_ = ProtocolKind::quench;
  p.lambda_final_ = lambda_final;
  p.t_total_ = t_total;
  return p;
}

DriveProtocol DriveProtocol::sampled(std::vector<std::pair<double, double>> samples) {
  if (samples.size() < 2) throw InvalidArgument("sampled: need at least two samples");
  if (samples.front().first != 0.0 || samples.front().second != 0.0) {
    throw InvalidArgument("sampled: the first sample must be (0, 0)");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require_finite(samples[i].first, "sample time");
    require_finite(samples[i].second, "sample lambda");
    if (i > 0 && !(samples[i].first > samples[i - 1].first)) {
      throw InvalidArgument("sampled: sample times must be strictly increasing");
    }
  }
  DriveProtocol p;
  p.kind_ = ProtocolKind::sampled;
  p.lambda_final_ = samples.back().second;
  p.t_total_ = samples.back().first;
  p.samples_ = std::move(samples);
  return p;
}

double DriveProtocol::ramp_end() const noexcept {
  switch (kind_) {
    case ProtocolKind::quench: return 0.0;
    case ProtocolKind::ramp_hold:
      if (lambda_final_ == 0.0) return 0.0;
      if (velocity_ == 0.0) return t_total_;
      return std::min(lambda_final_ / velocity_, t_total_);
    case ProtocolKind::sampled: {
      // Last knot after which the coupling stays constant.
      std::size_t last = samples_.size() - 1;
      while (last > 0 && samples_[last - 1].second == samples_[last].second) --last;
      return samples_[last].first;
    }
  }
  return t_total_;
}

bool DriveProtocol::completed() const noexcept {
  return kind_ != ProtocolKind::ramp_hold || lambda_final_ == 0.0 ||
         velocity_ * t_total_ >= lambda_final_ * (1.0 - 1e-12);
}

double DriveProtocol::lambda_end() const {
  if (kind_ == ProtocolKind::ramp_hold) return std::min(velocity_ * t_total_, lambda_final_);
  return lambda_final_;
}

double DriveProtocol::lambda_at(double t) const {
  if (!(t >= 0.0 && t <= t_total_ * (1.0 + 1e-12))) {
    throw InvalidArgument("lambda_at: t = " + std::to_string(t) + " outside [0, " + std::to_string(t_total_) + "]");
  }
  switch (kind_) {
    case ProtocolKind::quench: return t > 0.0 ? lambda_final_ : 0.0;
    case ProtocolKind::ramp_hold: return std::min(velocity_ * t, lambda_final_);
    case ProtocolKind::sampled: {
      auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                 [](double value, const auto& s) { return value < s.first; });
      if (it == samples_.end()) return samples_.back().second;
      const auto& hi = *it;
      const auto& lo = *(it - 1);
      const double frac = (t - lo.first) / (hi.first - lo.first);
      return lo.second + frac * (hi.second - lo.second);
    }
  }
  return 0.0;
}

PropagatorResult propagate(const OperatorMatrix& h0, const OperatorMatrix& h1, const DriveProtocol& protocol,
                           double dt, Method method, const PropagateOptions& options) {
  if (h0.dimension() != h1.dimension()) throw InvalidArgument("propagate: h0/h1 dimension mismatch");
  if (!h0.hermitian() || !h1.hermitian()) throw InvalidArgument("propagate: h0 and h1 must be Hermitian");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("propagate: dt must be positive");
  if ((method == Method::strang || method == Method::yoshida4) && !h1.is_diagonal()) {
    throw InvalidArgument("propagate: strang splitting needs h1 diagonal in the computational basis");
  }
  const Index dim = h0.dimension();
  const Schedule schedule = make_schedule(protocol, dt);

  std::vector<Block> blocks;
  if (options.use_sectors) {
    const auto sectors = spin::magnetization_sectors(sites_for_dimension(dim));
    if (!spin::is_block_diagonal(h0.matrix(), sectors) || !spin::is_block_diagonal(h1.matrix(), sectors)) {
      throw InvalidArgument("propagate: sector propagation needs magnetization-conserving h0 and h1");
    }
    for (const auto& idx : sectors) blocks.push_back(extract_block(h0.matrix(), h1.matrix(), idx));
  } else {
    std::vector<Index> all(static_cast<std::size_t>(dim));
    for (Index i = 0; i < dim; ++i) all[static_cast<std::size_t>(i)] = i;
    blocks.push_back(Block{std::move(all), h0.matrix(), h1.matrix()});
  }

  ComplexMatrix u = ComplexMatrix::Zero(dim, dim);
  double defect_sq = 0.0;
  std::vector<ComplexMatrix> done(blocks.size());
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    const Block& b = blocks[s];
    // spin-flip partner: complementing the bits maps sector k onto n - k in
    // reversed index order, so an invariant pair shares one propagation
    const std::size_t partner = blocks.size() - 1 - s;
    const bool mirrored = options.use_sectors && partner < s && blocks[partner].h0.reverse() == b.h0 &&
                          blocks[partner].h1.reverse() == b.h1;
    done[s] = mirrored ? ComplexMatrix(done[partner].reverse()) : propagate_block(b, schedule, protocol, method);
    const ComplexMatrix& ub = done[s];
    const double d = unitarity_defect(ub);
    defect_sq += d * d;
    for (std::size_t j = 0; j < b.indices.size(); ++j) {
      for (std::size_t i = 0; i < b.indices.size(); ++i) {
        u(b.indices[i], b.indices[j]) = ub(static_cast<Index>(i), static_cast<Index>(j));
      }
    }
  }
  const double defect = std::sqrt(defect_sq);
  if (defect > options.max_unitarity_defect) {
    throw NumericalError("propagate: unitarity defect " + std::to_string(defect) + " exceeds " +
                         std::to_string(options.max_unitarity_defect));
  }
  return PropagatorResult{OperatorMatrix(std::move(u), false), dt, method, defect, schedule.steps.size()};
}

spectral::DensityMatrix evolve_density(const spectral::DensityMatrix& rho0, const PropagatorResult& u) {
  if (rho0.dimension() != u.unitary.dimension()) throw InvalidArgument("evolve_density: dimension mismatch");
  const ComplexMatrix& um = u.unitary.matrix();
  ComplexMatrix rho = um * rho0.matrix() * um.adjoint();
  // renormalize round-off drift in the trace, a larger defect still throws
  const double tr = rho.trace().real();
  if (std::abs(tr - 1.0) <= 1e-8) rho /= tr;
  return spectral::DensityMatrix::trusted(std::move(rho));
}

double transfer_fidelity(const spectral::SpectralDecomposition& spec_i,
                         const spectral::SpectralDecomposition& spec_f, const ComplexMatrix& u, double beta) {
  if (spec_i.dimension() != spec_f.dimension() || u.rows() != spec_i.dimension()) {
    throw InvalidArgument("transfer_fidelity: dimension mismatch");
  }
  // sqrt(U rho_i U^dag) sqrt(rho_f) = U V_i diag(sqrt p) V_i^dag U^dag V_f diag(sqrt q) V_f^dag,
  // whose singular values are those of diag(sqrt p) (V_f^dag U V_i)^dag diag(sqrt q).
  const RealVector sp = spectral::boltzmann_weights(spec_i, beta).cwiseSqrt();
  const RealVector sq = spectral::boltzmann_weights(spec_f, beta).cwiseSqrt();
  const ComplexMatrix k = spec_f.eigenvectors.adjoint() * u * spec_i.eigenvectors;
  const ComplexMatrix x = sp.cast<Complex>().asDiagonal() * k.adjoint() * sq.cast<Complex>().asDiagonal();
  return spectral::fidelity_from_square_roots(x, ComplexMatrix::Identity(x.rows(), x.cols()));
}

double spectral_response(const DriveProtocol& p, double omega) {
  switch (p.kind()) {
    case ProtocolKind::quench: return p.lambda_final() * p.lambda_final();
    case ProtocolKind::ramp_hold: {
      const double t_r = p.ramp_end();
      const double amp = p.velocity() * t_r;
      const double s = sinc(0.5 * omega * t_r);
      return amp * amp * s * s;
    }
    case ProtocolKind::sampled: {
      Complex total{0.0, 0.0};
      const auto& s = p.samples();
      for (std::size_t j = 0; j + 1 < s.size(); ++j) {
        const double width = s[j + 1].first - s[j].first;
        const double slope = (s[j + 1].second - s[j].second) / width;
        if (slope == 0.0) continue;
        total += slope * width * std::exp(kI * (omega * s[j].first)) * phi_imag(omega * width);
      }
      return std::norm(total);
    }
  }
  return 0.0;
}

double spectral_response_deficit(const DriveProtocol& p, double omega) {
  switch (p.kind()) {
    case ProtocolKind::quench: return 0.0;
    case ProtocolKind::ramp_hold: {
      const double t_r = p.ramp_end();
      const double amp = p.velocity() * t_r;
      return amp * amp * one_minus_sinc_sq(0.5 * omega * t_r);
    }
    case ProtocolKind::sampled: {
      const double l = p.lambda_end();
      return l * l - spectral_response(p, omega);
    }
  }
  return 0.0;
}

ConvergenceReport convergence_probe(const OperatorMatrix& h0, const OperatorMatrix& h1,
                                    const DriveProtocol& protocol, double dt, Method method, double beta,
                                    const PropagateOptions& options, spectral::FidelityConvention convention) {
  ConvergenceReport r;
  r.dt = dt;
  r.coarse = propagate(h0, h1, protocol, dt, method, options);
  r.fine = propagate(h0, h1, protocol, 0.5 * dt, method, options);
  r.unitary_change = (r.coarse.unitary.matrix() - r.fine.unitary.matrix()).norm();

  const OperatorMatrix hf = spin::assemble(h0, h1, protocol.lambda_end());
  spectral::SpectralDecomposition spec_i, spec_f;
  if (options.use_sectors) {
    const auto sectors = spin::magnetization_sectors(sites_for_dimension(h0.dimension()));
    spec_i = spectral::eigendecompose_blocked(h0, sectors);
    spec_f = spectral::eigendecompose_blocked(hf, sectors);
  } else {
    spec_i = spectral::eigendecompose(h0);
    spec_f = spectral::eigendecompose(hf);
  }
  r.infidelity_coarse = spectral::infidelity_from_fidelity(
      transfer_fidelity(spec_i, spec_f, r.coarse.unitary.matrix(), beta), convention);
  r.infidelity_fine = spectral::infidelity_from_fidelity(
      transfer_fidelity(spec_i, spec_f, r.fine.unitary.matrix(), beta), convention);
  r.infidelity_shift = std::abs(r.infidelity_coarse - r.infidelity_fine);
  r.relative_shift = r.infidelity_fine > 0.0 ? r.infidelity_shift / r.infidelity_fine
                                             : (r.infidelity_shift > 0.0 ? 1.0 : 0.0);
  return r;
}

}  // namespace workstat::drive
