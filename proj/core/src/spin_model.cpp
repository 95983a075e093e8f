#include "workstat/spin_model.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "workstat/errors.hpp"

namespace workstat::spin {

void validate(const SpinChainSpec& spec, int max_sites) {
  if (spec.n_sites < 2) {
    throw InvalidArgument("n_sites must be >= 2, got " + std::to_string(spec.n_sites));
  }
  if (spec.n_sites > max_sites) {
    throw InvalidArgument("n_sites = " + std::to_string(spec.n_sites) +
                          " exceeds the configured maximum of " + std::to_string(max_sites));
  }
  if (!std::isfinite(spec.coupling)) {
    throw InvalidArgument("coupling must be finite");
  }
}

Index dimension(const SpinChainSpec& spec) { return Index{1} << spec.n_sites; }

int sz_value(std::uint64_t state, int site, int n_sites) noexcept {
  const int shift = n_sites - 1 - site;
  return ((state >> shift) & 1u) == 0 ? 1 : -1;
}

OperatorMatrix build_hopping(const SpinChainSpec& spec, int max_sites) {
  validate(spec, max_sites);
  const int n = spec.n_sites;
  const Index dim = dimension(spec);
  ComplexMatrix h = ComplexMatrix::Zero(dim, dim);
  for (Index b = 0; b < dim; ++b) {
    const auto state = static_cast<std::uint64_t>(b);
    for (int i = 0; i + 1 < n; ++i) {
      if (sz_value(state, i, n) == sz_value(state, i + 1, n)) continue;
      const std::uint64_t flip = (std::uint64_t{1} << (n - 1 - i)) | (std::uint64_t{1} << (n - 2 - i));
      h(static_cast<Index>(state ^ flip), b) += spec.coupling;
    }
  }
  return OperatorMatrix(std::move(h), true);
}

OperatorMatrix build_zz(const SpinChainSpec& spec, int max_sites) {
  validate(spec, max_sites);
  const int n = spec.n_sites;
  const Index dim = dimension(spec);
  RealVector diag(dim);
  for (Index b = 0; b < dim; ++b) {
    const auto state = static_cast<std::uint64_t>(b);
    int bonds = 0;
    for (int i = 0; i + 1 < n; ++i) bonds += sz_value(state, i, n) * sz_value(state, i + 1, n);
    diag(b) = spec.coupling * bonds;
  }
  return OperatorMatrix::diagonal(diag);
}

OperatorMatrix total_magnetization(int n_sites, int max_sites) {
  validate(SpinChainSpec{n_sites, 1.0}, max_sites);
  const Index dim = Index{1} << n_sites;
  RealVector diag(dim);
  for (Index b = 0; b < dim; ++b) {
    diag(b) = n_sites - 2 * std::popcount(static_cast<std::uint64_t>(b));
  }
  return OperatorMatrix::diagonal(diag);
}

OperatorMatrix assemble(const OperatorMatrix& h0, const OperatorMatrix& h1, double lambda) {
  if (h0.dimension() != h1.dimension()) {
    throw InvalidArgument("assemble: dimension mismatch " + std::to_string(h0.dimension()) +
                          " vs " + std::to_string(h1.dimension()));
  }
  if (!std::isfinite(lambda)) throw InvalidArgument("assemble: lambda must be finite");
  if (lambda == 0.0) return h0;
  return OperatorMatrix(h0.matrix() + lambda * h1.matrix(), h0.hermitian() && h1.hermitian());
}

SectorList magnetization_sectors(int n_sites) {
  if (n_sites < 2) throw InvalidArgument("magnetization_sectors: n_sites must be >= 2");
  if (n_sites > 30) throw InvalidArgument("magnetization_sectors: n_sites too large");
  SectorList sectors(static_cast<std::size_t>(n_sites) + 1);
  const Index dim = Index{1} << n_sites;
  for (Index b = 0; b < dim; ++b) {
    sectors[static_cast<std::size_t>(std::popcount(static_cast<std::uint64_t>(b)))].push_back(b);
  }
  return sectors;
}

bool is_block_diagonal(const ComplexMatrix& op, const SectorList& sectors) {
  std::vector<std::size_t> label(static_cast<std::size_t>(op.rows()));
  for (std::size_t s = 0; s < sectors.size(); ++s) {
    for (Index idx : sectors[s]) label[static_cast<std::size_t>(idx)] = s;
  }
  for (Index j = 0; j < op.cols(); ++j) {
    for (Index i = 0; i < op.rows(); ++i) {
      if (label[static_cast<std::size_t>(i)] != label[static_cast<std::size_t>(j)] &&
          op(i, j) != Complex(0.0, 0.0)) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace workstat::spin
