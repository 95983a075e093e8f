#pragma once

#include <cstdint>
#include <vector>

#include "workstat/operator.hpp"

/// Open XXZ chain
///
///   H(t) = H0 + lambda(t) H1,
///   H0 = J sum_{i<N-1} (s+_i s-_{i+1} + s-_i s+_{i+1}),
///   H1 = J sum_{i<N-1} sz_i sz_{i+1}.
///
/// Conventions:
///  - s+- = (sx +- i sy) / 2, so H0 has amplitude exactly J between the
///    antiparallel pair states |up,down> and |down,up> of every bond.
///  - Computational basis index b, site 0 is the most significant bit.
///    Bit value 0 is spin up (sz = +1), bit value 1 is spin down (sz = -1).
///    For N = 2 the basis order is (uu, ud, du, dd).
namespace workstat::spin {

enum class Boundary { open };

struct SpinChainSpec {
  int n_sites = 2;
  double coupling = 1.0;
  Boundary boundary = Boundary::open;

  friend bool operator==(const SpinChainSpec&, const SpinChainSpec&) = default;
};

inline constexpr int kDefaultMaxSites = 14;

/// Throws InvalidArgument for n_sites < 2, n_sites > max_sites, or a
/// non-finite coupling.
void validate(const SpinChainSpec& spec, int max_sites = kDefaultMaxSites);

Index dimension(const SpinChainSpec& spec);

/// +1 for spin up, -1 for spin down.
int sz_value(std::uint64_t state, int site, int n_sites) noexcept;

OperatorMatrix build_hopping(const SpinChainSpec& spec, int max_sites = kDefaultMaxSites);
OperatorMatrix build_zz(const SpinChainSpec& spec, int max_sites = kDefaultMaxSites);

/// sum_i sz_i, diagonal.
OperatorMatrix total_magnetization(int n_sites, int max_sites = kDefaultMaxSites);

/// h0 + lambda * h1.
OperatorMatrix assemble(const OperatorMatrix& h0, const OperatorMatrix& h1, double lambda);

/// Basis indices grouped by number of down spins (Hamming weight), ascending
/// weight, indices ascending inside each group.
using SectorList = std::vector<std::vector<Index>>;
SectorList magnetization_sectors(int n_sites);

/// True when every entry of `op` that couples two different sectors is zero.
bool is_block_diagonal(const ComplexMatrix& op, const SectorList& sectors);

}  // namespace workstat::spin
