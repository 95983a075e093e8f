#include <benchmark/benchmark.h>

#include "workstat/drive.hpp"
#include "workstat/spectral.hpp"
#include "workstat/spin_model.hpp"
#include "workstat/work_statistics.hpp"

using namespace workstat;

namespace {

struct Chain {
  OperatorMatrix h0, h1;
  explicit Chain(int n) {
    const spin::SpinChainSpec spec{n, 2.0};
    h0 = spin::build_hopping(spec);
    h1 = spin::build_zz(spec);
  }
};

void BM_Eigendecompose(benchmark::State& state) {
  const Chain c(static_cast<int>(state.range(0)));
  const auto h = spin::assemble(c.h0, c.h1, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(spectral::eigendecompose(h));
}
BENCHMARK(BM_Eigendecompose)->DenseRange(4, 9)->Unit(benchmark::kMillisecond);

void BM_EigendecomposeBlocked(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Chain c(n);
  const auto h = spin::assemble(c.h0, c.h1, 0.1);
  const auto sectors = spin::magnetization_sectors(n);
  for (auto _ : state) benchmark::DoNotOptimize(spectral::eigendecompose_blocked(h, sectors));
}
BENCHMARK(BM_EigendecomposeBlocked)->DenseRange(4, 9)->Unit(benchmark::kMillisecond);

// 100 ramp steps; args: sites, method, sectors
void BM_Propagate(benchmark::State& state) {
  const Chain c(static_cast<int>(state.range(0)));
  const auto method = static_cast<drive::Method>(state.range(1));
  drive::PropagateOptions opts;
  opts.use_sectors = state.range(2) != 0;
  const auto protocol = drive::DriveProtocol::ramp_hold(0.1, 0.1, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(drive::propagate(c.h0, c.h1, protocol, 0.01, method, opts));
}
BENCHMARK(BM_Propagate)
    ->ArgsProduct({{6, 8}, {static_cast<int>(drive::Method::strang), static_cast<int>(drive::Method::midpoint_exact),
                            static_cast<int>(drive::Method::magnus4), static_cast<int>(drive::Method::yoshida4)},
                   {0, 1}})
    ->Unit(benchmark::kMillisecond);

void BM_TransferFidelity(benchmark::State& state) {
  const Chain c(static_cast<int>(state.range(0)));
  const auto si = spectral::eigendecompose(c.h0);
  const auto sf = spectral::eigendecompose(spin::assemble(c.h0, c.h1, 0.1));
  const auto u = drive::propagate(c.h0, c.h1, drive::DriveProtocol::quench(0.1, 1.0), 0.01,
                                  drive::Method::midpoint_exact);
  for (auto _ : state) benchmark::DoNotOptimize(drive::transfer_fidelity(si, sf, u.unitary.matrix(), 1.0));
}
BENCHMARK(BM_TransferFidelity)->DenseRange(4, 9)->Unit(benchmark::kMillisecond);

void BM_TpmDistribution(benchmark::State& state) {
  const Chain c(static_cast<int>(state.range(0)));
  const auto si = spectral::eigendecompose(c.h0);
  const auto sf = spectral::eigendecompose(spin::assemble(c.h0, c.h1, 0.1));
  const auto u = drive::propagate(c.h0, c.h1, drive::DriveProtocol::quench(0.1, 1.0), 0.01,
                                  drive::Method::midpoint_exact);
  for (auto _ : state) benchmark::DoNotOptimize(work::tpm_distribution(si, sf, u, 1.0));
}
BENCHMARK(BM_TpmDistribution)->DenseRange(4, 9)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
