// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "cifar/fit.hpp"
#include "cifar/kernels.hpp"
#include "cifar/sweep.hpp"
#include "cifar/time_domain.hpp"

namespace {

using namespace cifar;

SpinModeParams narrow_mode() {
  return SpinModeParams::from_effective_damping(hz_to_angular(1e6), hz_to_angular(1.4e3), hz_to_angular(1e4), -0.05);
}

OpticalConfig optics45() {
  OpticalConfig o;
  o.theta = deg_to_rad(45.0);
  return o;
}

std::vector<double> omega_grid(int n) {
  std::vector<double> w;
  for (double f : linear_grid(1e6, 1e5, n)) w.push_back(hz_to_angular(f));
  return w;
}

template <bool Parallel>
void BM_ResponseSweep(benchmark::State& state) {
  const std::vector<SpinModeParams> modes = {narrow_mode()};
  const std::vector<double> w = omega_grid(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto r = Parallel ? response_sweep(w, modes, optics45()) : response_sweep_reference(w, modes, optics45());
    benchmark::DoNotOptimize(r.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ResponseSweep<false>)->Name("response_sweep/serial")->Arg(1 << 16);
BENCHMARK(BM_ResponseSweep<true>)->Name("response_sweep/openmp")->Arg(1 << 16);

template <bool Parallel>
void BM_TransferDiscrepancy(benchmark::State& state) {
  const auto count = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    double d = Parallel ? max_transfer_discrepancy(count, 7) : max_transfer_discrepancy_reference(count, 7);
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TransferDiscrepancy<false>)->Name("transfer_discrepancy/serial")->Arg(100000);
BENCHMARK(BM_TransferDiscrepancy<true>)->Name("transfer_discrepancy/openmp")->Arg(100000);

template <bool Parallel>
void BM_GenerateSweep(benchmark::State& state) {
  const std::vector<SpinModeParams> modes = {narrow_mode()};
  const std::vector<double> grid = default_grid(modes.front());
  NoiseModel nm{2e-3, 1e-2, 1e6, 1.4e3, 11};
  const int scans = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto t = Parallel ? generate_sweep(modes, optics45(), grid, nm, scans)
                      : generate_sweep_reference(modes, optics45(), grid, nm, scans);
    benchmark::DoNotOptimize(t.data());
  }
}
BENCHMARK(BM_GenerateSweep<false>)->Name("generate_sweep/serial")->Arg(64);
BENCHMARK(BM_GenerateSweep<true>)->Name("generate_sweep/openmp")->Arg(64);

template <bool Parallel>
void BM_SteadyStateSweep(benchmark::State& state) {
  const std::vector<SpinModeParams> modes = {SpinModeParams::from_effective_damping(
      hz_to_angular(2e4), hz_to_angular(2e3), hz_to_angular(5e3), -0.05)};
  const std::vector<double> grid = linear_grid(2e4, 1e4, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto t = Parallel ? steady_state_sweep(modes, optics45(), grid) : steady_state_sweep_reference(modes, optics45(), grid);
    benchmark::DoNotOptimize(t.amplitude.data());
  }
}
BENCHMARK(BM_SteadyStateSweep<false>)->Name("steady_state_sweep/serial")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SteadyStateSweep<true>)->Name("steady_state_sweep/openmp")->Arg(8)->Unit(benchmark::kMillisecond);

template <bool Parallel>
void BM_FitBatch(benchmark::State& state) {
  const std::vector<SpinModeParams> modes = {narrow_mode()};
  const std::vector<double> grid = default_grid(modes.front());
  NoiseModel nm{2e-3, 1e-2, 1e6, 1.4e3, 3};
  const std::vector<SweepTrace> traces =
      generate_sweep(modes, optics45(), grid, nm, static_cast<int>(state.range(0)));
  const FitModelSpec spec = FitModelSpec::single_mode();
  for (auto _ : state) {
    auto r = Parallel ? fit_batch(traces, spec) : fit_batch_reference(traces, spec);
    benchmark::DoNotOptimize(r.data());
  }
}
BENCHMARK(BM_FitBatch<false>)->Name("fit_batch/serial")->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitBatch<true>)->Name("fit_batch/openmp")->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
