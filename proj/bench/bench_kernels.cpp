// Serial reference against the OpenMP kernel for each parallel hot path.
// Set OMP_NUM_THREADS to control the parallel side.

#include <benchmark/benchmark.h>

#include "sfbd/deconv_kde.hpp"
#include "sfbd/denoiser.hpp"
#include "sfbd/diagnostics.hpp"
#include "sfbd/distributions.hpp"
#include "sfbd/losses.hpp"
#include "sfbd/net.hpp"
#include "sfbd/sampler.hpp"
#include "sfbd/schedule.hpp"

using namespace sfbd;

namespace {

const NoiseSchedule kSched;

Dataset ring(std::size_t n, std::uint64_t seed) {
  return sample_distribution(DistributionSpec::ring(8, 1.0, 0.1), n, seed);
}

DenoiserNet bench_net() {
  NetTopology topo;
  topo.input_dim = 2;
  topo.hidden = {128, 128};
  DenoiserNet net = DenoiserNet::initialized(topo, kSched, 1);
  Stream rng(1, "perturb", 0);
  for (double& p : net.params()) p += 0.05 * rng.normal();
  return net;
}

template <bool Serial>
void BM_grad_params(benchmark::State& state) {
  const DenoiserNet net = bench_net();
  const Dataset batch = ring(static_cast<std::size_t>(state.range(0)), 2);
  const DenoisingEvaluator ev(batch, TimeSampler{}, kSched, 3);
  for (auto _ : state)
    benchmark::DoNotOptimize(Serial ? grad_params_serial(net, ev) : grad_params(net, ev));
}

template <bool Serial>
void BM_solve_backward(benchmark::State& state) {
  const DenoiserNet net = bench_net();
  const CorruptionSpec spec = corruption_for_sigma(kSched, 0.59);
  const Dataset noisy = corrupt_dataset(ring(static_cast<std::size_t>(state.range(0)), 4), spec, 5);
  SolverConfig cfg;
  cfg.t_start = spec.zeta;
  for (auto _ : state) {
    Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(
        noisy.points.data(), 2, static_cast<Eigen::Index>(noisy.size()));
    if (Serial)
      solve_backward_blocks_serial(net, x, cfg, kSched, 6, "backward");
    else
      solve_backward_blocks(net, x, cfg, kSched, 6, "backward");
    benchmark::DoNotOptimize(x.data());
  }
}

template <bool Serial>
void BM_corrupt(benchmark::State& state) {
  const Dataset clean = ring(static_cast<std::size_t>(state.range(0)), 7);
  const CorruptionSpec spec = corruption_for_sigma(kSched, 0.2);
  for (auto _ : state)
    benchmark::DoNotOptimize(Serial ? corrupt_dataset_serial(clean, spec, 8)
                                    : corrupt_dataset(clean, spec, 8));
}

template <bool Serial>
void BM_deconv(benchmark::State& state) {
  const Dataset y = corrupt_dataset(
      sample_distribution(DistributionSpec::standard_normal(1), static_cast<std::size_t>(state.range(0)), 9),
      corruption_for_sigma(kSched, 0.2), 10);
  const auto grid = uniform_grid(-6, 6, 1201);
  const DeconvKernelSpec spec;
  const double lambda = bandwidth(y.size(), 0.2, spec);
  const DeconvKernel kernel(spec, 0.2, lambda, 12.0 / lambda + 1.0);
  for (auto _ : state)
    benchmark::DoNotOptimize(Serial ? deconv_estimate_serial(y.points, kernel, grid)
                                    : deconv_estimate(y.points, kernel, grid));
}

template <bool Serial>
void BM_mmd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset p = ring(n, 11), q = ring(n, 12);
  for (auto _ : state)
    benchmark::DoNotOptimize(Serial ? mmd_serial(p, q, 0.2) : mmd(p, q, 0.2));
}

template <bool Serial>
void BM_kl_knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Dataset p = ring(n, 13), q = ring(n, 14);
  for (auto _ : state)
    benchmark::DoNotOptimize(Serial ? kl_knn_serial(p, q, 5, 20, 15) : kl_knn(p, q, 5, 20, 15));
}

}  // namespace

BENCHMARK(BM_grad_params<true>)->Name("grad_params/serial")->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_grad_params<false>)->Name("grad_params/parallel")->Arg(1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_solve_backward<true>)->Name("solve_backward/serial")->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_solve_backward<false>)->Name("solve_backward/parallel")->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_corrupt<true>)->Name("corrupt_dataset/serial")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_corrupt<false>)->Name("corrupt_dataset/parallel")->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_deconv<true>)->Name("deconv_estimate/serial")->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_deconv<false>)->Name("deconv_estimate/parallel")->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mmd<true>)->Name("mmd/serial")->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mmd<false>)->Name("mmd/parallel")->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kl_knn<true>)->Name("kl_knn/serial")->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_kl_knn<false>)->Name("kl_knn/parallel")->Arg(5000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
