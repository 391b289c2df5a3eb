// Serial reference kernels against their OpenMP versions. Run with
// OMP_NUM_THREADS set to compare thread counts.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "loralab/empiric.hpp"
#include "loralab/kernels.hpp"

namespace {

using loralab::Exec;
using loralab::num::Matrix;
using loralab::num::RngState;
namespace emp = loralab::emp;
namespace kernels = loralab::kernels;
namespace net = loralab::net;

Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Exec::Serial : Exec::Parallel;
}

void BM_SampleLosses(benchmark::State& state) {
  net::Architecture arch;
  arch.d = 16;
  arch.D = 1;
  arch.T = 3;
  arch.W = 64;
  arch.r = 4;
  RngState rng(1);
  const auto pre = net::random_pretrained(rng, arch);
  const auto adapter = emp::sample_box_adapter(rng, net::init_adapter(rng, arch, 1.0, 0.5));
  const emp::SyntheticTask task{pre, std::nullopt, 0.1, emp::InputLaw::UniformCube};
  const auto data = task.sample(rng, 4096);
  std::vector<double> out(data.size());
  for (auto _ : state) {
    kernels::sample_losses(pre, adapter, data, out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_RademacherSups(benchmark::State& state) {
  RngState rng(2);
  const Matrix table = loralab::num::sample_gaussian(rng, 256, 512, 1.0);
  std::vector<double> sups(256);
  for (auto _ : state) {
    kernels::rademacher_sups(table, RngState(3), sups, exec_of(state));
    benchmark::DoNotOptimize(sups.data());
  }
}

void BM_UpdateMinDistance(benchmark::State& state) {
  RngState rng(4);
  const Matrix values = loralab::num::sample_gaussian(rng, 20000, 64, 1.0);
  std::vector<double> dist(values.rows(), std::numeric_limits<double>::infinity());
  for (auto _ : state) {
    kernels::update_min_distance(values, 0, dist, exec_of(state));
    benchmark::DoNotOptimize(dist.data());
  }
}

void BM_SmallestSingularValues(benchmark::State& state) {
  std::vector<double> out(512);
  for (auto _ : state) {
    kernels::smallest_singular_values(128, 8, RngState(5), out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_RademacherSums(benchmark::State& state) {
  std::vector<std::int64_t> out(100000);
  for (auto _ : state) {
    kernels::rademacher_sums(1024, RngState(6), out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
}

// Argument 0 is the serial reference, 1 the OpenMP version.
BENCHMARK(BM_SampleLosses)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RademacherSups)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_UpdateMinDistance)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SmallestSingularValues)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RademacherSums)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
