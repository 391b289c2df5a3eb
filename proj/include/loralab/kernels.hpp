#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>

#include "loralab/dataset.hpp"
#include "loralab/netcore.hpp"
#include "loralab/parallel.hpp"

// Data-parallel inner loops. Every kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp; both write
// per-index results, so outputs are bit-identical for any thread count.
// Per-trial randomness comes from rng.split(index).
namespace loralab::kernels {

#define LORALAB_KERNEL_DECLS                                                          \
  /* out[i] = min(1, ||f(x_i) - y_i||_2) */                                          \
  void sample_losses(const net::PretrainedNet& net, const net::LoraAdapter& adapter,  \
                     const Dataset& data, std::span<double> out);                     \
  /* sups[k] = max_f (1/m) sum_i sigma_ki table(f, i), sigma_k from rng.split(k) */   \
  void rademacher_sups(const num::Matrix& table, const num::RngState& rng,            \
                       std::span<double> sups);                                       \
  /* min_dist[i] = min(min_dist[i], max_j |values(i,j) - values(center,j)|) */        \
  void update_min_distance(const num::Matrix& values, std::size_t center,             \
                           std::span<double> min_dist);                               \
  /* out[k] = s_min of a standard Gaussian d_out x r matrix from rng.split(k) */      \
  void smallest_singular_values(std::size_t d_out, std::size_t r,                     \
                                const num::RngState& rng, std::span<double> out);     \
  /* out[k] = sum of n Rademacher signs drawn from rng.split(k) */                    \
  void rademacher_sums(std::size_t n, const num::RngState& rng,                       \
                       std::span<std::int64_t> out);

namespace serial {
LORALAB_KERNEL_DECLS
}  // namespace serial

namespace omp {
LORALAB_KERNEL_DECLS
}  // namespace omp

#undef LORALAB_KERNEL_DECLS

// Dispatch helpers.
void sample_losses(const net::PretrainedNet& net, const net::LoraAdapter& adapter,
                   const Dataset& data, std::span<double> out, Exec exec);
void rademacher_sups(const num::Matrix& table, const num::RngState& rng,
                     std::span<double> sups, Exec exec);
void update_min_distance(const num::Matrix& values, std::size_t center,
                         std::span<double> min_dist, Exec exec);
void smallest_singular_values(std::size_t d_out, std::size_t r, const num::RngState& rng,
                              std::span<double> out, Exec exec);
void rademacher_sums(std::size_t n, const num::RngState& rng, std::span<std::int64_t> out,
                     Exec exec);

// Runs fn(i) for i in [0, n). The first exception thrown by any iteration
// is rethrown after the loop.
template <class Fn>
void parallel_for(std::size_t n, Exec exec, Fn&& fn) {
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace loralab::kernels
