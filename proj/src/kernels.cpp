#include "loralab/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "loralab/errors.hpp"

namespace loralab::kernels {

namespace {

double loss_at(const net::PretrainedNet& net, const net::LoraAdapter& adapter,
               const Dataset& data, std::size_t i) {
  const auto pred = net::forward_lora(net, adapter, data.inputs.row(i));
  const auto y = data.targets.row(i);
  double sq = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double diff = pred[k] - y[k];
    sq += diff * diff;
  }
  return std::min(1.0, std::sqrt(sq));
}

double sign_sup(const num::Matrix& table, const num::RngState& rng, std::size_t draw,
                std::vector<int>& signs) {
  auto stream = rng.split(draw);
  const std::size_t m = table.cols();
  for (std::size_t i = 0; i < m; ++i) signs[i] = stream.rademacher();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < table.rows(); ++f) {
    const auto row = table.row(f);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += signs[i] * row[i];
    best = std::max(best, s / static_cast<double>(m));
  }
  return best;
}

double sup_distance(const num::Matrix& values, std::size_t a, std::size_t b) {
  const auto ra = values.row(a);
  const auto rb = values.row(b);
  double d = 0.0;
  for (std::size_t j = 0; j < ra.size(); ++j) d = std::max(d, std::abs(ra[j] - rb[j]));
  return d;
}

double smallest_sv(std::size_t d_out, std::size_t r, const num::RngState& rng,
                   std::size_t trial) {
  auto stream = rng.split(trial);
  const auto g = num::sample_gaussian(stream, d_out, r, 1.0);
  return num::svd(g).singular_values.back();
}

std::int64_t sign_sum(std::size_t n, const num::RngState& rng, std::size_t trial) {
  auto stream = rng.split(trial);
  std::int64_t ones = 0;
  std::size_t left = n;
  while (left >= 64) {
    ones += std::popcount(stream.next_u64());
    left -= 64;
  }
  if (left > 0) ones += std::popcount(stream.next_u64() >> (64 - left));
  return 2 * ones - static_cast<std::int64_t>(n);
}

void check_losses(const Dataset& data, std::span<double> out) {
  if (out.size() != data.size()) throw InvalidInput("loss buffer length differs from dataset");
}

void check_table(const num::Matrix& table) {
  if (table.empty()) throw InvalidInput("empty loss table");
}

void check_distance(const num::Matrix& values, std::size_t center, std::span<double> min_dist) {
  if (center >= values.rows() || min_dist.size() != values.rows()) {
    throw InvalidInput("cover distance buffer mismatch");
  }
}

void check_sv(std::size_t d_out, std::size_t r) {
  if (d_out == 0 || r == 0) throw InvalidParameter("matrix dimensions must be positive");
}

}  // namespace

namespace serial {

void sample_losses(const net::PretrainedNet& net, const net::LoraAdapter& adapter,
                   const Dataset& data, std::span<double> out) {
  check_losses(data, out);
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = loss_at(net, adapter, data, i);
}

void rademacher_sups(const num::Matrix& table, const num::RngState& rng,
                     std::span<double> sups) {
  check_table(table);
  std::vector<int> signs(table.cols());
  for (std::size_t k = 0; k < sups.size(); ++k) sups[k] = sign_sup(table, rng, k, signs);
}

void update_min_distance(const num::Matrix& values, std::size_t center,
                         std::span<double> min_dist) {
  check_distance(values, center, min_dist);
  for (std::size_t i = 0; i < values.rows(); ++i) {
    min_dist[i] = std::min(min_dist[i], sup_distance(values, i, center));
  }
}

void smallest_singular_values(std::size_t d_out, std::size_t r, const num::RngState& rng,
                              std::span<double> out) {
  check_sv(d_out, r);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = smallest_sv(d_out, r, rng, k);
}

void rademacher_sums(std::size_t n, const num::RngState& rng, std::span<std::int64_t> out) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = sign_sum(n, rng, k);
}

}  // namespace serial

namespace omp {

void sample_losses(const net::PretrainedNet& net, const net::LoraAdapter& adapter,
                   const Dataset& data, std::span<double> out) {
  check_losses(data, out);
  const auto n = static_cast<std::int64_t>(data.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = loss_at(net, adapter, data, static_cast<std::size_t>(i));
  }
}

void rademacher_sups(const num::Matrix& table, const num::RngState& rng,
                     std::span<double> sups) {
  check_table(table);
  const auto n = static_cast<std::int64_t>(sups.size());
#pragma omp parallel
  {
    std::vector<int> signs(table.cols());
#pragma omp for schedule(static)
    for (std::int64_t k = 0; k < n; ++k) {
      sups[static_cast<std::size_t>(k)] =
          sign_sup(table, rng, static_cast<std::size_t>(k), signs);
    }
  }
}

void update_min_distance(const num::Matrix& values, std::size_t center,
                         std::span<double> min_dist) {
  check_distance(values, center, min_dist);
  const auto n = static_cast<std::int64_t>(values.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    min_dist[u] = std::min(min_dist[u], sup_distance(values, u, center));
  }
}

void smallest_singular_values(std::size_t d_out, std::size_t r, const num::RngState& rng,
                              std::span<double> out) {
  check_sv(d_out, r);
  const auto n = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t k = 0; k < n; ++k) {
    out[static_cast<std::size_t>(k)] = smallest_sv(d_out, r, rng, static_cast<std::size_t>(k));
  }
}

void rademacher_sums(std::size_t n, const num::RngState& rng, std::span<std::int64_t> out) {
  const auto count = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < count; ++k) {
    out[static_cast<std::size_t>(k)] = sign_sum(n, rng, static_cast<std::size_t>(k));
  }
}

}  // namespace omp

void sample_losses(const net::PretrainedNet& net, const net::LoraAdapter& adapter,
                   const Dataset& data, std::span<double> out, Exec exec) {
  exec == Exec::Serial ? serial::sample_losses(net, adapter, data, out)
                       : omp::sample_losses(net, adapter, data, out);
}

void rademacher_sups(const num::Matrix& table, const num::RngState& rng,
                     std::span<double> sups, Exec exec) {
  exec == Exec::Serial ? serial::rademacher_sups(table, rng, sups)
                       : omp::rademacher_sups(table, rng, sups);
}

void update_min_distance(const num::Matrix& values, std::size_t center,
                         std::span<double> min_dist, Exec exec) {
  exec == Exec::Serial ? serial::update_min_distance(values, center, min_dist)
                       : omp::update_min_distance(values, center, min_dist);
}

void smallest_singular_values(std::size_t d_out, std::size_t r, const num::RngState& rng,
                              std::span<double> out, Exec exec) {
  exec == Exec::Serial ? serial::smallest_singular_values(d_out, r, rng, out)
                       : omp::smallest_singular_values(d_out, r, rng, out);
}

void rademacher_sums(std::size_t n, const num::RngState& rng, std::span<std::int64_t> out,
                     Exec exec) {
  exec == Exec::Serial ? serial::rademacher_sums(n, rng, out)
                       : omp::rademacher_sums(n, rng, out);
}

}  // namespace loralab::kernels
