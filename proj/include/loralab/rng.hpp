#pragma once

#include <cstdint>
#include <limits>

namespace loralab::num {

// Counter-based 64-bit generator. Output k of a stream is a SplitMix64
// finalizer applied to (key + k * golden), where the key is derived from
// (seed, stream). Streams split deterministically, so parallel work that
// takes split(i) for trial i is reproducible for any thread count.
//
// Satisfies UniformRandomBitGenerator.
class RngState {
 public:
  using result_type = std::uint64_t;

  RngState() : RngState(0, 0) {}
  RngState(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  result_type operator()() { return next_u64(); }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();
  // Fair coin: 0 or 1.
  int bernoulli();
  // +1 or -1 with equal probability.
  int rademacher() { return bernoulli() ? 1 : -1; }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Independent child stream. Does not advance this generator.
  RngState split(std::uint64_t child) const;

  friend bool operator==(const RngState& a, const RngState& b) {
    return a.seed_ == b.seed_ && a.stream_ == b.stream_ &&
           a.counter_ == b.counter_ && a.has_spare_ == b.has_spare_ &&
           (!a.has_spare_ || a.spare_ == b.spare_);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace loralab::num
