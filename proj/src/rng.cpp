#include "loralab/rng.hpp"

#include <cmath>
#include <numbers>

namespace loralab::num {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
constexpr std::uint64_t kSplitSalt = 0x8CB92BA72F3D8DD7ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngState::RngState(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed + mix64(stream ^ kStreamSalt))) {}

std::uint64_t RngState::next_u64() {
  const std::uint64_t x = key_ + counter_ * kGolden;
  ++counter_;
  return mix64(x);
}

double RngState::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

int RngState::bernoulli() { return static_cast<int>(next_u64() >> 63); }

std::uint64_t RngState::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Lemire's nearly-divisionless rejection.
  const std::uint64_t threshold = (0 - n) % n;
  while (true) {
    const std::uint64_t x = next_u64();
    __extension__ using u128 = unsigned __int128;
    const u128 m = static_cast<u128>(x) * n;
    if (static_cast<std::uint64_t>(m) >= threshold) {
      return static_cast<std::uint64_t>(m >> 64);
    }
  }
}

RngState RngState::split(std::uint64_t child) const {
  return RngState(mix64(key_ ^ kSplitSalt), child);
}

}  // namespace loralab::num
