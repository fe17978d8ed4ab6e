#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

namespace stochlab {

// SplitMix64 finalizer. A bijection on 64-bit words, so distinct inputs never
// collide.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed of trial `index` under `master`: mix64(master ^ mix64(index)).
// Stateless, and injective in `index` for a fixed master.
constexpr std::uint64_t derive_trial_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(master ^ mix64(index));
}

// Independent stream families hanging off one seed.
enum class StreamKind : std::uint64_t {
  bond_flag = 1,
  site_flag = 2,
  long_range = 3,
  contact = 4,
  idle_contact = 5,
  walk = 6,
  cluster_walk = 7,
  neural = 8,
  initial = 9,
  resample = 10,
};

constexpr std::uint64_t stream_seed(std::uint64_t seed, StreamKind kind,
                                    std::uint64_t index = 0) noexcept {
  return derive_trial_seed(derive_trial_seed(seed, static_cast<std::uint64_t>(kind)), index);
}

// Top 53 bits as a double in [0, 1).
constexpr double to_unit(std::uint64_t x) noexcept {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Counter-based Bernoulli draw: depends only on (key, index), never on call order.
constexpr bool keyed_bernoulli(std::uint64_t key, std::uint64_t index, double p) noexcept {
  return to_unit(mix64(key ^ mix64(index))) < p;
}

__extension__ using uint128 = unsigned __int128;

// xoshiro256** seeded through SplitMix64. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept {
    std::uint64_t z = seed;
    for (auto& word : state_) {
      word = mix64(z);
      z += 0x9e3779b97f4a7c15ULL;
    }
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }

  double uniform() noexcept { return to_unit((*this)()); }

  // Uniform on (0, 1); keeps exponential waiting times strictly positive.
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate) noexcept { return -std::log(uniform_open()) / rate; }

  // Unbiased integer in [0, n) (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n) noexcept {
    uint128 m = static_cast<uint128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = -n % n;
      while (low < threshold) {
        m = static_cast<uint128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t state_[4];
};

// Serves random bits in a fixed order (least significant first, word by word)
// no matter how requests are batched, so a walk stepped one bit at a time and
// the same walk stepped in blocks trace the same path.
class BitStream {
 public:
  explicit BitStream(std::uint64_t seed) noexcept : rng_(seed) {}

  bool bit() noexcept {
    if (left_ == 0) refill();
    const bool b = word_ & 1U;
    word_ >>= 1;
    --left_;
    return b;
  }

  // Number of one-bits among the next k bits, 0 <= k <= 64.
  int count_ones(int k) noexcept {
    int ones = 0;
    if (k > left_) {
      ones = std::popcount(word_);
      k -= left_;
      refill();
    }
    if (k == 0) return ones;
    const std::uint64_t mask = k == 64 ? ~0ULL : ((1ULL << k) - 1);
    ones += std::popcount(word_ & mask);
    word_ = k == 64 ? 0 : word_ >> k;
    left_ -= k;
    return ones;
  }

  // Two bits as a direction in {0, 1, 2, 3}.
  int direction() noexcept {
    const int lo = bit();
    return lo | (bit() << 1);
  }

 private:
  void refill() noexcept {
    word_ = rng_();
    left_ = 64;
  }

  Rng rng_;
  std::uint64_t word_ = 0;
  int left_ = 0;
};

}  // namespace stochlab
