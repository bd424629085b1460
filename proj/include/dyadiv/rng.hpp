#pragma once

#include <cstdint>

namespace dyadiv {

// SplitMix64 finalizer. Bijective on 64-bit words; the basis of all
// randomness in the library.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Named stream tags. Every consumer of randomness derives its own key from
// (seed, tag, indices), so results never depend on evaluation order or on
// how work is split across threads.
namespace stream {
constexpr std::uint64_t kDataset = 0x6461746173657431ULL;    // DGP draws
constexpr std::uint64_t kBootstrap = 0x626f6f7473747231ULL;  // resampling
constexpr std::uint64_t kMcRep = 0x6d635f7265705f31ULL;      // MC replication
constexpr std::uint64_t kMcBoot = 0x6d635f626f6f7431ULL;     // CI inside MC
}  // namespace stream

inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag) {
  return mix64(seed ^ mix64(tag));
}
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag,
                                std::uint64_t a) {
  return mix64(derive_key(seed, tag) ^ mix64(a));
}
inline std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag,
                                std::uint64_t a, std::uint64_t b) {
  return mix64(derive_key(seed, tag, a) ^ mix64(b + 0x517cc1b727220a95ULL));
}

// Counter-based generator: output i of a stream is mix64(key + i*gamma).
// Stateless apart from the counter, so streams can be split and replayed.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key), counter_(0) {}

  std::uint64_t next_u64() {
    return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform on [0,1).
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0,1); safe for quantile transforms.
  double next_uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the inverse CDF.
  double next_normal();

  bool next_bernoulli(double p) { return next_uniform() < p; }

  // Uniform integer in [0, n) by 128-bit multiply; avoids modulo bias.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Standard normal quantile (Wichura's AS 241, double precision).
double norm_quantile(double p);

}  // namespace dyadiv
