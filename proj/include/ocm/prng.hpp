#ifndef OCM_PRNG_HPP
#define OCM_PRNG_HPP

#include <cstdint>

namespace ocm {

/// splitmix64: tiny, fast, and the whole generator state is one u64, so it
/// checkpoints and hashes along with thread locals.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed = 0) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, bound). bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }
};

/// Derives a per-thread stream from (run seed, thread id).
inline std::uint64_t thread_seed(std::uint64_t runSeed, std::uint32_t tid) {
  SplitMix64 mix(runSeed ^ (0x632be59bd9b4e019ULL * (tid + 1)));
  return mix.next();
}

}  // namespace ocm

#endif  // OCM_PRNG_HPP
