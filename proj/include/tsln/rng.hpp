#ifndef TSLN_RNG_HPP
#define TSLN_RNG_HPP

#include <cmath>
#include <cstdint>
#include <string_view>

namespace tsln {

// Counter-based generator (SplitMix64 over a keyed counter). Streams are
// derived by hashing (seed, label, index), so parallel consumers cannot
// perturb each other's sequences and results are bit-identical across
// platforms and thread schedules.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key), counter_(0) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Derive a stream key from a parent seed, a label and an index.
  static std::uint64_t stream(std::uint64_t seed, std::string_view label,
                              std::uint64_t index = 0) {
    std::uint64_t h = mix(seed);
    for (char c : label) h = mix(h ^ static_cast<std::uint64_t>(c));
    return mix(h ^ index);
  }

  std::uint64_t next_u64() { return mix(key_ ^ counter_++); }

  // uniform in (0,1)
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one deviate per call, cache discarded for determinism
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * M_PI * u2);
  }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // rejection-free modulo is fine here; n is tiny relative to 2^64
    return next_u64() % n;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace tsln

#endif
