#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace shiftgauge {

// Seedable 64-bit generator (splitmix64 core) with named substreams.
// Every stochastic component draws from its own split so that adding or
// reordering one consumer never shifts another's stream. Distributions are
// hand-rolled: the standard library's are implementation-defined, and
// reproducibility of whole runs is a contract here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  // Child stream keyed by (original seed, label). Independent of how many
  // values the parent has drawn.
  Rng split(std::string_view label) const {
    return Rng(mix(seed_ ^ fnv1a(label)));
  }
  Rng split(std::string_view label, std::uint64_t index) const {
    return Rng(mix(mix(seed_ ^ fnv1a(label)) + index));
  }

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased enough for index use; exact distribution is not load-bearing,
  // determinism is.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Box-Muller without the cached spare (keeps the stream position a pure
  // function of draw count).
  double normal(double mean = 0.0, double sd = 1.0) {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
    shuffle(p);
    return p;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    return h;
  }

  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace shiftgauge
