#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace girl {

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Deterministic RNG with named substreams. Every source of randomness in a
// run derives from one root seed via sub("name") / sub("name", index), so
// reruns with the same seed are bit-identical regardless of call order
// elsewhere. Distributions are hand-rolled: the standard library does not
// pin their algorithms, mt19937_64 itself is pinned.
class Rng {
public:
  explicit Rng(uint64_t seed) : seed_(seed), eng_(seed) {}

  Rng sub(std::string_view name) const {
    return Rng(fnv1a64(name, seed_ ^ 0x9e3779b97f4a7c15ull));
  }
  Rng sub(std::string_view name, uint64_t index) const {
    uint64_t h = fnv1a64(name, seed_ ^ 0x9e3779b97f4a7c15ull);
    h ^= index + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return Rng(h);
  }

  uint64_t seed() const { return seed_; }
  uint64_t next() { return eng_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  float uniformf() { return static_cast<float>(next() >> 40) * 0x1.0p-24f; }

  // [0, n)
  int uniform_int(int n) {
    return n <= 1 ? 0 : static_cast<int>(next() % static_cast<uint64_t>(n));
  }

  // Box-Muller; two uniform draws per sample, no cached spare.
  double normal(double mean = 0.0, double sigma = 1.0) {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586477 * u2);
  }

  // Index drawn from unnormalized non-negative weights.
  int categorical(const float* w, int n) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += w[i];
    double u = uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

  template <typename It>
  void shuffle(It first, It last) {
    auto n = last - first;
    for (decltype(n) i = n - 1; i > 0; --i) {
      auto j = uniform_int(static_cast<int>(i + 1));
      std::swap(first[i], first[j]);
    }
  }

  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    shuffle(p.begin(), p.end());
    return p;
  }

private:
  uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace girl
