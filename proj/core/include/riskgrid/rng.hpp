#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace riskgrid {

// xoshiro256++ generator seeded through splitmix64. `stream(seed, id)` derives
// an independent generator from a (seed, counter) pair, so parallel replicates
// (permutations, trees, folds) draw from streams that depend only on their
// index, never on thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : state_) w = splitmix64(x);
  }

  static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
    std::uint64_t x = seed;
    std::uint64_t a = splitmix64(x);
    // fold the stream id into the seeding sequence
    x ^= 0x9e3779b97f4a7c15ULL * (stream_id + 1);
    Rng r(x ^ a);
    return r;
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform double in [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % n;
  }

  // standard normal via the polar method
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // Poisson count, Knuth multiplication with additive chunking for large means
  long poisson(double lambda) {
    long total = 0;
    while (lambda > 0.0) {
      const double chunk = lambda > 30.0 ? 30.0 : lambda;
      lambda -= chunk;
      const double limit = std::exp(-chunk);
      long k = -1;
      double p = 1.0;
      do {
        ++k;
        p *= uniform();
      } while (p > limit);
      total += k;
    }
    return total;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace riskgrid
