#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace trafficbench {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Every stochastic stage draws from its own stream derived from the master
/// seed, the stage name, and a per-unit id, so stages never share state.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                 std::uint64_t unit = 0) {
  return splitmix64(splitmix64(master ^ fnv1a64(stage)) ^ unit);
}

/// mt19937_64 with hand-rolled draw helpers. std::uniform_int_distribution
/// and friends are not byte-portable across standard libraries, and split
/// manifests / trained models must serialize identically everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }
  std::uint32_t next_u32() { return static_cast<std::uint32_t>(eng_() >> 32); }

  /// Uniform draw from [0, n). n == 0 returns 0.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t rem = (UINT64_MAX % n + 1) % n;
    const std::uint64_t bound = UINT64_MAX - rem;
    std::uint64_t r;
    do {
      r = eng_();
    } while (r > bound);
    return r % n;
  }

  /// Uniform draw from [lo, hi], inclusive.
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {
    return lo + below(hi - lo + 1);
  }

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Order-preserving sample of k indices out of [0, n) (selection sampling).
  std::vector<std::size_t> sample_k(std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    if (k >= n) {
      out.resize(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = i;
      return out;
    }
    out.reserve(k);
    std::size_t selected = 0;
    for (std::size_t t = 0; t < n && selected < k; ++t) {
      if (below(n - t) < k - selected) {
        out.push_back(t);
        ++selected;
      }
    }
    return out;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace trafficbench
