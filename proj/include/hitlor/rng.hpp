#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace hitlor {

// Seeded generator with draws that do not depend on the standard library's
// distribution implementations, so sampled sets are identical across
// toolchains. State round-trips through text for session checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; deterministic given the engine state.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // k distinct elements of `pool`, in draw order (partial Fisher-Yates).
  template <typename T>
  std::vector<T> sample_without_replacement(std::span<const T> pool, std::size_t k) {
    std::vector<T> items(pool.begin(), pool.end());
    if (k > items.size()) k = items.size();
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + uniform_index(items.size() - i);
      std::swap(items[i], items[j]);
    }
    items.resize(k);
    return items;
  }

  std::string state() const {
    std::ostringstream out;
    out << engine_ << ' ' << has_spare_ << ' ';
    out.precision(17);
    out << std::hexfloat << spare_;
    return out.str();
  }

  void restore(std::string_view text) {
    std::istringstream in{std::string(text)};
    in >> engine_ >> has_spare_;
    std::string spare;
    in >> spare;
    spare_ = spare.empty() ? 0.0 : std::strtod(spare.c_str(), nullptr);
  }

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.has_spare_ == b.has_spare_ &&
           (!a.has_spare_ || a.spare_ == b.spare_);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Order-stable 64-bit mixing used to derive per-session seeds from
// (global seed, label, index) without depending on std::hash.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ fnv1a64(label)) + index);
}

}  // namespace hitlor
