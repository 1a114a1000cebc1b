#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace coarsemp {

// Deterministic generator with platform-independent draws. std::mt19937_64 is
// bit-exact everywhere; the distributions are written out because the standard
// library ones are not portable across implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    uint64_t threshold = (-n) % n;
    for (;;) {
      uint64_t v = gen_();
      if (v >= threshold) return v % n;
    }
  }

  // Standard normal via Box-Muller, one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coarsemp
