// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fusesep/common.hpp"

namespace fusesep {

// splitmix64 step; used only to derive decorrelated child seeds.
inline uint64_t splitmix64(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Child seed for stream `index` of a master seed.  Instances, sources and
// simulator stages each get their own stream so that parallel evaluation
// order cannot change any drawn value.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
  uint64_t s = master;
  uint64_t a = splitmix64(s);
  s = a ^ (0x9e3779b97f4a7c15ull * (index + 1));
  return splitmix64(s);
}

// Deterministic RNG.  The engine is the fully specified std::mt19937_64;
// the distribution transforms are written out here because the standard
// leaves std::*_distribution algorithms implementation-defined and results
// must be bit-reproducible across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  int uniform_int(int n) {
    if (n <= 0) throw InvalidInput("uniform_int: n must be positive");
    uint64_t un = uint64_t(n);
    uint64_t limit = ~0ull - (~0ull % un);
    uint64_t r;
    do {
      r = eng_();
    } while (r > limit);
    return int(r % un);
  }

  // Standard normal via Box-Muller; the spare value is cached, so the
  // draw sequence depends only on call order.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Laplace with scale b (variance 2*b^2); inverse CDF on u in (0, 1).
  double laplace(double b) {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u < 0.5 ? b * std::log(2.0 * u) : -b * std::log(2.0 * (1.0 - u));
  }

  // Knuth's product method; fine for the small rates used here.
  int poisson(double lambda) {
    if (lambda < 0.0) throw InvalidInput("poisson: negative rate");
    if (lambda == 0.0) return 0;
    double l = std::exp(-lambda);
    double p = 1.0;
    int k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > l);
    return k - 1;
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(uniform_int(int(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fusesep
