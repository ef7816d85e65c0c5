// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/fft.hpp"

#include <cmath>
#include <map>

#include "fusesep/common.hpp"

namespace fusesep::fft {

namespace {

// Forward twiddles exp(-2*pi*i*j/n), j < n/2.  thread_local: lock-free and
// every thread computes identical values, so parallel callers stay
// bit-deterministic.
const std::vector<cd>& twiddles(size_t n) {
  thread_local std::map<size_t, std::vector<cd>> cache;
  auto& t = cache[n];
  if (t.empty() && n >= 2) {
    t.resize(n / 2);
    for (size_t j = 0; j < n / 2; ++j) {
      double a = -2.0 * kPi * double(j) / double(n);
      t[j] = cd(std::cos(a), std::sin(a));
    }
  }
  return t;
}

}  // namespace

void fft_inplace(cd* a, size_t n, bool inverse) {
  if (!is_pow2(n)) throw InvalidInput("fft: size must be a power of two");
  if (n == 1) return;
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& tw = twiddles(n);
  for (size_t len = 2; len <= n; len <<= 1) {
    size_t stride = n / len;
    for (size_t blk = 0; blk < n; blk += len) {
      for (size_t j = 0; j < len / 2; ++j) {
        cd w = tw[j * stride];
        if (inverse) w = std::conj(w);
        cd u = a[blk + j];
        cd v = a[blk + j + len / 2] * w;
        a[blk + j] = u + v;
        a[blk + j + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    double inv = 1.0 / double(n);
    for (size_t i = 0; i < n; ++i) a[i] *= inv;
  }
}

std::vector<cd> rfft(const double* x, size_t n) {
  std::vector<cd> a(n);
  for (size_t i = 0; i < n; ++i) a[i] = cd(x[i], 0.0);
  fft_inplace(a.data(), n, false);
  a.resize(n / 2 + 1);
  return a;
}

void irfft(const cd* bins, size_t n, double* out) {
  std::vector<cd> a(n);
  a[0] = bins[0];
  a[n / 2] = bins[n / 2];
  for (size_t b = 1; b < n / 2; ++b) {
    a[b] = bins[b];
    a[n - b] = std::conj(bins[b]);
  }
  fft_inplace(a.data(), n, true);
  for (size_t i = 0; i < n; ++i) out[i] = a[i].real();
}

}  // namespace fusesep::fft
