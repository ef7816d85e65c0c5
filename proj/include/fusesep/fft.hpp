// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace fusesep::fft {

using cd = std::complex<double>;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place radix-2 Cooley-Tukey; n must be a power of two.  The inverse
// transform divides by n.
void fft_inplace(cd* a, size_t n, bool inverse);

// Real-input forward transform; returns the n/2+1 non-redundant bins.
std::vector<cd> rfft(const double* x, size_t n);

// Inverse of rfft: n real samples from n/2+1 bins (conjugate symmetry is
// imposed; imaginary parts of bins 0 and n/2 are ignored).
void irfft(const cd* bins, size_t n, double* out);

}  // namespace fusesep::fft
