// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <vector>

#include "fusesep/spectral.hpp"
#include "fusesep/tensor.hpp"

namespace fusesep {

// psi: channel 0 = angle(Vd), channel 1 = angle(Vg .* conj(Vd)); entries in
// (-pi, pi].
struct PhaseFeatures {
  Tensor3 psi;  // 2 x bins x frames
};

// a: channel 0 = |Vd|, channel 1 = |Vg|; entries >= 0.
struct MagnitudeFeatures {
  Tensor3 a;  // 2 x bins x frames
};

// Per-frame integer sample delays and the per-tile alignment phasors
// T[b,k] = exp(+j*2*pi*b*delay[k]/n_fft).  |delay| < n_fft/2; |T| = 1.
struct AlignmentResult {
  std::vector<int> delays;                   // one per frame
  std::vector<std::complex<double>> phasors;  // bins x frames, bin-major
  int bins = 0;
  int frames = 0;
};

PhaseFeatures phase_features(const Spectrogram& Vd, const Spectrogram& Vg);
MagnitudeFeatures magnitude_features(const Spectrogram& Vd, const Spectrogram& Vg);

// Cross-spectrum R = Vd .* conj(Vg).
Spectrogram xcorr_spectrum(const Spectrogram& Vd, const Spectrogram& Vg);

// Per-frame inverse transform of the cross-spectrum; argmax of the real part
// mapped to a signed delay in [-n_fft/2, n_fft/2).  Positive delay means Vg
// lags Vd; applying the phasors to Vg cancels the lag.  Ties prefer the
// smallest |delay|, then the negative one (0, -1, +1, -2, +2, ...).
std::vector<int> estimate_delays(const Spectrogram& R);

std::vector<std::complex<double>> delay_phasors(const std::vector<int>& delays,
                                                const SpectralConfig& cfg);

AlignmentResult align(const Spectrogram& Vd, const Spectrogram& Vg);

// Spectrogram with the alignment phasors applied: T .* Vg.
Spectrogram apply_alignment(const Spectrogram& Vg, const AlignmentResult& ar);

// Equal-weight fusion after phasor alignment: istft(Vd + T .* Vg).
TimeSignal xcorr_fuse(const Spectrogram& Vd, const Spectrogram& Vg);

}  // namespace fusesep
