// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "fusesep/common.hpp"

namespace fusesep {

// Analysis/synthesis configuration.  Constraints (checked by validate):
// n_fft is a power of two (radix-2 transform), hop divides n_fft, and the
// squared window satisfies COLA at the hop to within 1e-10.
struct SpectralConfig {
  int sample_rate = 8000;
  int n_fft = 512;
  int hop = 128;
  std::string window = "hann";  // "hann" (periodic) | "rect"

  bool operator==(const SpectralConfig&) const = default;
};

void validate(const SpectralConfig& cfg);

// Analysis window samples; validates cfg including the COLA check.
std::vector<double> make_window(const SpectralConfig& cfg);

// Mono waveform.  Samples are stored as doubles; the [-1, 1] amplitude
// convention is enforced at the WAV boundary, not here (synthetic sources
// are unit-variance).
struct TimeSignal {
  std::vector<double> samples;
  int sample_rate = 8000;
};

// One-sided complex spectrogram, bin-major: data[b*frames + k].
// num_samples remembers the analysed length so istft can invert exactly.
struct Spectrogram {
  int bins = 0;
  int frames = 0;
  int num_samples = 0;
  SpectralConfig cfg;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(int b, int k) { return data[size_t(b) * frames + k]; }
  std::complex<double> at(int b, int k) const { return data[size_t(b) * frames + k]; }
};

// Center-padded (reflect, n_fft/2 per side) windowed transform.
// Precondition: len(x) >= n_fft.
Spectrogram stft(const TimeSignal& x, const SpectralConfig& cfg);

// Window-weighted overlap-add inverse; exact inverse of stft wherever the
// synthesis window energy is nonzero, which covers the whole signal for the
// shipped configs.
TimeSignal istft(const Spectrogram& S);
TimeSignal istft(const Spectrogram& S, const SpectralConfig& cfg);  // cfg must match S.cfg

struct MelConfig {
  int n_mels = 80;
  double f_min = 0.0;
  double f_max = 0.0;  // 0 -> Nyquist

  bool operator==(const MelConfig&) const = default;
};

// Non-negative mel magnitudes, mel-major: data[m*frames + k].
struct MelSpec {
  int n_mels = 0;
  int frames = 0;
  std::vector<double> data;

  double& at(int m, int k) { return data[size_t(m) * frames + k]; }
  double at(int m, int k) const { return data[size_t(m) * frames + k]; }
};

// Triangular filters on mel(f) = 2595*log10(1 + f/700), area-normalized
// (Slaney 2/(hi-lo)); rows that would be empty at coarse mel spacing get a
// single tap at the bin nearest the filter center so every row sums > 0.
// Layout: n_mels x bins, row-major.
std::vector<double> mel_filterbank(const SpectralConfig& cfg, const MelConfig& mcfg);

MelSpec mel_spectrogram(const TimeSignal& x, const SpectralConfig& cfg, const MelConfig& mcfg);

// Least-norm magnitude estimate from a MelSpec via the filterbank normal
// equations, clamped at 0.  Layout: bins x frames, bin-major.
std::vector<double> mel_to_magnitude(const MelSpec& M, const SpectralConfig& cfg,
                                     const MelConfig& mcfg);

// Griffin-Lim phase reconstruction from a bins x frames magnitude (bin-major).
// Initial phase is seeded uniform noise, so the output phase track is
// decoupled from any reference.  num_samples = 0 defaults to (frames-1)*hop.
// err_trace, when given, records per-iteration ||_|stft(x)|-mag_||/||mag||.
TimeSignal griffin_lim(const std::vector<double>& mag, int bins, int frames,
                       const SpectralConfig& cfg, int iterations, uint64_t seed,
                       int num_samples = 0, std::vector<double>* err_trace = nullptr);

TimeSignal griffin_lim_mel(const MelSpec& M, const SpectralConfig& cfg, const MelConfig& mcfg,
                           int iterations, uint64_t seed, int num_samples = 0,
                           std::vector<double>* err_trace = nullptr);

// Quadrant-aware angle in (-pi, pi]; angle(0) = 0.
inline double angle(std::complex<double> z) {
  if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
  double a = std::atan2(z.imag(), z.real());
  if (a <= -kPi) a = kPi;  // fold the -pi branch point onto +pi
  return a;
}

// Configurations exercised by the round-trip acceptance gate.
std::vector<SpectralConfig> shipped_configs();

}  // namespace fusesep
