// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/alignment.hpp"

#include <cmath>

#include "fusesep/fft.hpp"

namespace fusesep {

namespace {

void check_pair(const Spectrogram& Vd, const Spectrogram& Vg) {
  if (Vd.bins != Vg.bins || Vd.frames != Vg.frames || !(Vd.cfg == Vg.cfg))
    throw InvalidInput("spectrogram shape/config mismatch");
}

}  // namespace

PhaseFeatures phase_features(const Spectrogram& Vd, const Spectrogram& Vg) {
  check_pair(Vd, Vg);
  PhaseFeatures f;
  f.psi = Tensor3(2, Vd.bins, Vd.frames);
  for (int b = 0; b < Vd.bins; ++b)
    for (int k = 0; k < Vd.frames; ++k) {
      f.psi.at(0, b, k) = angle(Vd.at(b, k));
      f.psi.at(1, b, k) = angle(Vg.at(b, k) * std::conj(Vd.at(b, k)));
    }
  return f;
}

MagnitudeFeatures magnitude_features(const Spectrogram& Vd, const Spectrogram& Vg) {
  check_pair(Vd, Vg);
  MagnitudeFeatures f;
  f.a = Tensor3(2, Vd.bins, Vd.frames);
  for (int b = 0; b < Vd.bins; ++b)
    for (int k = 0; k < Vd.frames; ++k) {
      f.a.at(0, b, k) = std::abs(Vd.at(b, k));
      f.a.at(1, b, k) = std::abs(Vg.at(b, k));
    }
  return f;
}

Spectrogram xcorr_spectrum(const Spectrogram& Vd, const Spectrogram& Vg) {
  check_pair(Vd, Vg);
  Spectrogram R = Vd;
  for (size_t i = 0; i < R.data.size(); ++i) R.data[i] = Vd.data[i] * std::conj(Vg.data[i]);
  return R;
}

std::vector<int> estimate_delays(const Spectrogram& R) {
  const int n = R.cfg.n_fft;
  if (R.bins != n / 2 + 1) throw InvalidInput("cross-spectrum shape inconsistent with config");
  std::vector<int> delays(size_t(R.frames), 0);
#pragma omp parallel for
  for (int k = 0; k < R.frames; ++k) {
    std::vector<fft::cd> col(size_t(R.bins));
    for (int b = 0; b < R.bins; ++b) col[b] = R.at(b, k);
    std::vector<double> r(static_cast<size_t>(n));
    fft::irfft(col.data(), size_t(n), r.data());
    // argmax of the real cross-correlation; index m maps to delay
    // d = (n - m) mod n folded into [-n/2, n/2)
    double best = r[0];
    int best_d = 0;
    for (int m = 1; m < n; ++m) {
      int d = (n - m) % n;
      if (d >= n / 2) d -= n;
      bool better = r[m] > best;
      if (!better && r[m] == best) {
        int ad = std::abs(d), ab = std::abs(best_d);
        better = ad < ab || (ad == ab && d < best_d);
      }
      if (better) {
        best = r[m];
        best_d = d;
      }
    }
    delays[k] = best_d;
  }
  return delays;
}

std::vector<std::complex<double>> delay_phasors(const std::vector<int>& delays,
                                                const SpectralConfig& cfg) {
  const int n = cfg.n_fft;
  const int bins = n / 2 + 1;
  const int frames = int(delays.size());
  for (int d : delays)
    if (std::abs(d) > n / 2) throw InvalidInput("delay out of range");
  std::vector<std::complex<double>> t(size_t(bins) * frames);
  for (int k = 0; k < frames; ++k)
    for (int b = 0; b < bins; ++b) {
      double ph = 2.0 * kPi * double(b) * double(delays[k]) / double(n);
      t[size_t(b) * frames + k] = std::complex<double>(std::cos(ph), std::sin(ph));
    }
  return t;
}

AlignmentResult align(const Spectrogram& Vd, const Spectrogram& Vg) {
  AlignmentResult ar;
  ar.delays = estimate_delays(xcorr_spectrum(Vd, Vg));
  ar.phasors = delay_phasors(ar.delays, Vd.cfg);
  ar.bins = Vd.bins;
  ar.frames = Vd.frames;
  return ar;
}

Spectrogram apply_alignment(const Spectrogram& Vg, const AlignmentResult& ar) {
  if (ar.bins != Vg.bins || ar.frames != Vg.frames)
    throw InvalidInput("alignment shape mismatch");
  Spectrogram out = Vg;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = ar.phasors[i] * Vg.data[i];
  return out;
}

TimeSignal xcorr_fuse(const Spectrogram& Vd, const Spectrogram& Vg) {
  check_pair(Vd, Vg);
  AlignmentResult ar = align(Vd, Vg);
  Spectrogram V = Vd;
  for (size_t i = 0; i < V.data.size(); ++i) V.data[i] = Vd.data[i] + ar.phasors[i] * Vg.data[i];
  return istft(V);
}

}  // namespace fusesep
