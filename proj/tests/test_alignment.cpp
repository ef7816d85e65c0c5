// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "fusesep/alignment.hpp"
#include "fusesep/common.hpp"
#include "fusesep/metrics.hpp"
#include "fusesep/rng.hpp"
#include "fusesep/spectral.hpp"
#include "fusesep/synthbench.hpp"

using namespace fusesep;

namespace {

const SpectralConfig kCfg{8000, 128, 32, "hann"};

TimeSignal delayed(const TimeSignal& x, int d) {
  TimeSignal y = x;
  for (size_t i = 0; i < y.samples.size(); ++i) {
    long j = long(i) - d;
    y.samples[i] = (j >= 0 && j < long(x.samples.size())) ? x.samples[size_t(j)] : 0.0;
  }
  return y;
}

Spectrogram flat_spectrogram(std::complex<double> fill, int frames) {
  Spectrogram S;
  S.cfg = kCfg;
  S.bins = kCfg.n_fft / 2 + 1;
  S.frames = frames;
  S.num_samples = (frames - 1) * kCfg.hop;
  S.data.assign(size_t(S.bins) * size_t(frames), fill);
  return S;
}

}  // namespace

TEST_CASE("align recovers a known global delay") {
  auto src = gen_sources(2, 1.0, 11);
  const TimeSignal& x = src[0];
  const int d = 7;
  TimeSignal y = delayed(x, d);

  auto Vd = stft(x, kCfg);
  auto Vg = stft(y, kCfg);
  auto ar = align(Vd, Vg);
  REQUIRE(ar.bins == Vd.bins);
  REQUIRE(ar.frames == Vd.frames);
  REQUIRE(int(ar.delays.size()) == Vd.frames);

  std::vector<double> dd(ar.delays.begin(), ar.delays.end());
  CHECK(median(dd) == doctest::Approx(double(d)));

  // applying the phasors cancels the lag: reconstruction moves toward x
  double before = si_sdr(x, istft(Vg));
  double after = si_sdr(x, istft(apply_alignment(Vg, ar)));
  CHECK(after > before + 10.0);
  CHECK(after > 10.0);
}

TEST_CASE("alignment phasors follow the stated formula with unit modulus") {
  std::vector<int> delays = {0, 5, -3};
  auto ph = delay_phasors(delays, kCfg);
  const int bins = kCfg.n_fft / 2 + 1;
  REQUIRE(ph.size() == size_t(bins) * delays.size());
  for (int b = 0; b < bins; ++b) {
    for (size_t k = 0; k < delays.size(); ++k) {
      std::complex<double> want =
          std::exp(std::complex<double>(0.0, 2.0 * kPi * b * delays[k] / kCfg.n_fft));
      auto got = ph[size_t(b) * delays.size() + k];
      CHECK(std::abs(got - want) < 1e-12);
      CHECK(std::abs(got) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  std::vector<int> huge = {kCfg.n_fft};  // outside [-n/2, n/2]
  CHECK_THROWS_AS(delay_phasors(huge, kCfg), InvalidInput);
}

TEST_CASE("estimate_delays ties prefer delay zero") {
  // DC-only cross-spectrum: the lag correlation is constant, every lag ties
  auto R = flat_spectrogram({0.0, 0.0}, 4);
  for (int k = 0; k < R.frames; ++k) R.at(0, k) = {1.0, 0.0};
  auto d = estimate_delays(R);
  REQUIRE(d.size() == 4);
  for (int v : d) CHECK(v == 0);
}

TEST_CASE("estimate_delays: an exact two-lag tie takes the smaller magnitude") {
  // spectrum of cos(2*pi*b0*t/n) peaks equally at several lags; with only
  // bin 8 set, correlation is cos(2*pi*8*l/128), maximal at l = 0, ±16, ...
  auto R = flat_spectrogram({0.0, 0.0}, 2);
  for (int k = 0; k < R.frames; ++k) R.at(8, k) = {1.0, 0.0};
  auto d = estimate_delays(R);
  for (int v : d) CHECK(v == 0);
}

TEST_CASE("phase features expose angle(Vd) and the cross phase") {
  auto Vd = flat_spectrogram({0.0, 0.0}, 2);
  auto Vg = flat_spectrogram({0.0, 0.0}, 2);
  Vd.at(3, 0) = std::polar(2.0, 0.5);
  Vg.at(3, 0) = std::polar(3.0, 1.25);
  Vd.at(10, 1) = std::polar(1.0, -2.0);
  Vg.at(10, 1) = std::polar(0.5, 2.5);

  auto pf = phase_features(Vd, Vg);
  REQUIRE(pf.psi.c == 2);
  REQUIRE(pf.psi.h == Vd.bins);
  REQUIRE(pf.psi.w == Vd.frames);
  CHECK(pf.psi.at(0, 3, 0) == doctest::Approx(0.5));
  CHECK(pf.psi.at(1, 3, 0) == doctest::Approx(1.25 - 0.5));
  CHECK(pf.psi.at(0, 10, 1) == doctest::Approx(-2.0));
  // angle(Vg conj(Vd)) wraps into (-pi, pi]: 2.5 - (-2.0) = 4.5 -> 4.5 - 2*pi
  CHECK(pf.psi.at(1, 10, 1) == doctest::Approx(4.5 - 2 * kPi));
  // zero tiles carry zero phase
  CHECK(pf.psi.at(0, 0, 0) == 0.0);
  CHECK(pf.psi.at(1, 0, 0) == 0.0);

  auto mf = magnitude_features(Vd, Vg);
  CHECK(mf.a.at(0, 3, 0) == doctest::Approx(2.0));
  CHECK(mf.a.at(1, 3, 0) == doctest::Approx(3.0));
  CHECK(mf.a.at(0, 0, 0) == 0.0);
}

TEST_CASE("xcorr_fuse is literally istft(Vd + T .* Vg)") {
  auto src = gen_sources(2, 0.5, 21);
  auto Vd = stft(src[0], kCfg);
  auto Vg = stft(delayed(src[0], 4), kCfg);

  auto ar = align(Vd, Vg);
  Spectrogram manual = Vd;
  for (size_t i = 0; i < manual.data.size(); ++i)
    manual.data[i] = Vd.data[i] + ar.phasors[i] * Vg.data[i];
  auto want = istft(manual);

  auto got = xcorr_fuse(Vd, Vg);
  REQUIRE(got.samples.size() == want.samples.size());
  double err = 0;
  for (size_t i = 0; i < got.samples.size(); ++i)
    err = std::max(err, std::fabs(got.samples[i] - want.samples[i]));
  CHECK(err < 1e-12);
}

TEST_CASE("alignment rejects shape mismatches") {
  auto src = gen_sources(2, 0.5, 3);
  auto Vd = stft(src[0], kCfg);
  TimeSignal shorter;
  shorter.sample_rate = 8000;
  shorter.samples.assign(src[0].samples.begin(), src[0].samples.begin() + 2000);
  auto Vs = stft(shorter, kCfg);
  CHECK_THROWS_AS(align(Vd, Vs), InvalidInput);
  CHECK_THROWS_AS(xcorr_spectrum(Vd, Vs), InvalidInput);
  CHECK_THROWS_AS(xcorr_fuse(Vd, Vs), InvalidInput);
}

TEST_CASE("xcorr_spectrum is the elementwise cross product") {
  auto src = gen_sources(2, 0.25, 6);
  auto Vd = stft(src[0], kCfg);
  auto Vg = stft(src[1], kCfg);
  auto R = xcorr_spectrum(Vd, Vg);
  REQUIRE(R.data.size() == Vd.data.size());
  for (size_t i = 0; i < R.data.size(); i += 97)
    CHECK(std::abs(R.data[i] - Vd.data[i] * std::conj(Vg.data[i])) < 1e-15);
}
