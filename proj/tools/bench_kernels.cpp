// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Times the OpenMP kernels against the serial reference implementations and
// checks that they still agree. conv3x3 and the MI quadrature must match
// bitwise (identical accumulation order); the reference stft is a direct DFT,
// so that pair is compared with a tolerance instead.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <omp.h>

#include "fusesep/fusion.hpp"
#include "fusesep/ref.hpp"
#include "fusesep/rng.hpp"
#include "fusesep/spectral.hpp"

using namespace fusesep;

namespace {

template <class F>
double min_seconds(int repeat, F&& body) {
  double best = 1e300;
  for (int r = 0; r < repeat; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double par_s, double ser_s, double max_diff, bool bitwise) {
  std::printf("%-12s parallel %9.3f ms   serial %9.3f ms   speedup %5.2fx   %s\n", name,
              par_s * 1e3, ser_s * 1e3, ser_s / par_s,
              bitwise ? (max_diff == 0.0 ? "bitwise equal" : "BITWISE MISMATCH")
                      : ("max |diff| = " + std::to_string(max_diff)).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  int repeat = 3;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--repeat" && i + 1 < argc) {
      repeat = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--repeat N]\n", argv[0]);
      return 2;
    }
  }
  if (repeat < 1) repeat = 1;
  std::printf("threads: %d\n\n", omp_get_max_threads());
  int failures = 0;

  {  // stft on 2 s of noise (serial reference is a direct DFT)
    SpectralConfig sc;
    TimeSignal x;
    x.sample_rate = sc.sample_rate;
    x.samples.resize(size_t(2 * sc.sample_rate));
    Rng rng(derive_seed(7, 1));
    for (double& s : x.samples) s = rng.normal();
    Spectrogram P, S;
    const double tp = min_seconds(repeat, [&] { P = stft(x, sc); });
    const double ts = min_seconds(repeat, [&] { S = ref::stft(x, sc); });
    double md = 0.0;
    for (size_t i = 0; i < P.data.size(); ++i) md = std::max(md, std::abs(P.data[i] - S.data[i]));
    report("stft", tp, ts, md, false);
    if (md > 1e-9) ++failures;
  }

  {  // 3x3 conv, one mid-size layer
    const int C = 16, H = 257, W = 126;
    ConvLayer L;
    L.in_ch = C;
    L.out_ch = C;
    L.w.resize(size_t(C) * C * 9);
    L.b.assign(C, 0.01);
    Rng rng(derive_seed(7, 2));
    for (double& w : L.w) w = rng.uniform(-0.1, 0.1);
    Tensor3 x(C, H, W);
    for (double& v : x.v) v = rng.normal();
    Tensor3 yp, ys;
    const double tp = min_seconds(repeat, [&] { yp = conv3x3_apply(L, x); });
    const double ts = min_seconds(repeat, [&] { ys = ref::conv3x3_apply(L, x); });
    double md = 0.0;
    for (size_t i = 0; i < yp.v.size(); ++i) md = std::max(md, std::abs(yp.v[i] - ys.v[i]));
    report("conv3x3", tp, ts, md, true);
    if (md != 0.0) ++failures;
  }

  {  // Laplace+AWGN mutual information quadrature at its densest grid
    const double s2 = 1e-4;
    double mp = 0.0, ms = 0.0;
    const double tp = min_seconds(repeat, [&] { mp = mi_laplace_awgn(s2); });
    const double ts = min_seconds(repeat, [&] { ms = ref::mi_laplace_awgn(s2); });
    const double md = std::abs(mp - ms);
    report("mi_quad", tp, ts, md, true);
    if (md != 0.0) ++failures;
  }

  if (failures) {
    std::printf("\n%d kernel(s) disagree with the reference\n", failures);
    return 1;
  }
  std::printf("\nall kernels agree with the reference\n");
  return 0;
}
