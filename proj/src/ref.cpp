// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/ref.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "fusesep/common.hpp"

namespace fusesep::ref {

using cd = std::complex<double>;

Spectrogram stft(const TimeSignal& x, const SpectralConfig& cfg) {
  if (x.samples.empty()) throw InvalidInput("empty signal");
  if (x.sample_rate != cfg.sample_rate)
    throw InvalidInput("signal sample rate does not match config");
  const int n = cfg.n_fft;
  const int len = int(x.samples.size());
  if (len < n) throw InvalidInput("signal shorter than one frame");
  const std::vector<double> w = make_window(cfg);

  const int pad = n / 2;
  std::vector<double> padded(size_t(len) + 2 * pad);
  for (int i = 0; i < pad; ++i) padded[i] = x.samples[pad - i];
  for (int i = 0; i < len; ++i) padded[pad + i] = x.samples[i];
  for (int i = 0; i < pad; ++i) padded[pad + len + i] = x.samples[len - 2 - i];

  Spectrogram S;
  S.cfg = cfg;
  S.bins = n / 2 + 1;
  S.frames = 1 + len / cfg.hop;
  S.num_samples = len;
  S.data.assign(size_t(S.bins) * S.frames, {});

  for (int k = 0; k < S.frames; ++k) {
    const double* src = padded.data() + size_t(k) * cfg.hop;
    for (int b = 0; b < S.bins; ++b) {
      cd acc(0.0, 0.0);
      for (int t = 0; t < n; ++t) {
        const double ph = -2.0 * kPi * double(b) * double(t) / double(n);
        acc += src[t] * w[t] * cd(std::cos(ph), std::sin(ph));
      }
      S.data[size_t(b) * S.frames + k] = acc;
    }
  }
  return S;
}

TimeSignal istft(const Spectrogram& S) {
  const SpectralConfig& cfg = S.cfg;
  const int n = cfg.n_fft;
  if (S.bins != n / 2 + 1 || S.frames < 1 || S.data.size() != size_t(S.bins) * S.frames)
    throw InvalidInput("spectrogram shape inconsistent with its config");
  if (S.num_samples < 1 || S.frames != 1 + S.num_samples / cfg.hop)
    throw InvalidInput("spectrogram frame count inconsistent with num_samples");
  const std::vector<double> w = make_window(cfg);
  const int pad = n / 2;
  const size_t plen = size_t(S.num_samples) + 2 * pad;

  std::vector<double> acc(plen, 0.0), norm(plen, 0.0);
  for (int k = 0; k < S.frames; ++k) {
    for (int t = 0; t < n; ++t) {
      // real inverse DFT from the one-sided spectrum
      double s = S.data[size_t(0) * S.frames + k].real();
      for (int b = 1; b < S.bins; ++b) {
        const cd z = S.data[size_t(b) * S.frames + k];
        const double ph = 2.0 * kPi * double(b) * double(t) / double(n);
        const double term = z.real() * std::cos(ph) - z.imag() * std::sin(ph);
        s += (b == n / 2) ? term : 2.0 * term;
      }
      s /= double(n);
      acc[size_t(k) * cfg.hop + t] += s * w[t];
      norm[size_t(k) * cfg.hop + t] += w[t] * w[t];
    }
  }
  double max_norm = 0.0;
  for (double v : norm) max_norm = std::max(max_norm, v);
  const double eps = 1e-12 * max_norm;

  TimeSignal y;
  y.sample_rate = cfg.sample_rate;
  y.samples.resize(size_t(S.num_samples));
  for (int i = 0; i < S.num_samples; ++i) {
    const double nz = norm[size_t(pad) + i];
    y.samples[i] = nz > eps ? acc[size_t(pad) + i] / nz : 0.0;
  }
  return y;
}

// Same element order as the parallel kernel (bias, then ic, dy, dx), so the
// two agree bitwise.
Tensor3 conv3x3_apply(const ConvLayer& L, const Tensor3& x) {
  if (L.in_ch != x.c || L.w.size() != size_t(L.out_ch) * L.in_ch * 9 ||
      L.b.size() != size_t(L.out_ch))
    throw InvalidInput("conv layer/input shape mismatch");
  const int H = x.h, W = x.w;
  Tensor3 out(L.out_ch, H, W);
  for (int oc = 0; oc < L.out_ch; ++oc) {
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        double acc = L.b[oc];
        for (int ic = 0; ic < L.in_ch; ++ic) {
          const double* wr = &L.w[(size_t(oc) * L.in_ch + ic) * 9];
          for (int dy = 0; dy < 3; ++dy) {
            const int yy = y + dy - 1;
            if (yy < 0 || yy >= H) continue;
            for (int dx = 0; dx < 3; ++dx) {
              const int xc = xx + dx - 1;
              if (xc < 0 || xc >= W) continue;
              acc += wr[dy * 3 + dx] * x.at(ic, yy, xc);
            }
          }
        }
        out.at(oc, y, xx) = acc;
      }
    }
  }
  return out;
}

namespace {
double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }
}  // namespace

// Serial re-statement of the banded Simpson rule with the identical term
// order; must agree bitwise with the parallel version.
double mi_laplace_awgn(double sigma2, const QuadratureSpec& q) {
  if (!(sigma2 > 0.0)) throw InvalidInput("mi_laplace_awgn: sigma2 must be > 0");
  const double sigma = std::sqrt(sigma2);

  int nx;
  if (q.points_override > 0) {
    nx = q.points_override;
  } else {
    double step = sigma * q.step_sigma_frac;
    nx = int(std::ceil(2.0 * q.x_max / step)) + 1;
    nx = std::clamp(nx, q.min_points, q.max_points);
  }
  if (nx < 401) throw InvalidConfig("mi_laplace_awgn: quadrature grid too coarse");
  if (nx % 2 == 0) ++nx;
  const double hx = 2.0 * q.x_max / double(nx - 1);

  const double v_max = q.x_max + q.band_sigmas * sigma;
  int nv = int(std::ceil(2.0 * v_max / hx)) + 1;
  nv = std::min(nv, 4 * q.max_points);
  if (nv % 2 == 0) ++nv;
  const double hv = 2.0 * v_max / double(nv - 1);

  const double b = 1.0 / std::sqrt(2.0);
  std::vector<double> wpx(static_cast<size_t>(nx));
  for (int i = 0; i < nx; ++i) {
    double x = -q.x_max + hx * double(i);
    double w = (i == 0 || i == nx - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    wpx[i] = (hx / 3.0) * w * std::exp(-std::fabs(x) / b) / (2.0 * b);
  }

  const double band = q.band_sigmas * sigma;
  const double gnorm = 1.0 / (sigma * std::sqrt(2.0 * kPi));

  std::vector<double> hv_terms(static_cast<size_t>(nv));
  for (int jv = 0; jv < nv; ++jv) {
    double v = -v_max + hv * double(jv);
    int ilo = std::max(0, int(std::ceil((v - band + q.x_max) / hx)));
    int ihi = std::min(nx - 1, int(std::floor((v + band + q.x_max) / hx)));
    double pv = 0.0;
    for (int i = ilo; i <= ihi; ++i) {
      double x = -q.x_max + hx * double(i);
      double d = (v - x) / sigma;
      pv += wpx[i] * gnorm * std::exp(-0.5 * d * d);
    }
    double w = (jv == 0 || jv == nv - 1) ? 1.0 : (jv % 2 ? 4.0 : 2.0);
    hv_terms[jv] = (hv / 3.0) * w * (-xlogx(pv));
  }
  double h_v = 0.0;
  for (int jv = 0; jv < nv; ++jv) h_v += hv_terms[jv];

  const double h_noise = 0.5 * std::log(2.0 * kPi * std::exp(1.0) * sigma2);
  return std::max(0.0, h_v - h_noise);
}

}  // namespace fusesep::ref
