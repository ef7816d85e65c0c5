// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "fusesep/fft.hpp"
#include "fusesep/rng.hpp"

namespace fusesep {

namespace {

void check_signal(const TimeSignal& x) {
  if (x.samples.empty()) throw InvalidInput("signal is empty");
  for (double s : x.samples)
    if (!std::isfinite(s)) throw InvalidInput("signal contains non-finite samples");
}

double mel_of(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_inv(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Cholesky factorization (lower) of a symmetric positive-definite matrix.
std::vector<double> cholesky(const std::vector<double>& g, int n) {
  std::vector<double> l(size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = g[size_t(i) * n + j];
      for (int k = 0; k < j; ++k) s -= l[size_t(i) * n + k] * l[size_t(j) * n + k];
      if (i == j) {
        if (s <= 0.0) throw InvalidInput("filterbank normal equations not positive definite");
        l[size_t(i) * n + i] = std::sqrt(s);
      } else {
        l[size_t(i) * n + j] = s / l[size_t(j) * n + j];
      }
    }
  }
  return l;
}

void chol_solve(const std::vector<double>& l, int n, double* b) {
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l[size_t(i) * n + k] * b[k];
    b[i] = s / l[size_t(i) * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= l[size_t(k) * n + i] * b[k];
    b[i] = s / l[size_t(i) * n + i];
  }
}

}  // namespace

void validate(const SpectralConfig& cfg) { (void)make_window(cfg); }

std::vector<double> make_window(const SpectralConfig& cfg) {
  if (cfg.sample_rate <= 0) throw InvalidConfig("sample_rate must be positive");
  if (cfg.n_fft < 4 || !fft::is_pow2(size_t(cfg.n_fft)))
    throw InvalidConfig("n_fft must be a power of two >= 4 (radix-2 transform)");
  if (cfg.hop <= 0 || cfg.n_fft % cfg.hop != 0)
    throw InvalidConfig("hop must be positive and divide n_fft");
  std::vector<double> w(size_t(cfg.n_fft));
  if (cfg.window == "hann") {
    // periodic Hann
    for (int t = 0; t < cfg.n_fft; ++t)
      w[t] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(t) / double(cfg.n_fft));
  } else if (cfg.window == "rect") {
    std::fill(w.begin(), w.end(), 1.0);
  } else {
    throw InvalidConfig("unknown window: " + cfg.window);
  }
  // COLA on the squared window (weighted overlap-add synthesis).
  int shifts = cfg.n_fft / cfg.hop;
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < cfg.hop; ++i) {
    double s = 0.0;
    for (int m = 0; m < shifts; ++m) s += w[i + m * cfg.hop] * w[i + m * cfg.hop];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi - lo > 1e-10)
    throw InvalidConfig("window/hop violates the constant-overlap-add condition");
  return w;
}

Spectrogram stft(const TimeSignal& x, const SpectralConfig& cfg) {
  check_signal(x);
  if (x.sample_rate != cfg.sample_rate)
    throw InvalidInput("signal sample rate does not match config");
  const int n = cfg.n_fft;
  const int len = int(x.samples.size());
  if (len < n) throw InvalidInput("signal shorter than one frame");
  const std::vector<double> w = make_window(cfg);

  const int pad = n / 2;
  std::vector<double> padded(size_t(len) + 2 * pad);
  for (int i = 0; i < pad; ++i) padded[i] = x.samples[pad - i];  // reflect
  for (int i = 0; i < len; ++i) padded[pad + i] = x.samples[i];
  for (int i = 0; i < pad; ++i) padded[pad + len + i] = x.samples[len - 2 - i];

  Spectrogram S;
  S.cfg = cfg;
  S.bins = n / 2 + 1;
  S.frames = 1 + len / cfg.hop;
  S.num_samples = len;
  S.data.assign(size_t(S.bins) * S.frames, {});

#pragma omp parallel for
  for (int k = 0; k < S.frames; ++k) {
    std::vector<double> frame(static_cast<size_t>(n));
    const double* src = padded.data() + size_t(k) * cfg.hop;
    for (int t = 0; t < n; ++t) frame[t] = src[t] * w[t];
    std::vector<fft::cd> col = fft::rfft(frame.data(), size_t(n));
    for (int b = 0; b < S.bins; ++b) S.data[size_t(b) * S.frames + k] = col[b];
  }
  return S;
}

TimeSignal istft(const Spectrogram& S) {
  const SpectralConfig& cfg = S.cfg;
  const int n = cfg.n_fft;
  if (S.bins != n / 2 + 1 || S.frames < 1 ||
      S.data.size() != size_t(S.bins) * S.frames)
    throw InvalidInput("spectrogram shape inconsistent with its config");
  if (S.num_samples < 1 || S.frames != 1 + S.num_samples / cfg.hop)
    throw InvalidInput("spectrogram frame count inconsistent with num_samples");
  const std::vector<double> w = make_window(cfg);
  const int pad = n / 2;
  const size_t plen = size_t(S.num_samples) + 2 * pad;

  // Per-frame synthesis in parallel, then a serial overlap-add so the
  // accumulation order (and hence every bit of the output) is fixed.
  std::vector<double> frames_buf(size_t(S.frames) * n);
#pragma omp parallel for
  for (int k = 0; k < S.frames; ++k) {
    std::vector<fft::cd> col(size_t(S.bins));
    for (int b = 0; b < S.bins; ++b) col[b] = S.data[size_t(b) * S.frames + k];
    std::vector<double> t(static_cast<size_t>(n));
    fft::irfft(col.data(), size_t(n), t.data());
    double* dst = frames_buf.data() + size_t(k) * n;
    for (int i = 0; i < n; ++i) dst[i] = t[i] * w[i];
  }

  std::vector<double> acc(plen, 0.0), norm(plen, 0.0);
  for (int k = 0; k < S.frames; ++k) {
    const double* f = frames_buf.data() + size_t(k) * n;
    size_t off = size_t(k) * cfg.hop;
    for (int i = 0; i < n; ++i) {
      acc[off + i] += f[i];
      norm[off + i] += w[i] * w[i];
    }
  }
  double max_norm = 0.0;
  for (double v : norm) max_norm = std::max(max_norm, v);
  const double eps = 1e-12 * max_norm;

  TimeSignal y;
  y.sample_rate = cfg.sample_rate;
  y.samples.resize(size_t(S.num_samples));
  for (int i = 0; i < S.num_samples; ++i) {
    double nz = norm[size_t(pad) + i];
    y.samples[i] = nz > eps ? acc[size_t(pad) + i] / nz : 0.0;
  }
  return y;
}

TimeSignal istft(const Spectrogram& S, const SpectralConfig& cfg) {
  if (!(S.cfg == cfg)) throw InvalidInput("spectrogram config does not match the given config");
  return istft(S);
}

std::vector<double> mel_filterbank(const SpectralConfig& cfg, const MelConfig& mcfg) {
  validate(cfg);
  const int bins = cfg.n_fft / 2 + 1;
  const double nyq = double(cfg.sample_rate) / 2.0;
  const double fmax = mcfg.f_max == 0.0 ? nyq : mcfg.f_max;
  if (mcfg.n_mels < 1) throw InvalidConfig("n_mels must be >= 1");
  if (mcfg.f_min < 0.0 || mcfg.f_min >= fmax) throw InvalidConfig("need 0 <= f_min < f_max");
  if (fmax > nyq) throw InvalidConfig("f_max above Nyquist");

  std::vector<double> edge(size_t(mcfg.n_mels) + 2);
  const double mlo = mel_of(mcfg.f_min), mhi = mel_of(fmax);
  for (int i = 0; i < mcfg.n_mels + 2; ++i)
    edge[i] = mel_inv(mlo + (mhi - mlo) * double(i) / double(mcfg.n_mels + 1));

  std::vector<double> fb(size_t(mcfg.n_mels) * bins, 0.0);
  for (int m = 0; m < mcfg.n_mels; ++m) {
    const double lo = edge[m], c = edge[m + 1], hi = edge[m + 2];
    const double scale = 2.0 / (hi - lo);  // area normalization
    double rowsum = 0.0;
    for (int b = 0; b < bins; ++b) {
      double f = double(b) * cfg.sample_rate / cfg.n_fft;
      double v = 0.0;
      if (f > lo && f <= c && c > lo)
        v = (f - lo) / (c - lo);
      else if (f > c && f < hi && hi > c)
        v = (hi - f) / (hi - c);
      fb[size_t(m) * bins + b] = v * scale;
      rowsum += v;
    }
    if (rowsum == 0.0) {
      // mel spacing finer than bin spacing: keep the row usable with a
      // single tap at the bin nearest the filter center
      int b = int(std::lround(c * cfg.n_fft / cfg.sample_rate));
      b = std::clamp(b, 0, bins - 1);
      fb[size_t(m) * bins + b] = scale;
    }
  }
  return fb;
}

MelSpec mel_spectrogram(const TimeSignal& x, const SpectralConfig& cfg, const MelConfig& mcfg) {
  const std::vector<double> fb = mel_filterbank(cfg, mcfg);
  Spectrogram S = stft(x, cfg);
  MelSpec M;
  M.n_mels = mcfg.n_mels;
  M.frames = S.frames;
  M.data.assign(size_t(M.n_mels) * M.frames, 0.0);
  const int bins = S.bins;
  std::vector<double> mag(size_t(bins) * S.frames);
  for (size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(S.data[i]);
  for (int m = 0; m < M.n_mels; ++m)
    for (int b = 0; b < bins; ++b) {
      double f = fb[size_t(m) * bins + b];
      if (f == 0.0) continue;
      for (int k = 0; k < M.frames; ++k)
        M.data[size_t(m) * M.frames + k] += f * mag[size_t(b) * M.frames + k];
    }
  return M;
}

std::vector<double> mel_to_magnitude(const MelSpec& M, const SpectralConfig& cfg,
                                     const MelConfig& mcfg) {
  if (M.n_mels != mcfg.n_mels || M.frames < 1 ||
      M.data.size() != size_t(M.n_mels) * M.frames)
    throw InvalidInput("mel spectrogram shape inconsistent with config");
  const std::vector<double> fb = mel_filterbank(cfg, mcfg);
  const int bins = cfg.n_fft / 2 + 1;
  const int nm = mcfg.n_mels;

  // Least-norm solution mag = FB^T (FB FB^T)^-1 M, then clamp at 0.
  std::vector<double> g(size_t(nm) * nm, 0.0);
  double tr = 0.0;
  for (int i = 0; i < nm; ++i)
    for (int j = 0; j <= i; ++j) {
      double s = 0.0;
      for (int b = 0; b < bins; ++b) s += fb[size_t(i) * bins + b] * fb[size_t(j) * bins + b];
      g[size_t(i) * nm + j] = s;
      g[size_t(j) * nm + i] = s;
      if (i == j) tr += s;
    }
  const double ridge = 1e-12 * tr / nm;  // rank safety only
  for (int i = 0; i < nm; ++i) g[size_t(i) * nm + i] += ridge;
  const std::vector<double> l = cholesky(g, nm);

  std::vector<double> mag(size_t(bins) * M.frames, 0.0);
#pragma omp parallel for
  for (int k = 0; k < M.frames; ++k) {
    std::vector<double> y(static_cast<size_t>(nm));
    for (int m = 0; m < nm; ++m) y[m] = M.data[size_t(m) * M.frames + k];
    chol_solve(l, nm, y.data());
    for (int b = 0; b < bins; ++b) {
      double s = 0.0;
      for (int m = 0; m < nm; ++m) s += fb[size_t(m) * bins + b] * y[m];
      mag[size_t(b) * M.frames + k] = std::max(0.0, s);
    }
  }
  return mag;
}

TimeSignal griffin_lim(const std::vector<double>& mag, int bins, int frames,
                       const SpectralConfig& cfg, int iterations, uint64_t seed,
                       int num_samples, std::vector<double>* err_trace) {
  if (iterations < 1) throw InvalidInput("griffin_lim: iterations must be >= 1");
  if (bins != cfg.n_fft / 2 + 1 || frames < 1 || mag.size() != size_t(bins) * frames)
    throw InvalidInput("griffin_lim: magnitude shape inconsistent with config");
  for (double v : mag)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw InvalidInput("griffin_lim: magnitudes must be finite and >= 0");
  int ns = num_samples ? num_samples : (frames - 1) * cfg.hop;
  if (ns < cfg.n_fft) throw InvalidInput("griffin_lim: too few samples for one frame");
  if (frames != 1 + ns / cfg.hop)
    throw InvalidInput("griffin_lim: num_samples inconsistent with frame count");

  double mag_norm = 0.0;
  for (double v : mag) mag_norm += v * v;
  mag_norm = std::sqrt(mag_norm);

  TimeSignal out;
  out.sample_rate = cfg.sample_rate;
  if (mag_norm == 0.0) {
    out.samples.assign(size_t(ns), 0.0);
    if (err_trace) err_trace->assign(size_t(iterations), 0.0);
    return out;
  }

  Spectrogram S;
  S.cfg = cfg;
  S.bins = bins;
  S.frames = frames;
  S.num_samples = ns;
  S.data.resize(mag.size());
  Rng rng(seed);
  for (size_t i = 0; i < mag.size(); ++i) {
    double ph = -kPi + 2.0 * kPi * rng.uniform();
    S.data[i] = std::polar(mag[i], ph);
  }

  if (err_trace) err_trace->clear();
  for (int it = 0; it < iterations; ++it) {
    TimeSignal x = istft(S);
    Spectrogram C = stft(x, cfg);
    if (err_trace) {
      double e = 0.0;
      for (size_t i = 0; i < mag.size(); ++i) {
        double d = std::abs(C.data[i]) - mag[i];
        e += d * d;
      }
      err_trace->push_back(std::sqrt(e) / mag_norm);
    }
    for (size_t i = 0; i < mag.size(); ++i) {
      double a = std::abs(C.data[i]);
      S.data[i] = a > 1e-300 ? C.data[i] * (mag[i] / a) : fft::cd(mag[i], 0.0);
    }
  }
  return istft(S);
}

TimeSignal griffin_lim_mel(const MelSpec& M, const SpectralConfig& cfg, const MelConfig& mcfg,
                           int iterations, uint64_t seed, int num_samples,
                           std::vector<double>* err_trace) {
  std::vector<double> mag = mel_to_magnitude(M, cfg, mcfg);
  return griffin_lim(mag, cfg.n_fft / 2 + 1, M.frames, cfg, iterations, seed, num_samples,
                     err_trace);
}

std::vector<SpectralConfig> shipped_configs() {
  return {
      {8000, 512, 128, "hann"},
      {8000, 256, 64, "hann"},
      {8000, 128, 32, "hann"},  // benchmark analysis config
      {16000, 1024, 256, "hann"},
      {8000, 512, 128, "rect"},
  };
}

}  // namespace fusesep
