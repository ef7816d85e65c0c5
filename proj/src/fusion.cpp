// Copyright 2026 The fusesep authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fusesep/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <utility>

#include <json.hpp>

#include "fusesep/common.hpp"
#include "fusesep/fft.hpp"
#include "fusesep/metrics.hpp"
#include "fusesep/rng.hpp"

namespace fusesep {

using cd = std::complex<double>;

namespace {

// ---------------------------------------------------------------------------
// conv trunk

// Accumulation order inside one output element is bias, then (ic, dy, dx)
// ascending.  The serial reference kernel mirrors this order exactly, and
// parallelism is only ever over whole output elements, so results are
// bit-identical for any thread count.
void conv3x3(const ConvLayer& L, const Tensor3& x, Tensor3* out) {
  const int H = x.h, W = x.w;
  *out = Tensor3(L.out_ch, H, W);
#pragma omp parallel for
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
        out->at(oc, y, xx) = acc;
      }
    }
  }
}

// gx (optional) gets the input gradient; gL accumulates weight/bias grads.
void conv3x3_backward(const ConvLayer& L, const Tensor3& x, const Tensor3& gz, Tensor3* gx,
                      ConvLayer* gL) {
  const int H = x.h, W = x.w;
#pragma omp parallel for
  for (int oc = 0; oc < L.out_ch; ++oc) {
    double accb = 0.0;
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) accb += gz.at(oc, y, xx);
    gL->b[oc] += accb;
    for (int ic = 0; ic < L.in_ch; ++ic) {
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          double acc = 0.0;
          const int ylo = std::max(0, 1 - dy), yhi = std::min(H, H + 1 - dy);
          const int xlo = std::max(0, 1 - dx), xhi = std::min(W, W + 1 - dx);
          for (int y = ylo; y < yhi; ++y)
            for (int xx = xlo; xx < xhi; ++xx)
              acc += gz.at(oc, y, xx) * x.at(ic, y + dy - 1, xx + dx - 1);
          gL->w[(size_t(oc) * L.in_ch + ic) * 9 + dy * 3 + dx] += acc;
        }
      }
    }
  }
  if (!gx) return;
  *gx = Tensor3(L.in_ch, H, W);
#pragma omp parallel for
  for (int ic = 0; ic < L.in_ch; ++ic) {
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        double acc = 0.0;
        for (int oc = 0; oc < L.out_ch; ++oc) {
          const double* wr = &L.w[(size_t(oc) * L.in_ch + ic) * 9];
          for (int dy = 0; dy < 3; ++dy) {
            const int yy = y - dy + 1;
            if (yy < 0 || yy >= H) continue;
            for (int dx = 0; dx < 3; ++dx) {
              const int xc = xx - dx + 1;
              if (xc < 0 || xc >= W) continue;
              acc += gz.at(oc, yy, xc) * wr[dy * 3 + dx];
            }
          }
        }
        gx->at(ic, y, xx) = acc;
      }
    }
  }
}

constexpr double kLeakSlope = 0.01;

bool has_residual(const CombinerParams& p, int l) {
  return l + 1 < int(p.layers.size()) && p.layers[l].in_ch == p.layers[l].out_ch;
}

struct NetCache {
  std::vector<Tensor3> xs;  // input of each layer
  std::vector<Tensor3> zs;  // pre-activation, after the residual add
};

Tensor3 net_forward(const CombinerParams& p, const Tensor3& input, NetCache* cache) {
  if (p.layers.empty()) throw InvalidInput("combiner has no layers");
  if (p.layers.front().in_ch != input.c)
    throw InvalidInput("combiner input channel mismatch");
  const int L = int(p.layers.size());
  Tensor3 x = input;
  if (cache) {
    cache->xs.clear();
    cache->zs.clear();
  }
  for (int l = 0; l < L; ++l) {
    Tensor3 z;
    conv3x3(p.layers[l], x, &z);
    if (has_residual(p, l))
      for (size_t i = 0; i < z.v.size(); ++i) z.v[i] += x.v[i];
    if (cache) {
      cache->xs.push_back(std::move(x));
      cache->zs.push_back(z);
    }
    if (l + 1 < L) {
      x = z;
      for (double& t : x.v)
        if (t < 0.0) t *= kLeakSlope;
    } else {
      x = std::move(z);  // final layer is linear
    }
  }
  return x;
}

void net_backward(const CombinerParams& p, const NetCache& c, const Tensor3& g_out,
                  std::vector<ConvLayer>* grads) {
  const int L = int(p.layers.size());
  Tensor3 g = g_out;
  for (int l = L - 1; l >= 0; --l) {
    Tensor3 gz;
    if (l == L - 1) {
      gz = std::move(g);
    } else {
      gz = g;
      for (size_t i = 0; i < gz.v.size(); ++i)
        if (c.zs[l].v[i] < 0.0) gz.v[i] *= kLeakSlope;
    }
    Tensor3 gx;
    conv3x3_backward(p.layers[l], c.xs[l], gz, l > 0 ? &gx : nullptr, &(*grads)[l]);
    if (l > 0) {
      if (has_residual(p, l))
        for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gz.v[i];
      g = std::move(gx);
    }
  }
}

Tensor3 stack_features(const MagnitudeFeatures& a, const PhaseFeatures& psi) {
  if (a.a.c != 2 || psi.psi.c != 2 || a.a.h != psi.psi.h || a.a.w != psi.psi.w)
    throw InvalidInput("feature stacks disagree in shape");
  Tensor3 in(4, a.a.h, a.a.w);
  const size_t plane = size_t(a.a.h) * a.a.w;
  std::copy(a.a.v.begin(), a.a.v.end(), in.v.begin());
  std::copy(psi.psi.v.begin(), psi.psi.v.end(), in.v.begin() + 2 * plane);
  return in;
}

std::vector<ConvLayer> zero_like(const std::vector<ConvLayer>& layers) {
  std::vector<ConvLayer> g(layers.size());
  for (size_t l = 0; l < layers.size(); ++l) {
    g[l].in_ch = layers[l].in_ch;
    g[l].out_ch = layers[l].out_ch;
    g[l].w.assign(layers[l].w.size(), 0.0);
    g[l].b.assign(layers[l].b.size(), 0.0);
  }
  return g;
}

// ---------------------------------------------------------------------------
// si-sdr gradient and the synthesis adjoint

// d(-si_sdr)/d vbar, scaled; false when vbar sits in the cap or floor
// plateau (zero gradient there).
bool si_sdr_grad(const std::vector<double>& v, const std::vector<double>& vbar, double scale,
                 std::vector<double>* g) {
  const size_t n = v.size();
  double vv = 0.0, s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    vv += v[i] * v[i];
    s += v[i] * vbar[i];
  }
  const double tt = s * s / vv;
  double ee = 0.0;
  const double cp = s / vv;
  for (size_t i = 0; i < n; ++i) {
    const double e = vbar[i] - cp * v[i];
    ee += e * e;
  }
  if (tt <= 0.0 || ee < 1e-20 * tt) return false;
  const double k = scale * (-10.0 / std::log(10.0));
  g->resize(n);
  for (size_t i = 0; i < n; ++i)
    (*g)[i] = k * (2.0 * v[i] / s - 2.0 * (vbar[i] - cp * v[i]) / ee);
  return true;
}

// Adjoint of istft under the d/dRe + j d/dIm gradient convention:
// divide by the synthesis norm, window each frame, forward transform, and
// scale bin b by mult_b/n_fft (1 at DC/Nyquist, 2 elsewhere, accounting for
// the one-sided layout).  DC/Nyquist gradients land real automatically.
void istft_adjoint(const std::vector<double>& g_time, const SpectralConfig& cfg, int frames,
                   int num_samples, Spectrogram* gV) {
  const int n = cfg.n_fft, hop = cfg.hop, bins = n / 2 + 1, pad = n / 2;
  const std::vector<double> win = make_window(cfg);
  const int padded = (frames - 1) * hop + n;
  std::vector<double> norm(padded, 0.0);
  for (int k = 0; k < frames; ++k)
    for (int t = 0; t < n; ++t) norm[k * hop + t] += win[t] * win[t];
  double mx = 0.0;
  for (double t : norm) mx = std::max(mx, t);
  const double eps = 1e-12 * mx;
  std::vector<double> gacc(padded, 0.0);
  for (int i = 0; i < num_samples; ++i)
    if (norm[pad + i] > eps) gacc[pad + i] = g_time[i] / norm[pad + i];
  gV->bins = bins;
  gV->frames = frames;
  gV->num_samples = num_samples;
  gV->cfg = cfg;
  gV->data.assign(size_t(bins) * frames, cd(0.0, 0.0));
#pragma omp parallel for
  for (int k = 0; k < frames; ++k) {
    std::vector<double> fr(n);
    for (int t = 0; t < n; ++t) fr[t] = win[t] * gacc[k * hop + t];
    const std::vector<cd> col = fft::rfft(fr.data(), n);
    for (int b = 0; b < bins; ++b) {
      const double mult = (b == 0 || b == n / 2) ? 1.0 : 2.0;
      gV->at(b, k) = col[b] * (mult / n);
    }
  }
}

// ---------------------------------------------------------------------------
// full pipeline (features -> trunk -> heads -> fusion -> synthesis)

struct PipeCache {
  NetCache net;
  Tensor3 d1, d2;
  FusionWeights w;
  Spectrogram V;
  TimeSignal vbar;
};

void pipe_forward(const Spectrogram& Vd, const Spectrogram& Vg, const CombinerParams& p,
                  PipeCache* c) {
  const Tensor3 input = stack_features(magnitude_features(Vd, Vg), phase_features(Vd, Vg));
  const Tensor3 out = net_forward(p, input, &c->net);
  if (out.c != 4) throw InvalidInput("combiner must project to 4 channels");
  c->d1 = Tensor3(2, out.h, out.w);
  c->d2 = Tensor3(2, out.h, out.w);
  const size_t plane = size_t(out.h) * out.w;
  std::copy(out.v.begin(), out.v.begin() + 2 * plane, c->d1.v.begin());
  std::copy(out.v.begin() + 2 * plane, out.v.end(), c->d2.v.begin());
  c->w = weights_from_heads(c->d1, c->d2);
  c->V = fuse_spectrum(Vd, Vg, c->w);
  c->vbar = istft(c->V);
}

void pipe_backward(const Spectrogram& Vd, const Spectrogram& Vg, const TimeSignal& v,
                   const CombinerParams& p, const PipeCache& c, double scale,
                   std::vector<ConvLayer>* grads) {
  std::vector<double> gt;
  if (!si_sdr_grad(v.samples, c.vbar.samples, scale, &gt)) return;
  Spectrogram gV;
  istft_adjoint(gt, Vd.cfg, c.V.frames, c.V.num_samples, &gV);
  const int bins = c.V.bins, frames = c.V.frames;
  Tensor3 gout(4, bins, frames);
  for (int b = 0; b < bins; ++b) {
    for (int k = 0; k < frames; ++k) {
      const size_t idx = size_t(b) * frames + k;
      const cd gv = gV.at(b, k);
      const cd ga = gv * std::conj(Vd.at(b, k));
      const cd gb = gv * std::conj(Vg.at(b, k));
      // q = d1*exp(-j*d2): dq/d d1 = exp(-j*d2), dq/d d2 = -j*q.
      const double p0 = c.d2.at(0, b, k), p1 = c.d2.at(1, b, k);
      const cd u0(std::cos(p0), -std::sin(p0)), u1(std::cos(p1), -std::sin(p1));
      gout.at(0, b, k) = (ga * std::conj(u0)).real();
      gout.at(1, b, k) = (gb * std::conj(u1)).real();
      gout.at(2, b, k) = -(ga * std::conj(c.w.alpha[idx])).imag();
      gout.at(3, b, k) = -(gb * std::conj(c.w.beta[idx])).imag();
    }
  }
  net_backward(p, c.net, gout, grads);
}

void validate_example(const TrainExample& ex) {
  const size_t C = ex.sources.size();
  if (C == 0) throw InvalidInput("training example has no sources");
  if (ex.vd.size() != C || ex.vg.size() != C)
    throw InvalidInput("per-example estimate counts must match the source count");
  const size_t len = ex.sources[0].samples.size();
  for (const TimeSignal& s : ex.sources)
    if (s.samples.size() != len) throw InvalidInput("sources differ in length");
  for (size_t j = 0; j < C; ++j)
    if (ex.vd[j].samples.size() != len || ex.vg[j].samples.size() != len)
      throw InvalidInput("estimates differ in length from the sources");
}

void validate_assignments(const std::vector<const TrainExample*>& batch,
                          const std::vector<std::vector<int>>& assignments) {
  if (assignments.size() != batch.size())
    throw InvalidInput("one assignment row per batch example required");
  for (size_t e = 0; e < batch.size(); ++e) {
    const size_t C = batch[e]->sources.size();
    if (assignments[e].size() != C) throw InvalidInput("assignment row size mismatch");
    for (int j : assignments[e])
      if (j < 0 || size_t(j) >= C) throw InvalidInput("assignment index out of range");
  }
}

std::vector<double> flatten_layers(const std::vector<ConvLayer>& layers) {
  std::vector<double> flat;
  for (const ConvLayer& L : layers) {
    flat.insert(flat.end(), L.w.begin(), L.w.end());
    flat.insert(flat.end(), L.b.begin(), L.b.end());
  }
  return flat;
}

}  // namespace

Tensor3 conv3x3_apply(const ConvLayer& L, const Tensor3& x) {
  if (L.in_ch != x.c || L.w.size() != size_t(L.out_ch) * L.in_ch * 9 ||
      L.b.size() != size_t(L.out_ch))
    throw InvalidInput("conv layer/input shape mismatch");
  Tensor3 out;
  conv3x3(L, x, &out);
  return out;
}

// ---------------------------------------------------------------------------
// parameters

CombinerParams make_combiner(const std::vector<int>& hidden, uint64_t seed) {
  for (int h : hidden)
    if (h < 1) throw InvalidConfig("hidden channel counts must be >= 1");
  CombinerParams p;
  p.hidden = hidden;
  p.seed = seed;
  std::vector<int> ch;
  ch.push_back(p.in_ch);
  ch.insert(ch.end(), hidden.begin(), hidden.end());
  ch.push_back(4);  // packed D1/D2 projection
  for (size_t l = 0; l + 1 < ch.size(); ++l) {
    ConvLayer L;
    L.in_ch = ch[l];
    L.out_ch = ch[l + 1];
    L.w.resize(size_t(L.out_ch) * L.in_ch * 9);
    L.b.assign(L.out_ch, 0.0);
    Rng rng(derive_seed(seed, uint64_t(l)));
    const double bound = 1.0 / std::sqrt(9.0 * L.in_ch);
    for (double& w : L.w) w = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(L));
  }
  // zero-init head with bias (1,0,0,0): the net starts as an exact
  // deterministic passthrough (alpha=1, beta=0) and training can only move
  // away from that baseline when doing so pays
  ConvLayer& head = p.layers.back();
  std::fill(head.w.begin(), head.w.end(), 0.0);
  head.b[0] = 1.0;
  return p;
}

size_t param_count(const CombinerParams& p) {
  size_t n = 0;
  for (const ConvLayer& L : p.layers) n += L.w.size() + L.b.size();
  return n;
}

std::vector<double> flatten_params(const CombinerParams& p) { return flatten_layers(p.layers); }

void unflatten_params(const std::vector<double>& flat, CombinerParams* p) {
  if (flat.size() != param_count(*p)) throw InvalidInput("flat parameter size mismatch");
  size_t off = 0;
  for (ConvLayer& L : p->layers) {
    std::copy(flat.begin() + off, flat.begin() + off + L.w.size(), L.w.begin());
    off += L.w.size();
    std::copy(flat.begin() + off, flat.begin() + off + L.b.size(), L.b.begin());
    off += L.b.size();
  }
}

void combiner_forward(const MagnitudeFeatures& a, const PhaseFeatures& psi,
                      const CombinerParams& p, Tensor3* d1, Tensor3* d2) {
  const Tensor3 out = net_forward(p, stack_features(a, psi), nullptr);
  if (out.c != 4) throw InvalidInput("combiner must project to 4 channels");
  *d1 = Tensor3(2, out.h, out.w);
  *d2 = Tensor3(2, out.h, out.w);
  const size_t plane = size_t(out.h) * out.w;
  std::copy(out.v.begin(), out.v.begin() + 2 * plane, d1->v.begin());
  std::copy(out.v.begin() + 2 * plane, out.v.end(), d2->v.begin());
}

// ---------------------------------------------------------------------------
// fusion

FusionWeights weights_from_heads(const Tensor3& d1, const Tensor3& d2) {
  if (!d1.same_shape(d2) || d1.c != 2) throw InvalidInput("heads must both be 2 x bins x frames");
  FusionWeights w;
  w.bins = d1.h;
  w.frames = d1.w;
  const size_t plane = size_t(d1.h) * d1.w;
  w.alpha.resize(plane);
  w.beta.resize(plane);
  for (size_t i = 0; i < plane; ++i) {
    const double m0 = d1.v[i], p0 = d2.v[i];
    const double m1 = d1.v[plane + i], p1 = d2.v[plane + i];
    w.alpha[i] = cd(m0 * std::cos(p0), -m0 * std::sin(p0));
    w.beta[i] = cd(m1 * std::cos(p1), -m1 * std::sin(p1));
  }
  return w;
}

static void check_pair(const Spectrogram& Vd, const Spectrogram& Vg) {
  if (Vd.bins != Vg.bins || Vd.frames != Vg.frames || Vd.num_samples != Vg.num_samples ||
      !(Vd.cfg == Vg.cfg))
    throw InvalidInput("spectrogram pair disagrees in shape or config");
}

Spectrogram fuse_spectrum(const Spectrogram& Vd, const Spectrogram& Vg, const FusionWeights& w) {
  check_pair(Vd, Vg);
  if (w.bins != Vd.bins || w.frames != Vd.frames)
    throw InvalidInput("fusion weights disagree with the spectrogram shape");
  Spectrogram V = Vd;
  for (size_t i = 0; i < V.data.size(); ++i)
    V.data[i] = w.alpha[i] * Vd.data[i] + w.beta[i] * Vg.data[i];
  return V;
}

TimeSignal apply_fusion(const Spectrogram& Vd, const Spectrogram& Vg, const FusionWeights& w) {
  return istft(fuse_spectrum(Vd, Vg, w));
}

double fusion_residual(const Spectrogram& Vd, const Spectrogram& Vg, const Spectrogram& Vref,
                       const FusionWeights& w) {
  check_pair(Vd, Vg);
  check_pair(Vd, Vref);
  if (w.bins != Vd.bins || w.frames != Vd.frames)
    throw InvalidInput("fusion weights disagree with the spectrogram shape");
  double acc = 0.0;
  for (size_t i = 0; i < Vd.data.size(); ++i) {
    const cd r = Vref.data[i] - w.alpha[i] * Vd.data[i] - w.beta[i] * Vg.data[i];
    acc += r.real() * r.real() + r.imag() * r.imag();
  }
  return acc;
}

FusionWeights oracle_weights(const Spectrogram& Vd, const Spectrogram& Vg,
                             const Spectrogram& Vref, double lambda) {
  check_pair(Vd, Vg);
  check_pair(Vd, Vref);
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidConfig("ridge weight must be finite and >= 0");
  const int bins = Vd.bins, frames = Vd.frames;
  FusionWeights w;
  w.bins = bins;
  w.frames = frames;
  w.alpha.resize(size_t(bins) * frames);
  w.beta.resize(size_t(bins) * frames);
#pragma omp parallel for
  for (int b = 0; b < bins; ++b) {
    double sdd = 0.0, sgg = 0.0;
    cd mgd(0.0, 0.0), rd(0.0, 0.0), rg(0.0, 0.0);
    for (int k = 0; k < frames; ++k) {
      const cd d = Vd.at(b, k), g = Vg.at(b, k), r = Vref.at(b, k);
      sdd += std::norm(d);
      sgg += std::norm(g);
      mgd += g * std::conj(d);
      rd += r * std::conj(d);
      rg += r * std::conj(g);
    }
    // Normal equations:
    //   (sdd+l) a +      mgd b = rd
    //   conj(mgd) a + (sgg+l) b = rg
    const double A = sdd + lambda, C = sgg + lambda;
    const double det = A * C - std::norm(mgd);
    cd alpha, beta;
    if (det >= 1e-12) {
      alpha = (rd * C - mgd * rg) / det;
      beta = (A * rg - std::conj(mgd) * rd) / det;
    } else if (A >= 1e-12) {
      alpha = rd / A;  // collinear or silent Vg: scalar LS on Vd
      beta = cd(0.0, 0.0);
    } else if (C >= 1e-12) {
      alpha = cd(0.0, 0.0);
      beta = rg / C;
    } else {
      alpha = cd(1.0, 0.0);  // both estimates silent in this bin
      beta = cd(0.0, 0.0);
    }
    for (int k = 0; k < frames; ++k) {
      const size_t idx = size_t(b) * frames + k;
      w.alpha[idx] = alpha;
      w.beta[idx] = beta;
    }
  }
  return w;
}

FusionWeights oracle_weights_per_tile(const Spectrogram& Vd, const Spectrogram& Vg,
                                      const Spectrogram& Vref, double lambda) {
  check_pair(Vd, Vg);
  check_pair(Vd, Vref);
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InvalidConfig("per-tile least squares needs a ridge weight > 0");
  const int bins = Vd.bins, frames = Vd.frames;
  FusionWeights w;
  w.bins = bins;
  w.frames = frames;
  w.alpha.resize(size_t(bins) * frames);
  w.beta.resize(size_t(bins) * frames);
#pragma omp parallel for
  for (int b = 0; b < bins; ++b) {
    for (int k = 0; k < frames; ++k) {
      const cd d = Vd.at(b, k), g = Vg.at(b, k), r = Vref.at(b, k);
      const double A = std::norm(d) + lambda, C = std::norm(g) + lambda;
      const cd mgd = g * std::conj(d);
      const double det = A * C - std::norm(mgd);  // = lambda*(|d|^2+|g|^2+lambda) > 0
      const cd rd = r * std::conj(d), rg = r * std::conj(g);
      const size_t idx = size_t(b) * frames + k;
      w.alpha[idx] = (rd * C - mgd * rg) / det;
      w.beta[idx] = (A * rg - std::conj(mgd) * rd) / det;
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// training

double combiner_loss(const std::vector<const TrainExample*>& batch,
                     const std::vector<std::vector<int>>& assignments, const CombinerParams& p,
                     const SpectralConfig& cfg) {
  if (batch.empty()) throw InvalidInput("empty batch");
  validate_assignments(batch, assignments);
  double total = 0.0;
  for (size_t e = 0; e < batch.size(); ++e) {
    const TrainExample& ex = *batch[e];
    validate_example(ex);
    const double scale = 1.0 / (double(batch.size()) * double(ex.sources.size()));
    for (size_t i = 0; i < ex.sources.size(); ++i) {
      const int j = assignments[e][i];
      PipeCache c;
      pipe_forward(stft(ex.vd[j], cfg), stft(ex.vg[j], cfg), p, &c);
      total += scale * (-si_sdr(ex.sources[i], c.vbar));
    }
  }
  return total;
}

double combiner_backward(const std::vector<const TrainExample*>& batch,
                         const std::vector<std::vector<int>>& assignments,
                         const CombinerParams& p, const SpectralConfig& cfg,
                         std::vector<ConvLayer>* grads, double loss_scale) {
  if (batch.empty()) throw InvalidInput("empty batch");
  validate_assignments(batch, assignments);
  *grads = zero_like(p.layers);
  double total = 0.0;
  for (size_t e = 0; e < batch.size(); ++e) {
    const TrainExample& ex = *batch[e];
    validate_example(ex);
    const double scale = loss_scale / (double(batch.size()) * double(ex.sources.size()));
    for (size_t i = 0; i < ex.sources.size(); ++i) {
      const int j = assignments[e][i];
      const Spectrogram svd = stft(ex.vd[j], cfg), svg = stft(ex.vg[j], cfg);
      PipeCache c;
      pipe_forward(svd, svg, p, &c);
      total += scale * (-si_sdr(ex.sources[i], c.vbar));
      pipe_backward(svd, svg, ex.sources[i], p, c, scale, grads);
    }
  }
  return total;
}

CombinerParams train_combiner(const std::vector<TrainExample>& dataset, const TrainConfig& tcfg,
                              std::vector<TrainLogRow>* log) {
  if (dataset.empty()) throw InvalidInput("empty training set");
  if (!(tcfg.learning_rate > 0.0) || !std::isfinite(tcfg.learning_rate))
    throw InvalidConfig("learning rate must be finite and > 0");
  if (tcfg.batch_size < 1) throw InvalidConfig("batch size must be >= 1");
  if (tcfg.epochs < 0) throw InvalidConfig("epoch count must be >= 0");
  for (const TrainExample& ex : dataset) validate_example(ex);

  CombinerParams params = make_combiner(tcfg.hidden, tcfg.seed);
  if (tcfg.epochs == 0) return params;

  // The estimate spectra never change across steps; transform once.
  struct ExSpec {
    std::vector<Spectrogram> d, g;
  };
  std::vector<ExSpec> spec(dataset.size());
  for (size_t e = 0; e < dataset.size(); ++e) {
    for (size_t j = 0; j < dataset[e].vd.size(); ++j) {
      spec[e].d.push_back(stft(dataset[e].vd[j], tcfg.spectral));
      spec[e].g.push_back(stft(dataset[e].vg[j], tcfg.spectral));
    }
  }

  const size_t P = param_count(params);
  std::vector<double> m(P, 0.0), v(P, 0.0);
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  double b1t = 1.0, b2t = 1.0;

  Rng order_rng(derive_seed(tcfg.seed, 0x7261696e6f726472ull));
  std::vector<int> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    double sisdr_sum = 0.0;
    long pair_count = 0;
    for (size_t pos = 0; pos < order.size(); pos += size_t(tcfg.batch_size)) {
      const size_t nb = std::min(size_t(tcfg.batch_size), order.size() - pos);

      // Forward every estimate once, pick the batch assignment by Hungarian
      // on -si_sdr, then reuse the cached forwards for the backward pass.
      std::vector<std::vector<PipeCache>> caches(nb);
      std::vector<std::vector<int>> asg(nb);
      std::vector<ConvLayer> grads = zero_like(params.layers);
      for (size_t bi = 0; bi < nb; ++bi) {
        const TrainExample& ex = dataset[order[pos + bi]];
        const ExSpec& sp = spec[order[pos + bi]];
        const size_t C = ex.sources.size();
        caches[bi].resize(C);
        std::vector<std::vector<double>> cost(C, std::vector<double>(C));
        for (size_t j = 0; j < C; ++j) {
          pipe_forward(sp.d[j], sp.g[j], params, &caches[bi][j]);
          for (size_t i = 0; i < C; ++i)
            cost[i][j] = -si_sdr(ex.sources[i], caches[bi][j].vbar);
        }
        asg[bi] = hungarian_assign(cost).perm;
        const double scale = 1.0 / (double(nb) * double(C));
        for (size_t i = 0; i < C; ++i) {
          const int j = asg[bi][i];
          sisdr_sum += -cost[i][j];
          ++pair_count;
          pipe_backward(sp.d[j], sp.g[j], ex.sources[i], params, caches[bi][j], scale, &grads);
        }
      }

      std::vector<double> theta = flatten_params(params);
      const std::vector<double> gv = flatten_layers(grads);
      b1t *= b1;
      b2t *= b2;
      for (size_t i = 0; i < P; ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * gv[i];
        v[i] = b2 * v[i] + (1.0 - b2) * gv[i] * gv[i];
        const double mhat = m[i] / (1.0 - b1t), vhat = v[i] / (1.0 - b2t);
        theta[i] -= tcfg.learning_rate * mhat / (std::sqrt(vhat) + adam_eps);
      }
      unflatten_params(theta, &params);
    }
    if (log) log->push_back({epoch, sisdr_sum / double(pair_count)});
  }
  return params;
}

// ---------------------------------------------------------------------------
// checkpoints

uint64_t combiner_config_hash(const CombinerParams& p) {
  char buf[32];
  std::string s = "in=";
  std::snprintf(buf, sizeof buf, "%d", p.in_ch);
  s += buf;
  s += ";hidden=";
  for (size_t i = 0; i < p.hidden.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%d", i ? "," : "", p.hidden[i]);
    s += buf;
  }
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void save_combiner(const std::string& path, const CombinerParams& p) {
  nlohmann::json j;
  j["format"] = "fusesep-combiner";
  j["version"] = 1;
  j["in_ch"] = p.in_ch;
  j["hidden"] = p.hidden;
  j["seed"] = p.seed;
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(combiner_config_hash(p)));
  j["config_hash"] = buf;
  nlohmann::json layers = nlohmann::json::array();
  for (const ConvLayer& L : p.layers) {
    nlohmann::json jl;
    jl["in"] = L.in_ch;
    jl["out"] = L.out_ch;
    jl["w"] = L.w;
    jl["b"] = L.b;
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f << j.dump(2) << "\n";
  if (!f) throw DataError("short write on checkpoint: " + path);
}

CombinerParams load_combiner(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot read checkpoint: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "fusesep-combiner")
      throw DataError("not a combiner checkpoint");
    if (j.at("version").get<int>() != 1) throw DataError("unsupported checkpoint version");
    CombinerParams p;
    p.in_ch = j.at("in_ch").get<int>();
    p.hidden = j.at("hidden").get<std::vector<int>>();
    p.seed = j.at("seed").get<uint64_t>();
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(combiner_config_hash(p)));
    if (j.at("config_hash").get<std::string>() != buf)
      throw DataError("checkpoint config hash mismatch");
    std::vector<int> ch;
    ch.push_back(p.in_ch);
    ch.insert(ch.end(), p.hidden.begin(), p.hidden.end());
    ch.push_back(4);
    for (const nlohmann::json& jl : j.at("layers")) {
      ConvLayer L;
      L.in_ch = jl.at("in").get<int>();
      L.out_ch = jl.at("out").get<int>();
      L.w = jl.at("w").get<std::vector<double>>();
      L.b = jl.at("b").get<std::vector<double>>();
      if (L.w.size() != size_t(L.out_ch) * L.in_ch * 9 || L.b.size() != size_t(L.out_ch))
        throw DataError("checkpoint layer shape mismatch");
      p.layers.push_back(std::move(L));
    }
    if (p.layers.size() + 1 != ch.size()) throw DataError("checkpoint layer count mismatch");
    for (size_t l = 0; l < p.layers.size(); ++l)
      if (p.layers[l].in_ch != ch[l] || p.layers[l].out_ch != ch[l + 1])
        throw DataError("checkpoint channel plan mismatch");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace fusesep
